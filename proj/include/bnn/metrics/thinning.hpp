#pragma once

#include <cstddef>
#include <vector>

#include "bnn/core/mlp.hpp"

namespace bnn {

/// Greedy MMD quantization under the energy kernel. Step i picks the row j minimizing
/// MMD^2(P_T, (delta_{pi(0)} + ... + delta_{pi(i-1)} + delta_j) / (i + 1)), where P_T is the
/// empirical measure of all T rows. Indices may repeat; ties go to the smallest index.
/// The kernel matrix is never stored: O(T^2 d) for the row means plus O(m T d) for the picks.
std::vector<std::size_t> mmd_thin(const SampleMatrix& samples, std::size_t m);

}  // namespace bnn
