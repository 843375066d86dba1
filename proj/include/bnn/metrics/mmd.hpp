#pragma once

#include <span>

#include "bnn/core/mlp.hpp"
#include "bnn/metrics/kernels.hpp"

namespace bnn {

/// Biased (V-statistic) estimator,
/// MMD^2 = mean k(A, A) + mean k(B, B) - 2 mean k(A, B), clamped at 0 before the square root.
/// Rows are samples: parameter vectors in weight space, prediction vectors on a fixed grid
/// in function space. Pair sums run row-major over (i, j).
double mmd(const SampleMatrix& a, const SampleMatrix& b, const KernelSpec& kernel = {});

/// Pieces of the estimator, for callers that reuse the self terms across many pairs.
/// kernel_self_mean sums the diagonal plus twice the upper triangle, row by row.
double kernel_self_mean(const SampleMatrix& a, const KernelSpec& kernel = {});
double kernel_cross_mean(const SampleMatrix& a, const SampleMatrix& b, const KernelSpec& kernel = {});
double mmd_from_means(double self_a, double self_b, double cross);

/// Row i of `m` as a span.
inline std::span<const double> row_span(const SampleMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace bnn
