#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bnn/core/mlp.hpp"

namespace bnn {

/// Output of one sampler run: rows of `samples` are parameter vectors.
struct SampleSet {
  SampleMatrix samples;
  std::string algorithm;
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 0;
  std::vector<std::string> notes;  // warnings raised during the run

  std::size_t size() const noexcept { return static_cast<std::size_t>(samples.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(samples.cols()); }
  ParamVector sample(std::size_t i) const { return samples.row(static_cast<Eigen::Index>(i)).transpose(); }
};

SampleMatrix stack_rows(const std::vector<ParamVector>& rows);

/// Rows of `m` selected by `indices`, in order (repeats allowed).
SampleMatrix gather_rows(const SampleMatrix& m, const std::vector<std::size_t>& indices);

}  // namespace bnn
