#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "bnn/core/potential.hpp"
#include "bnn/samplers/sample_set.hpp"

namespace bnn {

struct SwagConfig {
  double step_size = 1e-6;       // constant SGD step
  std::size_t iterations = 1000; // SGD steps, one iterate collected per step
  std::size_t rank = 20;         // K: number of deviation columns kept
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

/// Gaussian with mean `mean` and covariance
/// 0.5 * diag(diag_variance) + 0.5 / (K - 1) * deviations * deviations^T.
struct SwagModel {
  ParamVector mean;
  ParamVector diag_variance;
  Eigen::MatrixXd deviations;  // d x K
  std::size_t collected = 0;
  std::vector<std::string> notes;
};

/// Running first/second moments and the last K centred iterates.
class SwagAccumulator {
 public:
  explicit SwagAccumulator(std::size_t rank);

  void collect(const ParamVector& w);
  std::size_t count() const noexcept { return count_; }
  const ParamVector& mean() const noexcept { return mean_; }
  SwagModel model() const;

 private:
  std::size_t rank_;
  std::size_t count_ = 0;
  ParamVector mean_;
  ParamVector sq_mean_;
  std::deque<ParamVector> deviations_;
};

/// Constant-step SGD from `map_params`, collecting every iterate.
SwagModel swag_fit(const Potential& potential, const ParamVector& map_params, const SwagConfig& config);

/// w = mean + sqrt(diag_variance / 2) o z1 + deviations z2 / sqrt(2 (K - 1)).
/// With fewer than two deviation columns the low-rank term is skipped.
SampleSet swag_sample(const SwagModel& model, std::size_t n, std::uint64_t seed);

}  // namespace bnn
