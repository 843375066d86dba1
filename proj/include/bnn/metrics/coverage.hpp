#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnn/core/mlp.hpp"

namespace bnn {

/// Central predictive intervals at several levels over a fixed test set.
/// lower/upper are levels x n_test; mean has length n_test.
struct PredictiveBand {
  std::vector<double> levels;
  Eigen::VectorXd mean;
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
  std::uint64_t test_fingerprint = 0;

  std::size_t num_test() const { return static_cast<std::size_t>(mean.size()); }
  /// Row of `lower`/`upper` holding `level`; throws if the level is absent.
  Eigen::Index level_index(double level) const;
};

struct BandOptions {
  std::size_t noise_draws = 100;  // per function draw; ignored when noise_sigma == 0
  std::uint64_t seed = 0;
  std::uint64_t test_fingerprint = 0;
};

/// function_samples is n_draws x n_test (row i: f(x; w_i) over the test inputs).
/// Pools y = f + sigma z over n_draws * noise_draws values per input and takes type-7
/// empirical quantiles at (1 - level)/2 and (1 + level)/2.
PredictiveBand predictive_band(const SampleMatrix& function_samples, double noise_sigma,
                               std::span<const double> levels, const BandOptions& options = {});

/// Same construction for a single level.
PredictiveBand predictive_band(const SampleMatrix& function_samples, double noise_sigma, double level,
                               const BandOptions& options = {});

/// Type-7 quantile of already sorted data.
double sorted_quantile(std::span<const double> sorted, double p);

struct CoverageReport {
  double level = 0.0;
  std::vector<double> picp_per_replicate;
  double mcp = 0.0;
  std::vector<double> ccp_per_x;
  double ccp_mae = 0.0;
  std::vector<double> q2_per_replicate;  // NaN when the targets have no variance
};

using CoverageIndicators = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// I(j, i) = 1 when target i lies inside replicate j's band at `level` (bounds inclusive).
CoverageIndicators coverage_indicators(std::span<const PredictiveBand> bands, const Eigen::VectorXd& targets,
                                       double level);

/// PICP, MCP, CCP and ccp_mae from an indicator array (replicates x test points).
CoverageReport coverage_from_indicators(const CoverageIndicators& indicators, double level);

CoverageReport coverage(std::span<const PredictiveBand> bands, const Eigen::VectorXd& targets, double level);

/// Q^2 = 1 - sum (y - f)^2 / sum (y - mean y)^2.
double q2(const Eigen::VectorXd& predictive_mean, const Eigen::VectorXd& targets);

}  // namespace bnn
