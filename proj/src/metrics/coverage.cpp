#include "bnn/metrics/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {

Eigen::Index PredictiveBand::level_index(double level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (std::abs(levels[i] - level) <= 1e-12) return static_cast<Eigen::Index>(i);
  }
  throw std::invalid_argument("PredictiveBand: level " + std::to_string(level) + " was not computed");
}

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("sorted_quantile: empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

PredictiveBand predictive_band(const SampleMatrix& function_samples, double noise_sigma,
                               std::span<const double> levels, const BandOptions& options) {
  const Eigen::Index n_draws = function_samples.rows();
  const Eigen::Index n_test = function_samples.cols();
  if (n_draws < 2) throw std::invalid_argument("predictive_band: need at least 2 function draws");
  if (levels.empty()) throw std::invalid_argument("predictive_band: no levels requested");
  for (double level : levels) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("predictive_band: levels must lie in (0, 1)");
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("predictive_band: noise_sigma must be >= 0");
  if (noise_sigma > 0.0 && options.noise_draws == 0) throw std::invalid_argument("predictive_band: noise_draws = 0");

  PredictiveBand band;
  band.levels.assign(levels.begin(), levels.end());
  band.mean = function_samples.colwise().mean().transpose();
  band.lower.resize(static_cast<Eigen::Index>(levels.size()), n_test);
  band.upper.resize(static_cast<Eigen::Index>(levels.size()), n_test);
  band.test_fingerprint = options.test_fingerprint;

  const std::size_t per_draw = noise_sigma > 0.0 ? options.noise_draws : 1;
  std::vector<double> pool(static_cast<std::size_t>(n_draws) * per_draw);
  Rng rng(options.seed);
  std::normal_distribution<double> normal;
  for (Eigen::Index x = 0; x < n_test; ++x) {
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < n_draws; ++i) {
      const double f = function_samples(i, x);
      if (noise_sigma > 0.0) {
        for (std::size_t j = 0; j < per_draw; ++j) pool[k++] = f + noise_sigma * normal(rng);
      } else {
        pool[k++] = f;
      }
    }
    std::sort(pool.begin(), pool.end());
    for (std::size_t l = 0; l < levels.size(); ++l) {
      const auto row = static_cast<Eigen::Index>(l);
      band.lower(row, x) = sorted_quantile(pool, 0.5 * (1.0 - levels[l]));
      band.upper(row, x) = sorted_quantile(pool, 0.5 * (1.0 + levels[l]));
    }
  }
  return band;
}

PredictiveBand predictive_band(const SampleMatrix& function_samples, double noise_sigma, double level,
                               const BandOptions& options) {
  const double levels[] = {level};
  return predictive_band(function_samples, noise_sigma, levels, options);
}

CoverageIndicators coverage_indicators(std::span<const PredictiveBand> bands, const Eigen::VectorXd& targets,
                                       double level) {
  if (bands.empty()) throw std::invalid_argument("coverage: no replicates");
  const auto n_test = static_cast<std::size_t>(targets.size());
  CoverageIndicators out(static_cast<Eigen::Index>(bands.size()), targets.size());
  for (std::size_t j = 0; j < bands.size(); ++j) {
    const PredictiveBand& band = bands[j];
    if (band.num_test() != n_test || band.test_fingerprint != bands.front().test_fingerprint) {
      throw DimensionError("coverage: replicate " + std::to_string(j) + " was evaluated on a different test set");
    }
    const Eigen::Index row = band.level_index(level);
    for (Eigen::Index i = 0; i < targets.size(); ++i) {
      const double y = targets(i);
      out(static_cast<Eigen::Index>(j), i) = (band.lower(row, i) <= y && y <= band.upper(row, i)) ? 1 : 0;
    }
  }
  return out;
}

CoverageReport coverage_from_indicators(const CoverageIndicators& indicators, double level) {
  if (indicators.rows() == 0 || indicators.cols() == 0) throw std::invalid_argument("coverage: empty indicator array");
  const auto n_rep = static_cast<std::size_t>(indicators.rows());
  const auto n_test = static_cast<std::size_t>(indicators.cols());
  CoverageReport report;
  report.level = level;
  report.picp_per_replicate.assign(n_rep, 0.0);
  report.ccp_per_x.assign(n_test, 0.0);
  std::size_t hits = 0;
  for (std::size_t j = 0; j < n_rep; ++j) {
    std::size_t row_hits = 0;
    for (std::size_t i = 0; i < n_test; ++i) {
      if (indicators(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) != 0) {
        ++row_hits;
        report.ccp_per_x[i] += 1.0;
      }
    }
    hits += row_hits;
    report.picp_per_replicate[j] = static_cast<double>(row_hits) / static_cast<double>(n_test);
  }
  // Counting hits keeps mean-of-PICP and mean-of-CCP identical to rounding of a single division.
  report.mcp = static_cast<double>(hits) / static_cast<double>(n_rep * n_test);
  double mae = 0.0;
  for (double& c : report.ccp_per_x) {
    c /= static_cast<double>(n_rep);
    mae += std::abs(c - level);
  }
  report.ccp_mae = mae / static_cast<double>(n_test);
  return report;
}

CoverageReport coverage(std::span<const PredictiveBand> bands, const Eigen::VectorXd& targets, double level) {
  CoverageReport report = coverage_from_indicators(coverage_indicators(bands, targets, level), level);
  report.q2_per_replicate.reserve(bands.size());
  const bool has_variance = targets.size() >= 2 && (targets.array() != targets(0)).any();
  for (const PredictiveBand& band : bands) {
    report.q2_per_replicate.push_back(has_variance ? q2(band.mean, targets)
                                                   : std::numeric_limits<double>::quiet_NaN());
  }
  return report;
}

double q2(const Eigen::VectorXd& predictive_mean, const Eigen::VectorXd& targets) {
  if (predictive_mean.size() != targets.size()) throw DimensionError("q2: prediction and target lengths differ");
  if (targets.size() < 2) throw std::invalid_argument("q2: need at least 2 test points");
  const double ss_tot = (targets.array() - targets.mean()).square().sum();
  if (!(ss_tot > 0.0)) throw std::domain_error("q2: targets have zero variance");
  return 1.0 - (targets - predictive_mean).squaredNorm() / ss_tot;
}

}  // namespace bnn
