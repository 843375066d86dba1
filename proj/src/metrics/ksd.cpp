#include "bnn/metrics/ksd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnn/errors.hpp"
#include "bnn/metrics/mmd.hpp"
#include "bnn/rng.hpp"

namespace bnn {

ScoreOracle score_oracle(const Potential& potential) {
  return [&potential](const ParamVector& w) { return score(potential, w); };
}

double stein_kernel(std::span<const double> w, std::span<const double> w_prime, std::span<const double> score_w,
                    std::span<const double> score_w_prime, double lengthscale) {
  const std::size_t d = w.size();
  if (w_prime.size() != d || score_w.size() != d || score_w_prime.size() != d) {
    throw DimensionError("stein_kernel: argument dimensions differ");
  }
  if (!(lengthscale > 0.0)) throw std::invalid_argument("stein_kernel: lengthscale must be > 0");
  double r2 = 0.0;
  double s_diff = 0.0;  // <s(w) - s(w'), w - w'>
  double s_dot = 0.0;   // <s(w), s(w')>
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = w[i] - w_prime[i];
    r2 += diff * diff;
    s_diff += (score_w[i] - score_w_prime[i]) * diff;
    s_dot += score_w[i] * score_w_prime[i];
  }
  const double l2 = lengthscale * lengthscale;
  const double u = 1.0 + r2 / l2;
  const double k = 1.0 / std::sqrt(u);
  const double u32 = k / u;        // u^(-3/2)
  const double u52 = u32 / u;      // u^(-5/2)
  const double trace = static_cast<double>(d) * u32 / l2 - 3.0 * u52 * r2 / (l2 * l2);
  // <s(w), grad_w' k> + <s(w'), grad_w k> with grad_w' k = u^(-3/2) (w - w') / l^2 = -grad_w k.
  const double cross = u32 * s_diff / l2;
  return trace + cross + s_dot * k;
}

double stein_kernel(const ParamVector& w, const ParamVector& w_prime, const ScoreOracle& score, double lengthscale) {
  const ParamVector sw = score(w);
  const ParamVector swp = score(w_prime);
  return stein_kernel({w.data(), static_cast<std::size_t>(w.size())},
                      {w_prime.data(), static_cast<std::size_t>(w_prime.size())},
                      {sw.data(), static_cast<std::size_t>(sw.size())},
                      {swp.data(), static_cast<std::size_t>(swp.size())}, lengthscale);
}

double ksd_from_scores(const SampleMatrix& samples, const SampleMatrix& scores, double lengthscale) {
  if (samples.rows() == 0) throw std::invalid_argument("ksd: empty sample");
  if (scores.rows() != samples.rows() || scores.cols() != samples.cols()) {
    throw DimensionError("ksd: scores do not match samples");
  }
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    if (!scores.row(i).allFinite()) throw std::domain_error("ksd: non-finite score at sample " + std::to_string(i));
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    double row = 0.5 * stein_kernel(row_span(samples, i), row_span(samples, i), row_span(scores, i),
                                    row_span(scores, i), lengthscale);
    for (Eigen::Index j = i + 1; j < samples.rows(); ++j) {
      row += stein_kernel(row_span(samples, i), row_span(samples, j), row_span(scores, i), row_span(scores, j),
                          lengthscale);
    }
    total += 2.0 * row;
  }
  const double n = static_cast<double>(samples.rows());
  return std::sqrt(std::max(total / (n * n), 0.0));
}

double ksd(const SampleMatrix& samples, const ScoreOracle& score, double lengthscale) {
  SampleMatrix scores(samples.rows(), samples.cols());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const ParamVector s = score(samples.row(i).transpose());
    if (s.size() != samples.cols()) throw DimensionError("ksd: score has the wrong length");
    scores.row(i) = s.transpose();
  }
  return ksd_from_scores(samples, scores, lengthscale);
}

double median_heuristic(const SampleMatrix& pooled, std::size_t subsample_size, std::uint64_t seed) {
  if (pooled.rows() < 2 || subsample_size < 2) throw std::invalid_argument("median_heuristic: need at least 2 points");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(pooled.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  if (rows.size() > subsample_size) {
    Rng rng(seed);
    for (std::size_t i = 0; i < subsample_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(subsample_size);
  }
  std::vector<double> dist;
  dist.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      dist.push_back((pooled.row(rows[i]) - pooled.row(rows[j])).norm());
    }
  }
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  const double upper = dist[mid];
  if (dist.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace bnn
