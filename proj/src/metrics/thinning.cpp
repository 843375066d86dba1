#include "bnn/metrics/thinning.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bnn/metrics/kernels.hpp"
#include "bnn/metrics/mmd.hpp"

namespace bnn {

std::vector<std::size_t> mmd_thin(const SampleMatrix& samples, std::size_t m) {
  const auto t = static_cast<std::size_t>(samples.rows());
  if (m == 0) throw std::invalid_argument("mmd_thin: target size must be positive");
  if (m > t) throw std::invalid_argument("mmd_thin: target size exceeds sample size");

  // mean_k[j] = (1/T) sum_t k(x_t, x_j); self_k[j] = k(x_j, x_j)
  // With k(a, b) = |a| + |b| - |a - b|: mean_k[j] = |x_j| + mean|x| - mean_t |x_t - x_j|.
  std::vector<double> norms(t);
  std::vector<double> dist_sum(t, 0.0);
  double norm_mean = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const auto ri = row_span(samples, static_cast<Eigen::Index>(i));
    norms[i] = euclidean_norm(ri);
    norm_mean += norms[i];
    for (std::size_t j = i + 1; j < t; ++j) {
      const double d = euclidean_distance(ri, row_span(samples, static_cast<Eigen::Index>(j)));
      dist_sum[i] += d;
      dist_sum[j] += d;
    }
  }
  norm_mean /= static_cast<double>(t);
  std::vector<double> mean_k(t);
  std::vector<double> self_k(t);
  for (std::size_t j = 0; j < t; ++j) {
    mean_k[j] = norms[j] + norm_mean - dist_sum[j] / static_cast<double>(t);
    self_k[j] = 2.0 * norms[j];
  }

  // picked_k[j] = sum over already selected s of k(x_s, x_j)
  std::vector<double> picked_k(t, 0.0);
  std::vector<std::size_t> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    // (i+1)^2 MMD^2 up to terms independent of j
    std::size_t best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < t; ++j) {
      const double v = self_k[j] + 2.0 * picked_k[j] - 2.0 * static_cast<double>(i + 1) * mean_k[j];
      // near-ties go to the smallest index so the trace does not hinge on rounding
      if (j == 0 || v < best_value - 1e-12 * (1.0 + std::abs(best_value))) {
        best_value = v;
        best = j;
      }
    }
    out.push_back(best);
    if (i + 1 == m) break;
    const auto rb = row_span(samples, static_cast<Eigen::Index>(best));
    for (std::size_t j = 0; j < t; ++j) {
      picked_k[j] += norms[best] + norms[j] - euclidean_distance(rb, row_span(samples, static_cast<Eigen::Index>(j)));
    }
  }
  return out;
}

}  // namespace bnn
