#include "bnn/metrics/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bnn/errors.hpp"

namespace bnn {

namespace {

double mean_row_norm(const SampleMatrix& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) s += euclidean_norm(row_span(a, i));
  return s / static_cast<double>(a.rows());
}

}  // namespace

// Mean of k over all ordered pairs of rows of `a`, using symmetry: diagonal plus twice the upper triangle.
// The energy kernel is split as mean ||a|| + mean ||a'|| - mean ||a - a'||, so norms are computed once per row.
double kernel_self_mean(const SampleMatrix& a, const KernelSpec& kernel) {
  if (a.rows() == 0) throw std::invalid_argument("mmd: empty sample");
  const double n = static_cast<double>(a.rows());
  if (kernel.kind == KernelKind::energy) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double row = 0.0;
      for (Eigen::Index j = i + 1; j < a.rows(); ++j) row += euclidean_distance(row_span(a, i), row_span(a, j));
      total += 2.0 * row;
    }
    return 2.0 * mean_row_norm(a) - total / (n * n);
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.5 * kernel_value(kernel, row_span(a, i), row_span(a, i));
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) row += kernel_value(kernel, row_span(a, i), row_span(a, j));
    total += 2.0 * row;
  }
  return total / (n * n);
}

double kernel_cross_mean(const SampleMatrix& a, const SampleMatrix& b, const KernelSpec& kernel) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("mmd: empty sample");
  if (a.cols() != b.cols()) throw DimensionError("mmd: samples have different dimensions");
  const bool energy = kernel.kind == KernelKind::energy;
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      row += energy ? euclidean_distance(row_span(a, i), row_span(b, j))
                    : kernel_value(kernel, row_span(a, i), row_span(b, j));
    }
    total += row;
  }
  const double mean = total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
  return energy ? mean_row_norm(a) + mean_row_norm(b) - mean : mean;
}

double mmd_from_means(double self_a, double self_b, double cross) {
  return std::sqrt(std::max(self_a + self_b - 2.0 * cross, 0.0));
}

double mmd(const SampleMatrix& a, const SampleMatrix& b, const KernelSpec& kernel) {
  kernel.validate();
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("mmd: empty sample");
  if (a.cols() != b.cols()) throw DimensionError("mmd: samples have different dimensions");
  // Same empirical measure; skips rounding noise from the differently ordered cross sum.
  if (a.rows() == b.rows() && a == b) return 0.0;
  return mmd_from_means(kernel_self_mean(a, kernel), kernel_self_mean(b, kernel), kernel_cross_mean(a, b, kernel));
}

}  // namespace bnn
