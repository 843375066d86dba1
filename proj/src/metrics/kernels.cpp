#include "bnn/metrics/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "bnn/errors.hpp"

namespace bnn {

namespace {

void check_same(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("kernel arguments have different dimensions");
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

}  // namespace

double euclidean_norm(std::span<const double> a) { return norm(a); }

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  check_same(a, b);
  return std::sqrt(squared_distance(a, b));
}

void KernelSpec::validate() const {
  if (kind == KernelKind::imq && !(lengthscale > 0.0)) throw std::invalid_argument("IMQ lengthscale must be > 0");
}

double energy_kernel(std::span<const double> a, std::span<const double> b) {
  check_same(a, b);
  return norm(a) + norm(b) - std::sqrt(squared_distance(a, b));
}

double imq_kernel(std::span<const double> a, std::span<const double> b, double lengthscale) {
  check_same(a, b);
  return 1.0 / std::sqrt(1.0 + squared_distance(a, b) / (lengthscale * lengthscale));
}

double kernel_value(const KernelSpec& kernel, std::span<const double> a, std::span<const double> b) {
  return kernel.kind == KernelKind::energy ? energy_kernel(a, b) : imq_kernel(a, b, kernel.lengthscale);
}

void imq_grad_first(std::span<const double> a, std::span<const double> b, double lengthscale, std::span<double> out) {
  check_same(a, b);
  if (out.size() != a.size()) throw DimensionError("imq_grad_first: output has the wrong size");
  const double l2 = lengthscale * lengthscale;
  const double u = 1.0 + squared_distance(a, b) / l2;
  const double c = -1.0 / (u * std::sqrt(u) * l2);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * (a[i] - b[i]);
}

}  // namespace bnn
