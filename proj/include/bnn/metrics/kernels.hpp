#pragma once

#include <span>

namespace bnn {

enum class KernelKind { energy, imq };

struct KernelSpec {
  KernelKind kind = KernelKind::energy;
  double lengthscale = 1.0;  // imq only

  void validate() const;
};

/// k(a, b) = ||a|| + ||b|| - ||a - b||.
double energy_kernel(std::span<const double> a, std::span<const double> b);

/// k(a, b) = (1 + ||a - b||^2 / l^2)^(-1/2).
double imq_kernel(std::span<const double> a, std::span<const double> b, double lengthscale);

double euclidean_norm(std::span<const double> a);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

double kernel_value(const KernelSpec& kernel, std::span<const double> a, std::span<const double> b);

/// Gradient of the IMQ kernel with respect to its first argument, written to `out`:
/// -(1 + r^2/l^2)^(-3/2) (a - b) / l^2. The gradient in b is its negation.
void imq_grad_first(std::span<const double> a, std::span<const double> b, double lengthscale, std::span<double> out);

}  // namespace bnn
