#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "bnn/core/mlp.hpp"

namespace bnn {

/// Negative log of an unnormalized posterior, U(w) = -log p(Y | X, w) - log p(w),
/// split into a sum over data points plus a prior term so that mini-batch
/// estimators can be formed from it.
class Potential {
 public:
  virtual ~Potential() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_data() const = 0;

  /// U(w), normalizing constants included.
  virtual double value(const ParamVector& w) const = 0;

  /// Sum over `batch` of the gradients of the per-point negative log-likelihoods.
  virtual ParamVector data_grad(const ParamVector& w, std::span<const std::size_t> batch) const = 0;

  /// Gradient of -log p(w).
  virtual ParamVector prior_grad(const ParamVector& w) const = 0;

  /// Full-batch gradient of U.
  virtual ParamVector grad(const ParamVector& w) const;

  /// U(w) and its gradient in one pass; the default calls value() and grad().
  virtual double value_and_grad(const ParamVector& w, ParamVector& grad_out) const;

  /// Model predictions f(x; w) for each row of `inputs` (N x D), returned as N x M.
  virtual Eigen::MatrixXd predict(const ParamVector& w, const Eigen::MatrixXd& inputs) const = 0;

  /// Identifies the (model, data, noise) triple; variance-reduction anchors record it.
  virtual std::uint64_t fingerprint() const = 0;
};

/// Score of the posterior, s_p(w) = grad log p(Y|X,w) p(w) = -grad U(w).
inline ParamVector score(const Potential& potential, const ParamVector& w) { return -potential.grad(w); }

}  // namespace bnn
