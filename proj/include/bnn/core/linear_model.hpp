#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "bnn/core/posterior.hpp"

namespace bnn {

/// Conjugate Bayesian linear regression, f(x; w) = x^T w with a scalar output,
/// prior N(0, I) and noise N(0, sigma^2). The posterior is Gaussian and known
/// in closed form, which makes it the reference target for sampler checks.
class LinearRegressionPosterior final : public Potential {
 public:
  LinearRegressionPosterior(RegressionDataset data, double noise_sigma);

  const RegressionDataset& dataset() const noexcept { return data_; }
  double noise_sigma() const noexcept { return sigma_; }

  std::size_t dim() const override { return static_cast<std::size_t>(data_.inputs.cols()); }
  std::size_t num_data() const override { return data_.size(); }
  double value(const ParamVector& w) const override;
  ParamVector data_grad(const ParamVector& w, std::span<const std::size_t> batch) const override;
  ParamVector prior_grad(const ParamVector& w) const override;
  Eigen::MatrixXd predict(const ParamVector& w, const Eigen::MatrixXd& inputs) const override;
  std::uint64_t fingerprint() const override { return fingerprint_; }

  /// Posterior precision I + X^T X / sigma^2.
  Eigen::MatrixXd posterior_precision() const;
  Eigen::MatrixXd posterior_covariance() const;
  Eigen::VectorXd posterior_mean() const;

 private:
  RegressionDataset data_;
  double sigma_;
  std::uint64_t fingerprint_;
};

}  // namespace bnn
