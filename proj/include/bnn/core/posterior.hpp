#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "bnn/core/mlp.hpp"
#include "bnn/core/potential.hpp"

namespace bnn {

/// N observations: `inputs` is N x D, `targets` is N x M.
struct RegressionDataset {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  RegressionDataset() = default;
  RegressionDataset(Eigen::MatrixXd x, Eigen::MatrixXd y);

  std::size_t size() const noexcept { return static_cast<std::size_t>(inputs.rows()); }
  RegressionDataset subset(std::span<const std::size_t> rows) const;
};

/// Hash of the raw bytes of a dataset and a noise level.
std::uint64_t dataset_fingerprint(const RegressionDataset& data, double noise_sigma);

/// Bayesian MLP regression posterior: Gaussian likelihood N(y; f(x; w), sigma^2 I)
/// and standard normal prior N(0, I) on every parameter.
///
/// U(w) = sum_i [ ||y_i - f(x_i; w)||^2 / (2 sigma^2) + (M/2) log(2 pi sigma^2) ]
///        + ||w||^2 / 2 + (d/2) log(2 pi)
class PosteriorSpec final : public Potential {
 public:
  PosteriorSpec(MlpArchitecture arch, RegressionDataset data, double noise_sigma);

  const MlpArchitecture& arch() const noexcept { return arch_; }
  const RegressionDataset& dataset() const noexcept { return data_; }
  double noise_sigma() const noexcept { return sigma_; }

  std::size_t dim() const override { return arch_.parameter_count(); }
  std::size_t num_data() const override { return data_.size(); }
  double value(const ParamVector& w) const override;
  ParamVector data_grad(const ParamVector& w, std::span<const std::size_t> batch) const override;
  ParamVector prior_grad(const ParamVector& w) const override;
  ParamVector grad(const ParamVector& w) const override;
  double value_and_grad(const ParamVector& w, ParamVector& grad_out) const override;
  Eigen::MatrixXd predict(const ParamVector& w, const Eigen::MatrixXd& inputs) const override;
  std::uint64_t fingerprint() const override { return fingerprint_; }

  /// Negative log-likelihood part of U for the full dataset.
  double negative_log_likelihood(const ParamVector& w) const;
  /// Negative log prior, ||w||^2 / 2 + (d/2) log(2 pi).
  double negative_log_prior(const ParamVector& w) const;

 private:
  MlpArchitecture arch_;
  RegressionDataset data_;
  double sigma_;
  std::uint64_t fingerprint_;
};

}  // namespace bnn
