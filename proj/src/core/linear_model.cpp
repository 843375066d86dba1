#include "bnn/core/linear_model.hpp"

#include <cmath>
#include <numbers>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {

LinearRegressionPosterior::LinearRegressionPosterior(RegressionDataset data, double noise_sigma)
    : data_(std::move(data)), sigma_(noise_sigma) {
  if (!(noise_sigma > 0.0)) throw std::invalid_argument("LinearRegressionPosterior: noise_sigma must be > 0");
  if (data_.targets.cols() != 1) throw DimensionError("LinearRegressionPosterior: scalar targets only");
  fingerprint_ = mix64(dataset_fingerprint(data_, sigma_) ^ 0x4c494e4541520000ULL);
}

double LinearRegressionPosterior::value(const ParamVector& w) const {
  if (static_cast<std::size_t>(w.size()) != dim()) throw DimensionError("LinearRegressionPosterior: parameter length");
  const double sse = (data_.inputs * w - data_.targets.col(0)).squaredNorm();
  const double n = static_cast<double>(data_.size());
  const double d = static_cast<double>(dim());
  return sse / (2.0 * sigma_ * sigma_) + 0.5 * n * std::log(2.0 * std::numbers::pi * sigma_ * sigma_) +
         0.5 * w.squaredNorm() + 0.5 * d * std::log(2.0 * std::numbers::pi);
}

ParamVector LinearRegressionPosterior::data_grad(const ParamVector& w, std::span<const std::size_t> batch) const {
  if (static_cast<std::size_t>(w.size()) != dim()) throw DimensionError("LinearRegressionPosterior: parameter length");
  ParamVector g = ParamVector::Zero(w.size());
  const double inv_var = 1.0 / (sigma_ * sigma_);
  for (std::size_t i : batch) {
    const auto row = data_.inputs.row(static_cast<Eigen::Index>(i));
    const double r = row.dot(w) - data_.targets(static_cast<Eigen::Index>(i), 0);
    g += (inv_var * r) * row.transpose();
  }
  return g;
}

ParamVector LinearRegressionPosterior::prior_grad(const ParamVector& w) const { return w; }

Eigen::MatrixXd LinearRegressionPosterior::predict(const ParamVector& w, const Eigen::MatrixXd& inputs) const {
  return inputs * w;
}

Eigen::MatrixXd LinearRegressionPosterior::posterior_precision() const {
  const auto d = static_cast<Eigen::Index>(dim());
  return Eigen::MatrixXd::Identity(d, d) + data_.inputs.transpose() * data_.inputs / (sigma_ * sigma_);
}

Eigen::MatrixXd LinearRegressionPosterior::posterior_covariance() const {
  const auto d = static_cast<Eigen::Index>(dim());
  return posterior_precision().llt().solve(Eigen::MatrixXd::Identity(d, d));
}

Eigen::VectorXd LinearRegressionPosterior::posterior_mean() const {
  return posterior_precision().llt().solve(data_.inputs.transpose() * data_.targets.col(0) / (sigma_ * sigma_));
}

}  // namespace bnn
