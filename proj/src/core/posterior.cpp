#include "bnn/core/posterior.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {

ParamVector Potential::grad(const ParamVector& w) const {
  std::vector<std::size_t> all(num_data());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return data_grad(w, all) + prior_grad(w);
}

double Potential::value_and_grad(const ParamVector& w, ParamVector& grad_out) const {
  grad_out = grad(w);
  return value(w);
}

RegressionDataset::RegressionDataset(Eigen::MatrixXd x, Eigen::MatrixXd y) : inputs(std::move(x)), targets(std::move(y)) {
  if (inputs.rows() != targets.rows()) {
    throw DimensionError("RegressionDataset: " + std::to_string(inputs.rows()) + " inputs vs " +
                         std::to_string(targets.rows()) + " targets");
  }
  if (inputs.rows() < 1) throw DimensionError("RegressionDataset: need at least one observation");
}

RegressionDataset RegressionDataset::subset(std::span<const std::size_t> rows) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= size()) throw DimensionError("RegressionDataset::subset: row index out of range");
    x.row(static_cast<Eigen::Index>(r)) = inputs.row(static_cast<Eigen::Index>(rows[r]));
    y.row(static_cast<Eigen::Index>(r)) = targets.row(static_cast<Eigen::Index>(rows[r]));
  }
  RegressionDataset out;
  out.inputs = std::move(x);
  out.targets = std::move(y);
  return out;
}

std::uint64_t dataset_fingerprint(const RegressionDataset& data, double noise_sigma) {
  auto fold = [](std::uint64_t h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return mix64(h ^ bits);
  };
  std::uint64_t h = mix64(static_cast<std::uint64_t>(data.inputs.rows()) * 31 + data.inputs.cols());
  for (Eigen::Index i = 0; i < data.inputs.size(); ++i) h = fold(h, data.inputs.data()[i]);
  for (Eigen::Index i = 0; i < data.targets.size(); ++i) h = fold(h, data.targets.data()[i]);
  return fold(h, noise_sigma);
}

PosteriorSpec::PosteriorSpec(MlpArchitecture arch, RegressionDataset data, double noise_sigma)
    : arch_(std::move(arch)), data_(std::move(data)), sigma_(noise_sigma) {
  if (!(noise_sigma > 0.0)) throw std::invalid_argument("PosteriorSpec: noise_sigma must be > 0");
  if (static_cast<std::size_t>(data_.inputs.cols()) != arch_.input_dim() ||
      static_cast<std::size_t>(data_.targets.cols()) != arch_.output_dim()) {
    throw DimensionError("PosteriorSpec: dataset dimensions do not match the architecture");
  }
  std::uint64_t h = dataset_fingerprint(data_, sigma_);
  for (std::size_t s : arch_.layer_sizes()) h = mix64(h ^ s);
  fingerprint_ = h;
}

double PosteriorSpec::negative_log_prior(const ParamVector& w) const {
  check_params(arch_, w);
  return 0.5 * w.squaredNorm() + 0.5 * static_cast<double>(w.size()) * std::log(2.0 * std::numbers::pi);
}

double PosteriorSpec::negative_log_likelihood(const ParamVector& w) const {
  const Eigen::MatrixXd f = forward_batch(arch_, w, data_.inputs);
  const double sse = (f - data_.targets).squaredNorm();
  const double n_out = static_cast<double>(data_.targets.size());
  return sse / (2.0 * sigma_ * sigma_) + 0.5 * n_out * std::log(2.0 * std::numbers::pi * sigma_ * sigma_);
}

double PosteriorSpec::value(const ParamVector& w) const { return negative_log_likelihood(w) + negative_log_prior(w); }

ParamVector PosteriorSpec::data_grad(const ParamVector& w, std::span<const std::size_t> batch) const {
  ParamVector g = ParamVector::Zero(w.size());
  if (batch.size() == data_.size()) {
    bool identity = true;
    for (std::size_t i = 0; i < batch.size() && identity; ++i) identity = batch[i] == i;
    if (identity) {
      accumulate_squared_error_grad(arch_, w, data_.inputs, data_.targets, 1.0 / (sigma_ * sigma_), g);
      return g;
    }
  }
  const RegressionDataset sub = data_.subset(batch);
  accumulate_squared_error_grad(arch_, w, sub.inputs, sub.targets, 1.0 / (sigma_ * sigma_), g);
  return g;
}

ParamVector PosteriorSpec::prior_grad(const ParamVector& w) const {
  check_params(arch_, w);
  return w;
}

ParamVector PosteriorSpec::grad(const ParamVector& w) const {
  ParamVector g = w;
  accumulate_squared_error_grad(arch_, w, data_.inputs, data_.targets, 1.0 / (sigma_ * sigma_), g);
  return g;
}

double PosteriorSpec::value_and_grad(const ParamVector& w, ParamVector& grad_out) const {
  grad_out = w;
  const double sse =
      accumulate_squared_error_grad(arch_, w, data_.inputs, data_.targets, 1.0 / (sigma_ * sigma_), grad_out);
  const double n_out = static_cast<double>(data_.targets.size());
  return sse / (2.0 * sigma_ * sigma_) + 0.5 * n_out * std::log(2.0 * std::numbers::pi * sigma_ * sigma_) +
         negative_log_prior(w);
}

Eigen::MatrixXd PosteriorSpec::predict(const ParamVector& w, const Eigen::MatrixXd& inputs) const {
  return forward_batch(arch_, w, inputs);
}

}  // namespace bnn
