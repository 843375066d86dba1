#include "bnn/core/mlp.hpp"

#include <string>

#include "bnn/errors.hpp"

namespace bnn {

namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

RowMajorMap weights_of(const LayerSlice& s, const double* base) {
  return RowMajorMap(base + s.weight_offset, static_cast<Eigen::Index>(s.fan_in),
                     static_cast<Eigen::Index>(s.fan_out));
}

Eigen::Map<const Eigen::RowVectorXd> bias_of(const LayerSlice& s, const double* base) {
  return Eigen::Map<const Eigen::RowVectorXd>(base + s.bias_offset, static_cast<Eigen::Index>(s.fan_out));
}

}  // namespace

MlpArchitecture::MlpArchitecture(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 3) throw std::invalid_argument("MlpArchitecture: need input, >= 1 hidden and output sizes");
  for (std::size_t s : sizes_) {
    if (s == 0) throw std::invalid_argument("MlpArchitecture: layer widths must be >= 1");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    LayerSlice s{sizes_[l], sizes_[l + 1], offset, offset + sizes_[l] * sizes_[l + 1]};
    offset = s.bias_offset + s.fan_out;
    layers_.push_back(s);
  }
  count_ = offset;
}

void check_params(const MlpArchitecture& arch, const ParamVector& params) {
  if (static_cast<std::size_t>(params.size()) != arch.parameter_count()) {
    throw DimensionError("parameter vector has length " + std::to_string(params.size()) + ", architecture needs " +
                         std::to_string(arch.parameter_count()));
  }
}

std::vector<LayerView> unflatten(const MlpArchitecture& arch, const ParamVector& params) {
  check_params(arch, params);
  std::vector<LayerView> views;
  views.reserve(arch.num_layers());
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const LayerSlice& s = arch.layer(l);
    views.push_back(LayerView{weights_of(s, params.data()), bias_of(s, params.data())});
  }
  return views;
}

ParamVector flatten(const MlpArchitecture& arch, const std::vector<Eigen::MatrixXd>& weights,
                    const std::vector<Eigen::VectorXd>& biases) {
  if (weights.size() != arch.num_layers() || biases.size() != arch.num_layers()) {
    throw DimensionError("flatten: layer count mismatch");
  }
  ParamVector out(static_cast<Eigen::Index>(arch.parameter_count()));
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const LayerSlice& s = arch.layer(l);
    const auto fi = static_cast<Eigen::Index>(s.fan_in);
    const auto fo = static_cast<Eigen::Index>(s.fan_out);
    if (weights[l].rows() != fi || weights[l].cols() != fo || biases[l].size() != fo) {
      throw DimensionError("flatten: layer " + std::to_string(l) + " has the wrong shape");
    }
    RowMajorMutMap(out.data() + s.weight_offset, fi, fo) = weights[l];
    out.segment(static_cast<Eigen::Index>(s.bias_offset), fo) = biases[l];
  }
  return out;
}

Eigen::MatrixXd forward_batch(const MlpArchitecture& arch, const ParamVector& params,
                              const Eigen::MatrixXd& inputs) {
  check_params(arch, params);
  if (static_cast<std::size_t>(inputs.cols()) != arch.input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(inputs.cols()) + " columns, expected " +
                         std::to_string(arch.input_dim()));
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const LayerSlice& s = arch.layer(l);
    Eigen::MatrixXd z = a * weights_of(s, params.data());
    z.rowwise() += bias_of(s, params.data());
    if (l + 1 < arch.num_layers()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd forward(const MlpArchitecture& arch, const ParamVector& params, const Eigen::VectorXd& x) {
  Eigen::MatrixXd row = x.transpose();
  return forward_batch(arch, params, row).row(0).transpose();
}

double accumulate_squared_error_grad(const MlpArchitecture& arch, const ParamVector& params,
                                     const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                     double scale, Eigen::Ref<Eigen::VectorXd> grad, const HiddenMasks* masks,
                                     double keep_prob) {
  check_params(arch, params);
  if (static_cast<std::size_t>(inputs.cols()) != arch.input_dim() ||
      static_cast<std::size_t>(targets.cols()) != arch.output_dim() || inputs.rows() != targets.rows()) {
    throw DimensionError("accumulate_squared_error_grad: data shape does not match architecture");
  }
  if (grad.size() != params.size()) throw DimensionError("accumulate_squared_error_grad: gradient length");
  const std::size_t n_layers = arch.num_layers();
  if (masks != nullptr && masks->size() != n_layers - 1) {
    throw DimensionError("accumulate_squared_error_grad: one mask per hidden layer expected");
  }
  const double inv_keep = 1.0 / keep_prob;

  // activations[l] is the input to layer l; preacts[l] its pre-activation.
  std::vector<Eigen::MatrixXd> activations(n_layers);
  std::vector<Eigen::MatrixXd> preacts(n_layers);
  activations[0] = inputs;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const LayerSlice& s = arch.layer(l);
    preacts[l] = activations[l] * weights_of(s, params.data());
    preacts[l].rowwise() += bias_of(s, params.data());
    if (l + 1 < n_layers) {
      Eigen::MatrixXd h = preacts[l].cwiseMax(0.0);
      if (masks != nullptr) h = h.cwiseProduct((*masks)[l]) * inv_keep;
      activations[l + 1] = std::move(h);
    }
  }

  Eigen::MatrixXd delta = preacts[n_layers - 1] - targets;
  const double sse = delta.squaredNorm();
  delta *= scale;
  for (std::size_t l = n_layers; l-- > 0;) {
    const LayerSlice& s = arch.layer(l);
    RowMajorMutMap(grad.data() + s.weight_offset, static_cast<Eigen::Index>(s.fan_in),
                   static_cast<Eigen::Index>(s.fan_out)) += activations[l].transpose() * delta;
    grad.segment(static_cast<Eigen::Index>(s.bias_offset), static_cast<Eigen::Index>(s.fan_out)) +=
        delta.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd back = delta * weights_of(s, params.data()).transpose();
    if (masks != nullptr) back = back.cwiseProduct((*masks)[l - 1]) * inv_keep;
    delta = back.cwiseProduct((preacts[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return sse;
}

}  // namespace bnn
