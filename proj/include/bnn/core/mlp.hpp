#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace bnn {

/// Flat vector of every weight and bias of a network.
using ParamVector = Eigen::VectorXd;

/// Row-major dense matrix; rows are samples (parameter vectors or prediction vectors).
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Position of one dense layer inside a ParamVector.
struct LayerSlice {
  std::size_t fan_in;
  std::size_t fan_out;
  std::size_t weight_offset;  // fan_in x fan_out block, row-major: W[i, j] at weight_offset + i * fan_out + j
  std::size_t bias_offset;    // fan_out entries, right after the weights
};

/// Dense feed-forward network: ReLU on hidden layers, identity output.
///
/// Parameter layout: for each layer in forward order, the weight matrix
/// (fan_in x fan_out, row-major) followed by the bias vector.
class MlpArchitecture {
 public:
  /// `layer_sizes` = {input, hidden..., output}; needs at least one hidden layer.
  explicit MlpArchitecture(std::vector<std::size_t> layer_sizes);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  std::size_t num_layers() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept { return count_; }
  const LayerSlice& layer(std::size_t l) const { return layers_.at(l); }

  bool operator==(const MlpArchitecture& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<LayerSlice> layers_;
  std::size_t count_ = 0;
};

/// Per-layer views of a parameter vector.
struct LayerView {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weights;
  Eigen::Map<const Eigen::RowVectorXd> bias;
};

/// Dropout masks for the hidden layers: one (rows x width) matrix of 0/1 per hidden layer.
using HiddenMasks = std::vector<Eigen::MatrixXd>;

/// Splits a flat vector into per-layer weight matrices and bias vectors.
std::vector<LayerView> unflatten(const MlpArchitecture& arch, const ParamVector& params);

/// Inverse of unflatten. `weights[l]` is fan_in x fan_out, `biases[l]` has fan_out entries.
ParamVector flatten(const MlpArchitecture& arch, const std::vector<Eigen::MatrixXd>& weights,
                    const std::vector<Eigen::VectorXd>& biases);

/// Network output for a single input.
Eigen::VectorXd forward(const MlpArchitecture& arch, const ParamVector& params, const Eigen::VectorXd& x);

/// Network outputs for a batch: `inputs` is N x D, result is N x M.
Eigen::MatrixXd forward_batch(const MlpArchitecture& arch, const ParamVector& params,
                              const Eigen::MatrixXd& inputs);

/// Gradient of 0.5 * scale * sum_i ||y_i - f(x_i)||^2 with respect to the parameters,
/// accumulated into `grad`. Returns the sum of squared residuals.
///
/// When `masks` is given, hidden activations are multiplied by mask / keep_prob
/// (inverted dropout) in both passes.
double accumulate_squared_error_grad(const MlpArchitecture& arch, const ParamVector& params,
                                     const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                     double scale, Eigen::Ref<Eigen::VectorXd> grad,
                                     const HiddenMasks* masks = nullptr, double keep_prob = 1.0);

void check_params(const MlpArchitecture& arch, const ParamVector& params);

}  // namespace bnn
