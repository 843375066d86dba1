#include "bnn/samplers/dropout.hpp"

#include <cmath>
#include <string>

#include "bnn/errors.hpp"

namespace bnn {

namespace {

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

}  // namespace

HiddenMasks sample_hidden_masks(const MlpArchitecture& arch, std::size_t rows, double rate, Rng& rng) {
  check_rate(rate);
  std::bernoulli_distribution keep(1.0 - rate);
  HiddenMasks masks;
  for (std::size_t l = 0; l + 1 < arch.num_layers(); ++l) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(arch.layer(l).fan_out));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = keep(rng) ? 1.0 : 0.0;
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

ParamVector apply_unit_masks(const MlpArchitecture& arch, const ParamVector& params,
                             const std::vector<Eigen::VectorXd>& unit_masks, double rate) {
  check_rate(rate);
  check_params(arch, params);
  if (unit_masks.size() + 1 != arch.num_layers()) throw DimensionError("apply_unit_masks: one mask per hidden layer");
  ParamVector out = params;
  const double inv_keep = 1.0 / (1.0 - rate);
  for (std::size_t l = 0; l + 1 < arch.num_layers(); ++l) {
    // Hidden layer l feeds layer l + 1; row j of that weight block belongs to unit j.
    const LayerSlice& next = arch.layer(l + 1);
    if (static_cast<std::size_t>(unit_masks[l].size()) != next.fan_in) {
      throw DimensionError("apply_unit_masks: mask width does not match layer " + std::to_string(l));
    }
    for (std::size_t j = 0; j < next.fan_in; ++j) {
      const double factor = unit_masks[l][static_cast<Eigen::Index>(j)] * inv_keep;
      out.segment(static_cast<Eigen::Index>(next.weight_offset + j * next.fan_out),
                  static_cast<Eigen::Index>(next.fan_out)) *= factor;
    }
  }
  return out;
}

ParamVector train_with_dropout(const PosteriorSpec& posterior, double rate, const OptimizerConfig& opt,
                               std::uint64_t seed) {
  check_rate(rate);
  const MlpArchitecture& arch = posterior.arch();
  const RegressionDataset& data = posterior.dataset();
  const double inv_var = 1.0 / (posterior.noise_sigma() * posterior.noise_sigma());
  Rng rng(seed);
  ParamVector w = prior_draw(posterior.dim(), split_seed(seed, {hash_string("init")}));
  Adam adam(posterior.dim(), opt);
  for (std::size_t k = 0; k < opt.iterations; ++k) {
    const HiddenMasks masks = sample_hidden_masks(arch, data.size(), rate, rng);
    ParamVector g = w;  // prior gradient
    const double sse =
        accumulate_squared_error_grad(arch, w, data.inputs, data.targets, inv_var, g, &masks, 1.0 - rate);
    if (!std::isfinite(sse) || !g.allFinite()) throw DivergenceError("train_with_dropout: non-finite loss", k);
    adam.step(w, g, opt.step_at(k));
  }
  if (!w.allFinite()) throw DivergenceError("train_with_dropout: non-finite parameters", opt.iterations);
  return w;
}

SampleSet mc_dropout_sample(const PosteriorSpec& posterior, double rate, std::size_t n, const OptimizerConfig& opt,
                            std::uint64_t seed) {
  check_rate(rate);
  const ParamVector trained = train_with_dropout(posterior, rate, opt, split_seed(seed, {hash_string("train")}));
  const MlpArchitecture& arch = posterior.arch();
  Rng rng(split_seed(seed, {hash_string("inference")}));
  SampleSet out;
  out.algorithm = "mc_dropout";
  out.seed = seed;
  out.hyperparameters = {{"dropout_rate", rate}, {"step_size", opt.initial_step}};
  out.samples.resize(static_cast<Eigen::Index>(n), trained.size());
  for (std::size_t i = 0; i < n; ++i) {
    const HiddenMasks masks = sample_hidden_masks(arch, 1, rate, rng);
    std::vector<Eigen::VectorXd> units;
    for (const auto& m : masks) units.emplace_back(m.row(0).transpose());
    out.samples.row(static_cast<Eigen::Index>(i)) = apply_unit_masks(arch, trained, units, rate).transpose();
  }
  return out;
}

}  // namespace bnn
