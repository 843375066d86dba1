#include "bnn/core/map.hpp"

#include <cmath>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {

double OptimizerConfig::step_at(std::size_t k) const {
  if (iterations <= 1) return initial_step;
  const double frac = static_cast<double>(k) / static_cast<double>(iterations - 1);
  return initial_step * std::pow(final_step / initial_step, frac);
}

Adam::Adam(std::size_t dim, const OptimizerConfig& config)
    : config_(config),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}

void Adam::step(ParamVector& w, const ParamVector& grad, double lr) {
  ++t_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  w.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.epsilon);
}

ParamVector prior_draw(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  return standard_normal(static_cast<Eigen::Index>(dim), rng);
}

MapResult train_map(const Potential& potential, const OptimizerConfig& config, const std::optional<ParamVector>& init) {
  ParamVector w = init ? *init : prior_draw(potential.dim(), config.init_seed);
  MapResult result;
  ParamVector g;
  double u = potential.value_and_grad(w, g);
  if (!std::isfinite(u)) throw DivergenceError("train_map: non-finite potential", 0);
  result.initial_potential = u;
  result.final_potential = u;
  result.params = w;

  Adam adam(potential.dim(), config);
  for (std::size_t k = 0; k < config.iterations; ++k) {
    adam.step(w, g, config.step_at(k));
    u = potential.value_and_grad(w, g);
    if (!std::isfinite(u)) throw DivergenceError("train_map: non-finite potential", k + 1);
    if (u < result.final_potential) {
      result.final_potential = u;
      result.params = w;
    }
  }
  return result;
}

}  // namespace bnn
