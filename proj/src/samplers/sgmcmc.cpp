#include "bnn/samplers/sgmcmc.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "bnn/errors.hpp"
#include "bnn/metrics/thinning.hpp"

namespace bnn {

void SamplerConfig::validate() const {
  if (!(step_size >= 0.0)) throw ContractError("SamplerConfig: step size must be >= 0");
  if (iterations == 0) throw ContractError("SamplerConfig: need at least one iteration");
  if (burn_in >= iterations) throw ContractError("SamplerConfig: burn-in leaves an empty chain, thin target unreachable");
  if (chain_stride == 0) throw ContractError("SamplerConfig: chain_stride must be >= 1");
  if (thin_target == 0) throw ContractError("SamplerConfig: thin_target must be >= 1");
  if (retained_count() < thin_target) {
    throw ContractError("SamplerConfig: " + std::to_string(retained_count()) +
                        " retained iterates cannot be thinned to " + std::to_string(thin_target));
  }
  if (variant == SgmcmcVariant::preconditioned && family != SgmcmcFamily::sgld) {
    throw ContractError("SamplerConfig: preconditioning is defined for SGLD only");
  }
  if (variant == SgmcmcVariant::svrg && svrg_period == 0) throw ContractError("SamplerConfig: svrg period must be >= 1");
  if (variant == SgmcmcVariant::cyclical && (cycles == 0 || cycles > iterations)) {
    throw ContractError("SamplerConfig: cycle count must lie in [1, iterations]");
  }
  if (family == SgmcmcFamily::sghmc && (friction < 0.0 || friction > 1.0 || momentum_resample_period == 0)) {
    throw ContractError("SamplerConfig: SGHMC needs friction in [0, 1] and a positive resample period");
  }
}

std::size_t SamplerConfig::retained_count() const {
  if (burn_in >= iterations || chain_stride == 0) return 0;
  return (iterations - burn_in + chain_stride - 1) / chain_stride;
}

double SamplerConfig::step_at(std::size_t k) const {
  if (variant == SgmcmcVariant::cyclical) return cyclical_step_size(k, step_size, iterations, cycles);
  return step_size;
}

std::string SamplerConfig::algorithm_name() const {
  const std::string base = family == SgmcmcFamily::sgld ? "sgld" : "sghmc";
  switch (variant) {
    case SgmcmcVariant::plain: return base;
    case SgmcmcVariant::cv: return base + "_cv";
    case SgmcmcVariant::svrg: return base + "_svrg";
    case SgmcmcVariant::cyclical: return "c" + base;
    case SgmcmcVariant::preconditioned: return "p" + base;
  }
  return base;
}

ChainState init_chain_state(const SamplerConfig& config, const ParamVector& init) {
  ChainState s;
  s.position = init;
  if (config.family == SgmcmcFamily::sghmc) s.momentum = ParamVector::Zero(init.size());
  if (config.variant == SgmcmcVariant::preconditioned) s.accumulator = ParamVector::Zero(init.size());
  return s;
}

void sgld_update(ChainState& state, const ParamVector& grad, double step, const Eigen::VectorXd& noise) {
  state.position += -step * grad + std::sqrt(2.0 * step) * noise;
  ++state.iteration;
}

void sghmc_update(ChainState& state, const ParamVector& grad, double step, double friction,
                  const Eigen::VectorXd& noise) {
  if (!state.momentum) throw ContractError("sghmc_update: chain state has no momentum");
  ParamVector& v = *state.momentum;
  state.position += v;
  v = (1.0 - friction) * v - step * grad + std::sqrt(2.0 * friction * step) * noise;
  ++state.iteration;
}

void psgld_update(ChainState& state, const ParamVector& grad, double step, double lambda, double decay,
                  const Eigen::VectorXd& noise) {
  if (!state.accumulator) throw ContractError("psgld_update: chain state has no accumulator");
  ParamVector& acc = *state.accumulator;
  acc = decay * acc + (1.0 - decay) * grad.cwiseAbs2();
  const Eigen::ArrayXd precond = 1.0 / (lambda + acc.array().sqrt());
  state.position.array() += -step * precond * grad.array() + (2.0 * step * precond).sqrt() * noise.array();
  ++state.iteration;
}

double cyclical_step_size(std::size_t k, double eps0, std::size_t total_iterations, std::size_t cycles) {
  if (k < 1 || k > total_iterations) throw std::out_of_range("cyclical_step_size: k must lie in [1, K]");
  if (cycles == 0) throw std::invalid_argument("cyclical_step_size: cycle count must be >= 1");
  const std::size_t period = (total_iterations + cycles - 1) / cycles;
  const double phase = static_cast<double>((k - 1) % period) / static_cast<double>(period);
  return 0.5 * eps0 * (std::cos(std::numbers::pi * phase) + 1.0);
}

GradientEstimator::GradientEstimator(const Potential& potential, const SamplerConfig& config,
                                     const ParamVector* anchor)
    : potential_(potential),
      sampler_(potential.num_data(),
               MinibatchSchedule{std::min(config.batch_size, potential.num_data()),
                                 split_seed(config.rng_seed, {hash_string("minibatch")})}) {
  if (config.variant == SgmcmcVariant::cv || config.variant == SgmcmcVariant::svrg) {
    if (anchor == nullptr) throw ContractError("GradientEstimator: cv/svrg variants need a MAP anchor");
    vr_ = VarianceReductionState::anchor_at(potential, *anchor,
                                            config.variant == SgmcmcVariant::svrg ? config.svrg_period : 0);
  }
}

ParamVector GradientEstimator::operator()(const ParamVector& w, std::size_t iteration) {
  if (vr_ && vr_->update_period() > 0 && iteration > 0 && iteration % vr_->update_period() == 0) {
    vr_->reanchor(potential_, w);
  }
  return stochastic_grad(potential_, w, sampler_, vr_ ? &*vr_ : nullptr);
}

namespace {

void check_finite(const ChainState& state) {
  if (!state.position.allFinite()) throw DivergenceError("chain diverged: non-finite position", state.iteration);
}

}  // namespace

void sgld_step(ChainState& state, const SamplerConfig& config, GradientEstimator& grads, Rng& rng) {
  const ParamVector g = grads(state.position, state.iteration);
  const double step = config.step_at(state.iteration + 1);
  if (config.variant == SgmcmcVariant::preconditioned) {
    psgld_update(state, g, step, config.psgld_lambda, config.psgld_decay, standard_normal(g.size(), rng));
  } else {
    sgld_update(state, g, step, standard_normal(g.size(), rng));
  }
  check_finite(state);
}

void sghmc_step(ChainState& state, const SamplerConfig& config, GradientEstimator& grads, Rng& rng) {
  const double step = config.step_at(state.iteration + 1);
  if (state.iteration % config.momentum_resample_period == 0) {
    // v = eps M^{-1} r with r ~ N(0, I) and unit mass, so v ~ N(0, eps I).
    state.momentum = std::sqrt(step) * standard_normal(state.position.size(), rng);
  }
  const ParamVector g = grads(state.position, state.iteration);
  sghmc_update(state, g, step, config.friction, standard_normal(g.size(), rng));
  check_finite(state);
}

void psgld_step(ChainState& state, const SamplerConfig& config, GradientEstimator& grads, Rng& rng) {
  const ParamVector g = grads(state.position, state.iteration);
  psgld_update(state, g, config.step_at(state.iteration + 1), config.psgld_lambda, config.psgld_decay,
               standard_normal(g.size(), rng));
  check_finite(state);
}

SgmcmcResult run_sgmcmc(const Potential& potential, const SamplerConfig& config, const ParamVector& init,
                        const ParamVector* anchor) {
  config.validate();
  if (static_cast<std::size_t>(init.size()) != potential.dim()) throw DimensionError("run_sgmcmc: init length");

  GradientEstimator grads(potential, config, anchor);
  Rng rng(split_seed(config.rng_seed, {hash_string("dynamics")}));
  ChainState state = init_chain_state(config, init);

  SgmcmcResult result;
  result.chain.resize(static_cast<Eigen::Index>(config.retained_count()), init.size());
  Eigen::Index kept = 0;
  for (std::size_t k = 0; k < config.iterations; ++k) {
    if (config.family == SgmcmcFamily::sghmc) {
      sghmc_step(state, config, grads, rng);
    } else if (config.variant == SgmcmcVariant::preconditioned) {
      psgld_step(state, config, grads, rng);
    } else {
      sgld_step(state, config, grads, rng);
    }
    if (k >= config.burn_in && (k - config.burn_in) % config.chain_stride == 0) {
      result.chain.row(kept++) = state.position.transpose();
    }
  }

  SampleSet& out = result.samples;
  out.algorithm = config.algorithm_name();
  out.seed = config.rng_seed;
  out.hyperparameters = {{"step_size", config.step_size}, {"iterations", static_cast<double>(config.iterations)}};
  if (config.variant == SgmcmcVariant::cyclical) out.hyperparameters["cycles"] = static_cast<double>(config.cycles);
  if (config.variant == SgmcmcVariant::svrg) out.hyperparameters["svrg_period"] = static_cast<double>(config.svrg_period);

  if (config.thin_target == static_cast<std::size_t>(result.chain.rows())) {
    // The full empirical measure already has zero MMD to itself.
    out.samples = result.chain;
  } else {
    out.samples = gather_rows(result.chain, mmd_thin(result.chain, config.thin_target));
  }
  return result;
}

}  // namespace bnn
