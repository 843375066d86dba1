#include "bnn/samplers/hmc.hpp"

#include <cmath>
#include <string>

#include "bnn/errors.hpp"

namespace bnn {

SampleMatrix stack_rows(const std::vector<ParamVector>& rows) {
  if (rows.empty()) return {};
  SampleMatrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw DimensionError("stack_rows: rows of different length");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

SampleMatrix gather_rows(const SampleMatrix& m, const std::vector<std::size_t>& indices) {
  SampleMatrix out(static_cast<Eigen::Index>(indices.size()), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(indices[i]));
  }
  return out;
}

bool leapfrog(const Potential& potential, ParamVector& w, ParamVector& v, ParamVector& grad, double step,
              std::size_t steps) {
  if (steps == 0) return true;
  v -= 0.5 * step * grad;
  for (std::size_t s = 0; s < steps; ++s) {
    w += step * v;
    grad = potential.grad(w);
    if (!grad.allFinite()) return false;
    v -= (s + 1 == steps ? 0.5 : 1.0) * step * grad;
  }
  return true;
}

HmcTransition hmc_transition(const Potential& potential, ParamVector& w, double& u, ParamVector& grad, double step,
                             std::size_t leapfrog_steps, Rng& rng) {
  HmcTransition t;
  ParamVector v = standard_normal(w.size(), rng);
  const double h0 = u + 0.5 * v.squaredNorm();

  ParamVector w_new = w;
  ParamVector g_new = grad;
  const bool ok = leapfrog(potential, w_new, v, g_new, step, leapfrog_steps);
  const double u_new = ok ? potential.value(w_new) : std::numeric_limits<double>::infinity();
  const double h1 = u_new + 0.5 * v.squaredNorm();
  // The uniform is drawn unconditionally so RNG consumption does not depend on the outcome.
  const double log_u = std::log(std::uniform_real_distribution<double>(0.0, 1.0)(rng));

  t.delta_h = h1 - h0;
  t.finite = ok && std::isfinite(h1);
  if (t.finite && log_u < -t.delta_h) {
    t.accepted = true;
    w = std::move(w_new);
    grad = std::move(g_new);
    u = u_new;
  }
  return t;
}

HmcResult hmc_run(const Potential& potential, const HmcConfig& config, const ParamVector& init) {
  if (config.burn_in >= config.iterations) throw ContractError("hmc_run: burn_in must be smaller than iterations");
  if (config.chains == 0 || config.leapfrog_steps == 0) throw ContractError("hmc_run: need >= 1 chain and leapfrog step");
  if (static_cast<std::size_t>(init.size()) != potential.dim()) throw DimensionError("hmc_run: init length");

  HmcResult result;
  const std::size_t kept = config.iterations - config.burn_in;
  result.samples.samples.resize(static_cast<Eigen::Index>(kept * config.chains), init.size());
  result.samples.algorithm = "hmc";
  result.samples.hyperparameters = {{"step_size", config.step_size},
                                    {"leapfrog_steps", static_cast<double>(config.leapfrog_steps)}};
  result.samples.seed = config.seed;

  std::size_t accepted = 0;
  for (std::size_t c = 0; c < config.chains; ++c) {
    Rng rng(split_seed(config.seed, {c}));
    ParamVector w = init;
    ParamVector grad;
    double u = potential.value_and_grad(w, grad);
    if (!std::isfinite(u)) throw DivergenceError("hmc_run: non-finite potential at the initial point", 0);
    for (std::size_t k = 0; k < config.iterations; ++k) {
      const HmcTransition t = hmc_transition(potential, w, u, grad, config.step_size, config.leapfrog_steps, rng);
      if (!t.finite) ++result.nonfinite_rejections;
      if (t.accepted) ++accepted;
      if (k >= config.burn_in) {
        result.samples.samples.row(static_cast<Eigen::Index>(c * kept + (k - config.burn_in))) = w.transpose();
      }
    }
  }
  result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(config.iterations * config.chains);
  if (result.nonfinite_rejections > 0) {
    result.samples.notes.push_back(std::to_string(result.nonfinite_rejections) +
                                   " proposals rejected for a non-finite Hamiltonian");
  }
  if (result.acceptance_rate < config.acceptance_floor) {
    result.samples.notes.push_back("acceptance rate " + std::to_string(result.acceptance_rate) + " below floor " +
                                   std::to_string(config.acceptance_floor));
  }
  return result;
}

double tune_hmc_step_size(const Potential& potential, const HmcConfig& config, const ParamVector& init,
                          const HmcTuning& tuning) {
  double step = config.step_size;
  double too_small = 0.0;  // largest step known to accept too often
  double too_large = 0.0;  // smallest step known to accept too rarely
  for (std::size_t round = 0; round < tuning.max_rounds; ++round) {
    Rng rng(split_seed(config.seed, {0x7475'6e65ULL, round}));
    ParamVector w = init;
    ParamVector grad;
    double u = potential.value_and_grad(w, grad);
    std::size_t accepted = 0;
    for (std::size_t k = 0; k < tuning.pilot_iterations; ++k) {
      if (hmc_transition(potential, w, u, grad, step, config.leapfrog_steps, rng).accepted) ++accepted;
    }
    const double rate = static_cast<double>(accepted) / static_cast<double>(tuning.pilot_iterations);
    if (rate >= tuning.low && rate <= tuning.high) return step;
    if (rate > tuning.high) {
      too_small = step;
      step = too_large > 0.0 ? std::sqrt(step * too_large) : 2.0 * step;
    } else {
      too_large = step;
      step = too_small > 0.0 ? std::sqrt(step * too_small) : 0.5 * step;
    }
  }
  // Out of rounds: prefer the safe side of the bracket.
  return too_small > 0.0 ? too_small : step;
}

}  // namespace bnn
