#pragma once

#include <cstddef>
#include <cstdint>

#include "bnn/core/potential.hpp"
#include "bnn/rng.hpp"
#include "bnn/samplers/sample_set.hpp"

namespace bnn {

struct HmcConfig {
  double step_size = 1e-3;
  std::size_t leapfrog_steps = 10000;
  std::size_t iterations = 200;
  std::size_t burn_in = 100;
  std::size_t chains = 3;
  std::uint64_t seed = 0;
  double acceptance_floor = 0.8;  // below this the run carries a warning note
};

struct HmcResult {
  SampleSet samples;  // post-burn-in positions of all chains, chain-major
  double acceptance_rate = 0.0;
  std::size_t nonfinite_rejections = 0;
};

/// Runs `steps` leapfrog steps of H(w, v) = U(w) + |v|^2 / 2 in place.
/// `grad` holds grad U(w) on entry and is updated to the end point.
/// Returns false as soon as a non-finite gradient appears.
bool leapfrog(const Potential& potential, ParamVector& w, ParamVector& v, ParamVector& grad, double step,
              std::size_t steps);

/// One Metropolis-adjusted HMC transition with a fresh N(0, I) momentum.
struct HmcTransition {
  bool accepted = false;
  bool finite = true;
  double delta_h = 0.0;  // H(proposal) - H(current)
};
HmcTransition hmc_transition(const Potential& potential, ParamVector& w, double& u, ParamVector& grad, double step,
                             std::size_t leapfrog_steps, Rng& rng);

/// `chains` independent chains from `init`, each seeded by split_seed(config.seed, {chain}).
HmcResult hmc_run(const Potential& potential, const HmcConfig& config, const ParamVector& init);

struct HmcTuning {
  double low = 0.8;
  double high = 0.95;
  std::size_t pilot_iterations = 40;
  std::size_t max_rounds = 30;
};

/// Geometric bisection on the step size until a pilot chain from `init` has an
/// acceptance rate in [low, high]. Starts from config.step_size.
double tune_hmc_step_size(const Potential& potential, const HmcConfig& config, const ParamVector& init,
                          const HmcTuning& tuning = {});

}  // namespace bnn
