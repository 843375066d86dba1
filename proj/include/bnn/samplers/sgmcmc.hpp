#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "bnn/core/minibatch.hpp"
#include "bnn/core/potential.hpp"
#include "bnn/rng.hpp"
#include "bnn/samplers/sample_set.hpp"

namespace bnn {

enum class SgmcmcFamily { sgld, sghmc };

/// Exactly one modification of the base dynamics is active per run.
enum class SgmcmcVariant { plain, cv, svrg, cyclical, preconditioned };

struct SamplerConfig {
  SgmcmcFamily family = SgmcmcFamily::sgld;
  SgmcmcVariant variant = SgmcmcVariant::plain;
  double step_size = 1e-6;            // epsilon, or epsilon_0 for the cyclical schedule
  std::size_t iterations = 20000;     // K
  std::size_t burn_in = 10000;
  std::size_t batch_size = 32;
  std::size_t svrg_period = 100;      // m
  std::size_t cycles = 10;            // M
  double friction = 0.1;              // SGHMC alpha
  std::size_t momentum_resample_period = 10;
  double psgld_lambda = 1e-5;
  double psgld_decay = 0.99;
  std::size_t thin_target = 500;
  std::size_t chain_stride = 1;       // keep every stride-th post-burn-in iterate before thinning
  std::uint64_t rng_seed = 0;

  void validate() const;
  /// Number of post-burn-in iterates kept before thinning.
  std::size_t retained_count() const;
  /// Step size used at 1-based iteration k.
  double step_at(std::size_t k) const;
  std::string algorithm_name() const;
};

/// Sampler state. `momentum` is present for SGHMC, `accumulator` for pSGLD.
struct ChainState {
  ParamVector position;
  std::optional<ParamVector> momentum;
  std::optional<ParamVector> accumulator;
  std::size_t iteration = 0;
};

ChainState init_chain_state(const SamplerConfig& config, const ParamVector& init);

/// w <- w - eps * grad + sqrt(2 eps) * noise
void sgld_update(ChainState& state, const ParamVector& grad, double step, const Eigen::VectorXd& noise);

/// w <- w + v;  v <- (1 - alpha) v - eps * grad + sqrt(2 alpha eps) * noise, grad taken at the old w.
void sghmc_update(ChainState& state, const ParamVector& grad, double step, double friction,
                  const Eigen::VectorXd& noise);

/// L <- a L + (1 - a) grad o grad;  D = 1 / (lambda + sqrt(L));
/// w <- w - eps D o grad + sqrt(2 eps D) o noise. The correction term Gamma is dropped.
void psgld_update(ChainState& state, const ParamVector& grad, double step, double lambda, double decay,
                  const Eigen::VectorXd& noise);

/// eps_k = (eps0 / 2) (cos(pi mod(k - 1, ceil(K / M)) / ceil(K / M)) + 1), for 1 <= k <= K.
double cyclical_step_size(std::size_t k, double eps0, std::size_t total_iterations, std::size_t cycles);

/// Stochastic gradient source for one chain: mini-batches plus the CV/SVRG anchor.
class GradientEstimator {
 public:
  GradientEstimator(const Potential& potential, const SamplerConfig& config, const ParamVector* anchor);

  /// Gradient estimate at `w` before step `iteration` (0-based). Under SVRG the
  /// anchor moves to `w` whenever iteration is a positive multiple of m.
  ParamVector operator()(const ParamVector& w, std::size_t iteration);

  const VarianceReductionState* variance_reduction() const { return vr_ ? &*vr_ : nullptr; }

 private:
  const Potential& potential_;
  MinibatchSampler sampler_;
  std::optional<VarianceReductionState> vr_;
};

/// One step of each dynamics, drawing the gradient from `grads` and noise from `rng`.
/// Throw DivergenceError if the new position is not finite.
void sgld_step(ChainState& state, const SamplerConfig& config, GradientEstimator& grads, Rng& rng);
void sghmc_step(ChainState& state, const SamplerConfig& config, GradientEstimator& grads, Rng& rng);
void psgld_step(ChainState& state, const SamplerConfig& config, GradientEstimator& grads, Rng& rng);

struct SgmcmcResult {
  SampleSet samples;   // MMD-thinned to config.thin_target
  SampleMatrix chain;  // retained post-burn-in iterates before thinning
};

/// Runs K steps from `init`, discards burn-in, keeps every chain_stride-th iterate,
/// and thins the kept iterates to exactly thin_target with greedy MMD quantization.
/// `anchor` (a MAP estimate) is required for the cv and svrg variants.
SgmcmcResult run_sgmcmc(const Potential& potential, const SamplerConfig& config, const ParamVector& init,
                        const ParamVector* anchor = nullptr);

}  // namespace bnn
