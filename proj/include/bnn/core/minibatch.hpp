#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bnn/core/potential.hpp"
#include "bnn/rng.hpp"

namespace bnn {

struct MinibatchSchedule {
  std::size_t batch_size = 32;
  std::uint64_t rng_seed = 0;
};

/// Draws batches of `batch_size` distinct indices in [0, N), uniformly and
/// without replacement within a batch (partial Fisher-Yates on a persistent permutation).
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t num_data, MinibatchSchedule schedule);

  std::span<const std::size_t> next();
  std::size_t batch_size() const noexcept { return batch_size_; }
  std::size_t num_data() const noexcept { return perm_.size(); }

 private:
  std::vector<std::size_t> perm_;
  std::size_t batch_size_;
  Rng rng_;
};

/// Control-variate anchor eta and the full gradient at eta.
///
/// Only constructible through anchor_at()/reanchor(), so anchor_full_grad always
/// equals grad U(anchor) for the potential that produced it.
class VarianceReductionState {
 public:
  /// `update_period` = 0 means the anchor is never refreshed (CV); m > 0 refreshes every m steps (SVRG).
  static VarianceReductionState anchor_at(const Potential& potential, const ParamVector& anchor,
                                          std::size_t update_period);

  void reanchor(const Potential& potential, const ParamVector& anchor);

  const ParamVector& anchor() const noexcept { return anchor_; }
  const ParamVector& anchor_full_grad() const noexcept { return anchor_grad_; }
  std::size_t update_period() const noexcept { return period_; }
  std::uint64_t potential_fingerprint() const noexcept { return fingerprint_; }

 private:
  VarianceReductionState() = default;
  ParamVector anchor_;
  ParamVector anchor_grad_;
  std::size_t period_ = 0;
  std::uint64_t fingerprint_ = 0;
};

/// Plain estimator: (N/|B|) sum_{i in B} grad U_i(w) + grad(-log p(w)).
/// Variance-reduced: grad U(eta) + G_B(w) - G_B(eta) with the same batch B in both terms.
/// Throws ContractError if `vr` was anchored on a different potential.
ParamVector stochastic_grad(const Potential& potential, const ParamVector& w, std::span<const std::size_t> batch,
                            const VarianceReductionState* vr = nullptr);

/// Draws the next batch from `sampler` and evaluates stochastic_grad.
ParamVector stochastic_grad(const Potential& potential, const ParamVector& w, MinibatchSampler& sampler,
                            const VarianceReductionState* vr = nullptr);

}  // namespace bnn
