#include "bnn/core/minibatch.hpp"

#include <numeric>
#include <string>

#include "bnn/errors.hpp"

namespace bnn {

MinibatchSampler::MinibatchSampler(std::size_t num_data, MinibatchSchedule schedule)
    : perm_(num_data), batch_size_(schedule.batch_size), rng_(schedule.rng_seed) {
  if (batch_size_ == 0 || batch_size_ > num_data) {
    throw std::invalid_argument("MinibatchSampler: batch size " + std::to_string(batch_size_) +
                                " must lie in [1, " + std::to_string(num_data) + "]");
  }
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
}

std::span<const std::size_t> MinibatchSampler::next() {
  if (batch_size_ == perm_.size()) return {perm_.data(), batch_size_};
  const std::size_t n = perm_.size();
  for (std::size_t i = 0; i < batch_size_; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(perm_[i], perm_[pick(rng_)]);
  }
  return {perm_.data(), batch_size_};
}

VarianceReductionState VarianceReductionState::anchor_at(const Potential& potential, const ParamVector& anchor,
                                                         std::size_t update_period) {
  VarianceReductionState s;
  s.period_ = update_period;
  s.reanchor(potential, anchor);
  return s;
}

void VarianceReductionState::reanchor(const Potential& potential, const ParamVector& anchor) {
  if (static_cast<std::size_t>(anchor.size()) != potential.dim()) {
    throw DimensionError("VarianceReductionState: anchor length does not match the potential");
  }
  anchor_ = anchor;
  anchor_grad_ = potential.grad(anchor);
  fingerprint_ = potential.fingerprint();
}

ParamVector stochastic_grad(const Potential& potential, const ParamVector& w, std::span<const std::size_t> batch,
                            const VarianceReductionState* vr) {
  if (batch.empty()) throw std::invalid_argument("stochastic_grad: empty batch");
  const double scale = static_cast<double>(potential.num_data()) / static_cast<double>(batch.size());
  if (vr == nullptr) return scale * potential.data_grad(w, batch) + potential.prior_grad(w);

  if (vr->potential_fingerprint() != potential.fingerprint()) {
    throw ContractError("stochastic_grad: variance-reduction anchor gradient was computed for another posterior");
  }
  // The prior is exact, so only the data terms carry the control variate.
  return vr->anchor_full_grad() + scale * (potential.data_grad(w, batch) - potential.data_grad(vr->anchor(), batch)) +
         (potential.prior_grad(w) - potential.prior_grad(vr->anchor()));
}

ParamVector stochastic_grad(const Potential& potential, const ParamVector& w, MinibatchSampler& sampler,
                            const VarianceReductionState* vr) {
  if (sampler.num_data() != potential.num_data()) {
    throw DimensionError("stochastic_grad: sampler and potential disagree on N");
  }
  return stochastic_grad(potential, w, sampler.next(), vr);
}

}  // namespace bnn
