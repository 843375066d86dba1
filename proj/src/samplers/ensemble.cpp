#include "bnn/samplers/ensemble.hpp"

#include <string>
#include <vector>

#include "bnn/errors.hpp"
#include "bnn/rng.hpp"

namespace bnn {

SampleSet deep_ensemble(const Potential& potential, std::span<const std::uint64_t> member_seeds,
                        const OptimizerConfig& opt) {
  if (member_seeds.empty()) throw std::invalid_argument("deep_ensemble: need at least one member");
  std::vector<ParamVector> members;
  std::size_t dropped = 0;
  std::size_t last_failure = 0;
  for (std::uint64_t seed : member_seeds) {
    OptimizerConfig member = opt;
    member.init_seed = seed;
    try {
      members.push_back(train_map(potential, member).params);
    } catch (const DivergenceError& e) {
      ++dropped;
      last_failure = e.iteration();
    }
  }
  if (10 * dropped > member_seeds.size()) {
    throw DivergenceError("deep_ensemble: " + std::to_string(dropped) + " of " + std::to_string(member_seeds.size()) +
                              " members diverged",
                          last_failure);
  }
  SampleSet out;
  out.algorithm = "ensemble";
  out.seed = member_seeds.front();
  out.hyperparameters = {{"step_size", opt.initial_step}, {"members", static_cast<double>(member_seeds.size())}};
  out.samples = stack_rows(members);
  if (dropped > 0) out.notes.push_back(std::to_string(dropped) + " ensemble members diverged and were dropped");
  return out;
}

SampleSet deep_ensemble(const Potential& potential, std::size_t n_members, const OptimizerConfig& opt,
                        std::uint64_t seed) {
  std::vector<std::uint64_t> seeds(n_members);
  for (std::size_t i = 0; i < n_members; ++i) seeds[i] = split_seed(seed, {i});
  SampleSet out = deep_ensemble(potential, seeds, opt);
  out.seed = seed;
  return out;
}

}  // namespace bnn
