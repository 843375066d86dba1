#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "bnn/core/map.hpp"
#include "bnn/core/potential.hpp"
#include "bnn/samplers/sample_set.hpp"

namespace bnn {

/// Trains one network per seed (prior-drawn initialization, train_map) and
/// returns the optima. Diverged members are dropped and noted; more than 10%
/// dropped raises DivergenceError.
SampleSet deep_ensemble(const Potential& potential, std::span<const std::uint64_t> member_seeds,
                        const OptimizerConfig& opt);

/// Member i uses seed split_seed(seed, {i}).
SampleSet deep_ensemble(const Potential& potential, std::size_t n_members, const OptimizerConfig& opt,
                        std::uint64_t seed);

}  // namespace bnn
