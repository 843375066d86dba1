#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bnn/core/map.hpp"
#include "bnn/core/posterior.hpp"
#include "bnn/rng.hpp"
#include "bnn/samplers/sample_set.hpp"

namespace bnn {

/// Bernoulli(1 - rate) keep masks, one (rows x width) matrix per hidden layer.
HiddenMasks sample_hidden_masks(const MlpArchitecture& arch, std::size_t rows, double rate, Rng& rng);

/// Folds one keep mask per hidden unit (inverted scaling 1 / (1 - rate)) into the
/// outgoing weights of that unit. The returned parameters reproduce the masked
/// network exactly under the plain forward pass.
ParamVector apply_unit_masks(const MlpArchitecture& arch, const ParamVector& params,
                             const std::vector<Eigen::VectorXd>& unit_masks, double rate);

/// Adam on the dropout objective: fresh per-example masks on every hidden layer's
/// output at each iteration, prior term unchanged.
ParamVector train_with_dropout(const PosteriorSpec& posterior, double rate, const OptimizerConfig& opt,
                               std::uint64_t seed);

/// Trains with dropout, then draws `n` mask configurations and returns their
/// effective parameter vectors (masks stay active at inference).
SampleSet mc_dropout_sample(const PosteriorSpec& posterior, double rate, std::size_t n, const OptimizerConfig& opt,
                            std::uint64_t seed);

}  // namespace bnn
