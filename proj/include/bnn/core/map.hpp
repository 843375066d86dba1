#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "bnn/core/potential.hpp"

namespace bnn {

/// Adam with an exponentially decaying step: lr_k = lr0 * (lr_final / lr0)^(k / (iterations - 1)).
struct OptimizerConfig {
  std::size_t iterations = 5000;
  double initial_step = 1e-2;
  double final_step = 1e-4;
  std::uint64_t init_seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  double step_at(std::size_t k) const;
};

class Adam {
 public:
  Adam(std::size_t dim, const OptimizerConfig& config);
  void step(ParamVector& w, const ParamVector& grad, double lr);

 private:
  OptimizerConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::size_t t_ = 0;
};

struct MapResult {
  ParamVector params;
  double initial_potential = 0.0;
  double final_potential = 0.0;
};

/// Draws N(0, I) initial weights from `seed`.
ParamVector prior_draw(std::size_t dim, std::uint64_t seed);

/// Full-batch Adam on U. Starts from `init` or, if absent, from prior_draw(dim, config.init_seed).
/// Returns the lowest-potential iterate visited, so final_potential <= initial_potential.
/// Throws DivergenceError at the first non-finite potential.
MapResult train_map(const Potential& potential, const OptimizerConfig& config,
                    const std::optional<ParamVector>& init = std::nullopt);

}  // namespace bnn
