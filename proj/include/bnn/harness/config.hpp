#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bnn/datasets/tasks.hpp"

namespace bnn {

enum class Scale { desk, paper };

Scale parse_scale(std::string_view name);

/// Algorithm names accepted in configs:
///   sgld sghmc sgld_cv sghmc_cv sgld_svrg sghmc_svrg csgld csghmc psgld swag ensemble mc_dropout
const std::vector<std::string>& known_algorithms();

/// Ten log-spaced step sizes per algorithm family:
///   SGLD variants 1e-8..1e-5, SGHMC variants 1e-8..1e-6, SWAG 1e-7..1e-5,
///   pSGLD, ensembles and MC-dropout 1e-4..1e-1.
std::vector<double> default_step_grid(const std::string& algorithm);

std::vector<double> log_spaced(double lo, double hi, std::size_t n);

struct AlgorithmGrid {
  std::string name;
  std::vector<double> step_sizes;
  /// Cycle counts for csgld/csghmc, dropout rates for mc_dropout; empty otherwise.
  std::vector<double> extra;

  bool has_extra() const { return !extra.empty(); }
  /// "M=10", "p=0.1" or "-".
  std::string extra_label(std::size_t i) const;
};

struct HmcSettings {
  std::size_t chains = 3;
  std::size_t iterations = 200;
  std::size_t burn_in = 100;
  std::size_t leapfrog_steps = 10000;
  double initial_step = 1e-3;
  double accept_low = 0.8;
  double accept_high = 0.95;
  std::size_t pilot_iterations = 40;
  std::size_t max_rounds = 30;
};

struct ExperimentConfig {
  std::vector<TaskId> tasks{TaskId::af1};
  std::size_t replicates = 20;
  std::uint64_t seed = 0;
  /// Overrides every task's hidden widths when set.
  std::optional<std::vector<std::size_t>> hidden_widths;
  Af2Latent af2_latent = Af2Latent::cubic;

  std::vector<AlgorithmGrid> algorithms;

  // SGMCMC
  std::size_t iterations = 20000;
  std::size_t burn_in = 10000;
  std::size_t batch_size = 32;
  std::size_t thin_target = 500;
  std::size_t chain_stride = 10;
  std::size_t svrg_period = 100;
  double friction = 0.1;

  // MAP, ensembles, MC-dropout
  std::size_t map_iterations = 5000;
  double map_initial_step = 1e-2;
  double map_final_step = 1e-4;
  std::size_t ensemble_size = 50;
  std::size_t ensemble_iterations = 5000;
  double lr_decay_ratio = 1e-2;  // final / initial Adam step for grid-driven trainings
  std::size_t dropout_samples = 500;

  // SWAG
  std::size_t swag_iterations = 1000;
  std::size_t swag_rank = 20;
  std::size_t swag_samples = 500;

  HmcSettings hmc;

  // Metrics
  double target_level = 0.95;
  std::vector<double> coverage_levels;  // defaults to 0.05, 0.10, ..., 0.95
  bool band_noise = false;
  std::size_t noise_draws = 100;
  std::size_t median_subsample = 1000;

  std::filesystem::path output_dir = "results";
  std::size_t workers = 1;
  bool use_hmc_cache = true;

  /// Throws std::invalid_argument describing the first problem found.
  void validate() const;
  /// Task spec with the config's overrides applied.
  TaskSpec task(TaskId id) const;
  /// coverage_levels plus target_level, sorted and de-duplicated.
  std::vector<double> band_levels() const;
};

/// Desk preset: N_D = 20, hidden widths 20, K = 2e4, thin target 500, ensembles of 50,
/// HMC with 1000 leapfrog steps, every algorithm on its default grid.
ExperimentConfig desk_preset();
/// Paper preset: N_D = 500, paper architectures, K = 1e5, HMC with 10000 leapfrog steps,
/// ensembles of 200, 2000 retained samples.
ExperimentConfig paper_preset();
ExperimentConfig preset(Scale scale);

/// Applies the keys present in `j` on top of `base`. Unknown keys are rejected.
ExperimentConfig apply_json(ExperimentConfig base, const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path, Scale scale);

nlohmann::ordered_json to_json(const ExperimentConfig& config);

}  // namespace bnn
