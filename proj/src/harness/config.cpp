#include "bnn/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "bnn/harness/csv.hpp"

namespace bnn {

using nlohmann::json;

Scale parse_scale(std::string_view name) {
  if (name == "desk") return Scale::desk;
  if (name == "paper") return Scale::paper;
  throw std::invalid_argument("unknown scale '" + std::string(name) + "' (expected desk or paper)");
}

const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names{"sgld",  "sghmc",  "sgld_cv", "sghmc_cv", "sgld_svrg",  "sghmc_svrg",
                                              "csgld", "csghmc", "psgld",   "swag",     "ensemble",   "mc_dropout"};
  return names;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi >= lo) || n == 0) throw std::invalid_argument("log_spaced: need 0 < lo <= hi and n > 0");
  std::vector<double> out(n);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = n == 1 ? lo : std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

std::vector<double> default_step_grid(const std::string& algorithm) {
  if (algorithm == "sgld" || algorithm == "sgld_cv" || algorithm == "sgld_svrg" || algorithm == "csgld") {
    return log_spaced(1e-8, 1e-5, 10);
  }
  if (algorithm == "sghmc" || algorithm == "sghmc_cv" || algorithm == "sghmc_svrg" || algorithm == "csghmc") {
    return log_spaced(1e-8, 1e-6, 10);
  }
  if (algorithm == "swag") return log_spaced(1e-7, 1e-5, 10);
  if (algorithm == "psgld" || algorithm == "ensemble" || algorithm == "mc_dropout") return log_spaced(1e-4, 1e-1, 10);
  throw std::invalid_argument("unknown algorithm '" + algorithm + "'");
}

namespace {

std::vector<double> default_extra(const std::string& algorithm) {
  if (algorithm == "csgld" || algorithm == "csghmc") return {10, 100, 1000};
  if (algorithm == "mc_dropout") return {0.1, 0.2, 0.3, 0.4, 0.5};
  return {};
}

AlgorithmGrid default_grid(const std::string& name) { return {name, default_step_grid(name), default_extra(name)}; }

std::vector<double> default_levels() {
  std::vector<double> levels;
  for (int i = 1; i <= 19; ++i) levels.push_back(0.05 * i);
  return levels;
}

}  // namespace

std::string AlgorithmGrid::extra_label(std::size_t i) const {
  if (extra.empty()) return "-";
  const std::string key = name == "mc_dropout" ? "p=" : "M=";
  return key + format_double(extra.at(i), 6);
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (tasks.empty()) fail("no tasks");
  if (replicates == 0) fail("replicates must be >= 1");
  if (algorithms.empty()) fail("no algorithms");
  const auto& names = known_algorithms();
  std::set<std::string> seen;
  for (const AlgorithmGrid& a : algorithms) {
    if (std::find(names.begin(), names.end(), a.name) == names.end()) fail("unknown algorithm '" + a.name + "'");
    if (!seen.insert(a.name).second) fail("algorithm '" + a.name + "' listed twice");
    if (a.step_sizes.empty()) fail(a.name + ": empty step-size grid");
    for (double s : a.step_sizes) {
      if (!(s > 0.0) || !std::isfinite(s)) fail(a.name + ": step sizes must be positive");
    }
    const bool wants_extra = !default_extra(a.name).empty();
    if (wants_extra != a.has_extra()) fail(a.name + (wants_extra ? ": missing" : ": unexpected") + " extra grid");
    for (double e : a.extra) {
      if (a.name == "mc_dropout" && !(e >= 0.0 && e < 1.0)) fail("dropout rates must lie in [0, 1)");
      if (a.name != "mc_dropout" && !(e >= 1.0 && e == std::floor(e))) fail(a.name + ": cycle counts must be integers >= 1");
    }
  }
  if (hidden_widths && hidden_widths->empty()) fail("hidden_widths must not be empty");
  if (burn_in >= iterations) fail("burn_in must be smaller than iterations");
  if (batch_size == 0 || chain_stride == 0 || thin_target == 0 || svrg_period == 0) fail("sizes must be positive");
  if ((iterations - burn_in) / chain_stride < thin_target) fail("(iterations - burn_in) / chain_stride < thin_target");
  if (!(friction > 0.0 && friction <= 1.0)) fail("friction must lie in (0, 1]");
  if (ensemble_size == 0 || dropout_samples < 2 || swag_samples < 2) fail("sample counts too small");
  if (!(map_initial_step > 0.0 && map_final_step > 0.0 && lr_decay_ratio > 0.0)) fail("learning rates must be positive");
  if (hmc.chains == 0 || hmc.iterations <= hmc.burn_in || hmc.leapfrog_steps == 0) fail("invalid HMC settings");
  if (!(hmc.initial_step > 0.0) || !(hmc.accept_low < hmc.accept_high)) fail("invalid HMC tuning settings");
  if (!(target_level > 0.0 && target_level < 1.0)) fail("target_level must lie in (0, 1)");
  for (double l : coverage_levels) {
    if (!(l > 0.0 && l < 1.0)) fail("coverage levels must lie in (0, 1)");
  }
  if (band_noise && noise_draws == 0) fail("noise_draws must be positive");
  if (median_subsample < 2) fail("median_subsample must be >= 2");
  if (workers == 0) fail("workers must be >= 1");
  for (TaskId t : tasks) {
    if (t == TaskId::af4 && task(t).input_dim != 1) fail("AF4 with D > 1 is not supported");
  }
}

TaskSpec ExperimentConfig::task(TaskId id) const {
  TaskSpec t = task_spec(id);
  if (hidden_widths) t.hidden_widths = *hidden_widths;
  t.af2_latent = af2_latent;
  return t;
}

std::vector<double> ExperimentConfig::band_levels() const {
  std::vector<double> levels = coverage_levels;
  levels.push_back(target_level);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
               levels.end());
  return levels;
}

ExperimentConfig desk_preset() {
  ExperimentConfig c;
  c.replicates = 20;
  c.hidden_widths = std::vector<std::size_t>{20, 20};
  for (const std::string& name : known_algorithms()) c.algorithms.push_back(default_grid(name));
  c.iterations = 20000;
  c.burn_in = 10000;
  c.thin_target = 500;
  c.chain_stride = 10;
  c.ensemble_size = 50;
  c.dropout_samples = 500;
  c.swag_samples = 500;
  c.hmc.leapfrog_steps = 1000;
  c.coverage_levels = default_levels();
  return c;
}

ExperimentConfig paper_preset() {
  ExperimentConfig c;
  c.replicates = 500;
  c.hidden_widths.reset();
  for (const std::string& name : known_algorithms()) c.algorithms.push_back(default_grid(name));
  c.iterations = 100000;
  c.burn_in = 50000;
  c.thin_target = 2000;
  c.chain_stride = 1;
  c.ensemble_size = 200;
  c.dropout_samples = 2000;
  c.swag_samples = 2000;
  c.hmc.leapfrog_steps = 10000;
  c.coverage_levels = default_levels();
  return c;
}

ExperimentConfig preset(Scale scale) { return scale == Scale::desk ? desk_preset() : paper_preset(); }

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

ExperimentConfig apply_json(ExperimentConfig c, const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  check_keys(j,
             {"tasks", "replicates", "seed", "hidden_widths", "af2_latent", "algorithms", "iterations", "burn_in",
              "batch_size", "thin_target", "chain_stride", "svrg_period", "friction", "map", "ensemble_size",
              "ensemble_iterations", "lr_decay_ratio", "dropout_samples", "swag", "hmc", "target_level",
              "coverage_levels", "band_noise", "noise_draws", "median_subsample", "output_dir", "workers",
              "use_hmc_cache"},
             "top level");
  if (j.contains("tasks")) {
    c.tasks.clear();
    for (const auto& t : j.at("tasks")) c.tasks.push_back(parse_task_id(t.get<std::string>()));
  }
  take(j, "replicates", c.replicates);
  take(j, "seed", c.seed);
  if (j.contains("hidden_widths")) {
    if (j.at("hidden_widths").is_null()) {
      c.hidden_widths.reset();
    } else {
      c.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
    }
  }
  if (j.contains("af2_latent")) {
    const auto s = j.at("af2_latent").get<std::string>();
    if (s == "cubic") {
      c.af2_latent = Af2Latent::cubic;
    } else if (s == "quadratic") {
      c.af2_latent = Af2Latent::quadratic;
    } else {
      throw std::invalid_argument("config: af2_latent must be cubic or quadratic");
    }
  }
  if (j.contains("algorithms")) {
    c.algorithms.clear();
    for (const auto& a : j.at("algorithms")) {
      if (a.is_string()) {
        c.algorithms.push_back(default_grid(a.get<std::string>()));
        continue;
      }
      check_keys(a, {"name", "step_sizes", "cycles", "dropout_rates"}, "algorithm entry");
      AlgorithmGrid g = default_grid(a.at("name").get<std::string>());
      take(a, "step_sizes", g.step_sizes);
      take(a, "cycles", g.extra);
      take(a, "dropout_rates", g.extra);
      c.algorithms.push_back(std::move(g));
    }
  }
  take(j, "iterations", c.iterations);
  take(j, "burn_in", c.burn_in);
  take(j, "batch_size", c.batch_size);
  take(j, "thin_target", c.thin_target);
  take(j, "chain_stride", c.chain_stride);
  take(j, "svrg_period", c.svrg_period);
  take(j, "friction", c.friction);
  if (j.contains("map")) {
    const json& m = j.at("map");
    check_keys(m, {"iterations", "initial_step", "final_step"}, "map");
    take(m, "iterations", c.map_iterations);
    take(m, "initial_step", c.map_initial_step);
    take(m, "final_step", c.map_final_step);
  }
  take(j, "ensemble_size", c.ensemble_size);
  take(j, "ensemble_iterations", c.ensemble_iterations);
  take(j, "lr_decay_ratio", c.lr_decay_ratio);
  take(j, "dropout_samples", c.dropout_samples);
  if (j.contains("swag")) {
    const json& s = j.at("swag");
    check_keys(s, {"iterations", "rank", "samples"}, "swag");
    take(s, "iterations", c.swag_iterations);
    take(s, "rank", c.swag_rank);
    take(s, "samples", c.swag_samples);
  }
  if (j.contains("hmc")) {
    const json& h = j.at("hmc");
    check_keys(h,
               {"chains", "iterations", "burn_in", "leapfrog_steps", "initial_step", "accept_low", "accept_high",
                "pilot_iterations", "max_rounds"},
               "hmc");
    take(h, "chains", c.hmc.chains);
    take(h, "iterations", c.hmc.iterations);
    take(h, "burn_in", c.hmc.burn_in);
    take(h, "leapfrog_steps", c.hmc.leapfrog_steps);
    take(h, "initial_step", c.hmc.initial_step);
    take(h, "accept_low", c.hmc.accept_low);
    take(h, "accept_high", c.hmc.accept_high);
    take(h, "pilot_iterations", c.hmc.pilot_iterations);
    take(h, "max_rounds", c.hmc.max_rounds);
  }
  take(j, "target_level", c.target_level);
  take(j, "coverage_levels", c.coverage_levels);
  take(j, "band_noise", c.band_noise);
  take(j, "noise_draws", c.noise_draws);
  take(j, "median_subsample", c.median_subsample);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  take(j, "workers", c.workers);
  take(j, "use_hmc_cache", c.use_hmc_cache);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, Scale scale) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return apply_json(preset(scale), j);
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  std::vector<std::string> tasks;
  for (TaskId t : c.tasks) tasks.push_back(task_name(t));
  j["tasks"] = tasks;
  j["replicates"] = c.replicates;
  j["seed"] = c.seed;
  if (c.hidden_widths) {
    j["hidden_widths"] = *c.hidden_widths;
  } else {
    j["hidden_widths"] = nullptr;
  }
  j["af2_latent"] = c.af2_latent == Af2Latent::cubic ? "cubic" : "quadratic";
  j["algorithms"] = nlohmann::ordered_json::array();
  for (const AlgorithmGrid& a : c.algorithms) {
    nlohmann::ordered_json g;
    g["name"] = a.name;
    g["step_sizes"] = a.step_sizes;
    if (a.name == "mc_dropout") g["dropout_rates"] = a.extra;
    if (a.name == "csgld" || a.name == "csghmc") g["cycles"] = a.extra;
    j["algorithms"].push_back(g);
  }
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["batch_size"] = c.batch_size;
  j["thin_target"] = c.thin_target;
  j["chain_stride"] = c.chain_stride;
  j["svrg_period"] = c.svrg_period;
  j["friction"] = c.friction;
  j["map"] = {{"iterations", c.map_iterations}, {"initial_step", c.map_initial_step}, {"final_step", c.map_final_step}};
  j["ensemble_size"] = c.ensemble_size;
  j["ensemble_iterations"] = c.ensemble_iterations;
  j["lr_decay_ratio"] = c.lr_decay_ratio;
  j["dropout_samples"] = c.dropout_samples;
  j["swag"] = {{"iterations", c.swag_iterations}, {"rank", c.swag_rank}, {"samples", c.swag_samples}};
  j["hmc"] = {{"chains", c.hmc.chains},
              {"iterations", c.hmc.iterations},
              {"burn_in", c.hmc.burn_in},
              {"leapfrog_steps", c.hmc.leapfrog_steps},
              {"initial_step", c.hmc.initial_step},
              {"accept_low", c.hmc.accept_low},
              {"accept_high", c.hmc.accept_high},
              {"pilot_iterations", c.hmc.pilot_iterations},
              {"max_rounds", c.hmc.max_rounds}};
  j["target_level"] = c.target_level;
  j["coverage_levels"] = c.coverage_levels;
  j["band_noise"] = c.band_noise;
  j["noise_draws"] = c.noise_draws;
  j["median_subsample"] = c.median_subsample;
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  j["use_hmc_cache"] = c.use_hmc_cache;
  return j;
}

}  // namespace bnn
