#include "bnn/harness/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "bnn/core/map.hpp"
#include "bnn/core/posterior.hpp"
#include "bnn/errors.hpp"
#include "bnn/harness/csv.hpp"
#include "bnn/metrics/coverage.hpp"
#include "bnn/metrics/ksd.hpp"
#include "bnn/metrics/mmd.hpp"
#include "bnn/rng.hpp"
#include "bnn/samplers/dropout.hpp"
#include "bnn/samplers/ensemble.hpp"
#include "bnn/samplers/hmc.hpp"
#include "bnn/samplers/sgmcmc.hpp"
#include "bnn/samplers/swag.hpp"

namespace bnn {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kHmcRetries = 4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_params(const ParamVector& w) {
  return hash_bytes(w.data(), static_cast<std::size_t>(w.size()) * sizeof(double));
}

// Rows: samples; columns: outputs at each input row of `x`.
SampleMatrix predictions(const MlpArchitecture& arch, const SampleMatrix& w, const Eigen::MatrixXd& x) {
  SampleMatrix out(w.rows(), x.rows());
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    out.row(i) = forward_batch(arch, w.row(i).transpose(), x).col(0).transpose();
  }
  return out;
}

struct Replicate {
  std::unique_ptr<PosteriorSpec> posterior;
  ParamVector map;
  SampleMatrix hmc;
  SampleMatrix hmc_grid;
  double hmc_self_weight = 0.0;
  double hmc_self_function = 0.0;
  bool ok = false;
  std::string error;
};

struct TaskContext {
  TaskId id;
  std::string name;
  TaskSpec spec;
  std::unique_ptr<MlpArchitecture> arch;
  std::optional<ParamVector> teacher;
  TestSet test;
  Eigen::MatrixXd grid;
  std::uint64_t data_seed = 0;
  std::uint64_t test_fingerprint = 0;
  std::vector<Replicate> reps;
  std::vector<CellKey> cells;
};

// ---------------------------------------------------------------- HMC reference cache

struct HmcCacheEntry {
  fs::path bin;
  fs::path manifest;
};

HmcCacheEntry cache_paths(const ExperimentConfig& config, const std::string& task, std::size_t r) {
  const fs::path dir = config.output_dir / "hmc_cache";
  const std::string stem = task + "_r" + std::to_string(r);
  return {dir / (stem + ".bin"), dir / (stem + ".json")};
}

nlohmann::ordered_json cache_key(const ExperimentConfig& config, const TaskContext& task, std::size_t r,
                                 std::uint64_t seed, const Replicate& rep) {
  nlohmann::ordered_json k;
  k["task"] = task.name;
  k["replicate"] = r;
  k["seed"] = seed;
  k["dataset_fingerprint"] = rep.posterior->fingerprint();
  k["init_fingerprint"] = hash_params(rep.map);
  k["layer_sizes"] = task.arch->layer_sizes();
  const HmcSettings& h = config.hmc;
  k["hmc"] = {{"chains", h.chains},
              {"iterations", h.iterations},
              {"burn_in", h.burn_in},
              {"leapfrog_steps", h.leapfrog_steps},
              {"initial_step", h.initial_step},
              {"accept_low", h.accept_low},
              {"accept_high", h.accept_high},
              {"pilot_iterations", h.pilot_iterations},
              {"max_rounds", h.max_rounds}};
  return k;
}

bool load_cached_hmc(const HmcCacheEntry& paths, const nlohmann::ordered_json& key, double accept_floor,
                     SampleMatrix& samples, HmcReferenceInfo& info) {
  std::ifstream m(paths.manifest);
  if (!m) return false;
  nlohmann::ordered_json manifest;
  try {
    m >> manifest;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
  if (!manifest.contains("key") || manifest.at("key") != key) return false;
  // entries that missed the acceptance floor are recomputed under the retry rule
  if (manifest.value("acceptance_rate", 0.0) < accept_floor) return false;
  std::ifstream in(paths.bin, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&rows), sizeof rows);
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || std::memcmp(magic, "BNNHMC1", 8) != 0) return false;
  if (rows != manifest.value("rows", std::uint64_t{0}) || cols != manifest.value("cols", std::uint64_t{0})) return false;
  SampleMatrix s(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(s.data()), static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in) return false;
  samples = std::move(s);
  info.step_size = manifest.at("step_size").get<double>();
  info.acceptance_rate = manifest.at("acceptance_rate").get<double>();
  info.nonfinite_rejections = manifest.at("nonfinite_rejections").get<std::size_t>();
  info.from_cache = true;
  return true;
}

void store_cached_hmc(const HmcCacheEntry& paths, const nlohmann::ordered_json& key, const SampleMatrix& samples,
                      const HmcReferenceInfo& info) {
  fs::create_directories(paths.bin.parent_path());
  {
    std::ofstream out(paths.bin, std::ios::binary);
    const char magic[8] = "BNNHMC1";
    const auto rows = static_cast<std::uint64_t>(samples.rows());
    const auto cols = static_cast<std::uint64_t>(samples.cols());
    out.write(magic, 8);
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    out.write(reinterpret_cast<const char*>(samples.data()), static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing " + paths.bin.string());
  }
  nlohmann::ordered_json manifest;
  manifest["key"] = key;
  manifest["rows"] = samples.rows();
  manifest["cols"] = samples.cols();
  manifest["dtype"] = "float64, row-major, native byte order, 24-byte header";
  manifest["step_size"] = info.step_size;
  manifest["acceptance_rate"] = info.acceptance_rate;
  manifest["nonfinite_rejections"] = info.nonfinite_rejections;
  std::ofstream m(paths.manifest);
  m << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------- per replicate preparation

void prepare_replicate(const ExperimentConfig& config, TaskContext& task, std::size_t r, HmcReferenceInfo& info) {
  Replicate& rep = task.reps[r];
  const std::uint64_t task_key = hash_string(task.name);
  const ParamVector* teacher = task.teacher ? &*task.teacher : nullptr;
  rep.posterior = std::make_unique<PosteriorSpec>(*task.arch, make_training_set(task.spec, r, task.data_seed, teacher),
                                                  task.spec.noise_sigma);
  info.task = task.name;
  info.replicate = r;
  try {
    OptimizerConfig opt;
    opt.iterations = config.map_iterations;
    opt.initial_step = config.map_initial_step;
    opt.final_step = config.map_final_step;
    opt.init_seed = split_seed(config.seed, {task_key, hash_string("map"), r});
    rep.map = train_map(*rep.posterior, opt).params;

    const auto t0 = Clock::now();
    const std::uint64_t hmc_seed = split_seed(config.seed, {task_key, hash_string("hmc"), r});
    const HmcCacheEntry paths = cache_paths(config, task.name, r);
    const auto key = cache_key(config, task, r, hmc_seed, rep);
    if (!(config.use_hmc_cache && load_cached_hmc(paths, key, config.hmc.accept_low, rep.hmc, info))) {
      HmcConfig hc;
      hc.step_size = config.hmc.initial_step;
      hc.leapfrog_steps = config.hmc.leapfrog_steps;
      hc.iterations = config.hmc.iterations;
      hc.burn_in = config.hmc.burn_in;
      hc.chains = config.hmc.chains;
      hc.seed = hmc_seed;
      hc.acceptance_floor = config.hmc.accept_low;
      HmcTuning tuning{config.hmc.accept_low, config.hmc.accept_high, config.hmc.pilot_iterations,
                       config.hmc.max_rounds};
      hc.step_size = tune_hmc_step_size(*rep.posterior, hc, rep.map, tuning);
      // The pilot only sees the neighbourhood of the MAP. If the full chains accept
      // less often than the floor, halve the step and rerun.
      HmcResult result = hmc_run(*rep.posterior, hc, rep.map);
      for (std::size_t retry = 0; retry < kHmcRetries && result.acceptance_rate < config.hmc.accept_low; ++retry) {
        hc.step_size *= 0.5;
        result = hmc_run(*rep.posterior, hc, rep.map);
      }
      rep.hmc = result.samples.samples;
      info.step_size = hc.step_size;
      info.acceptance_rate = result.acceptance_rate;
      info.nonfinite_rejections = result.nonfinite_rejections;
      if (config.use_hmc_cache && rep.hmc.rows() > 0) store_cached_hmc(paths, key, rep.hmc, info);
    }
    info.wall_time = seconds_since(t0);
    info.samples = static_cast<std::size_t>(rep.hmc.rows());
    if (rep.hmc.rows() == 0) throw ContractError("HMC reference produced no samples");
    if (!rep.hmc.allFinite()) throw DivergenceError("HMC reference contains non-finite values", 0);
    rep.hmc_grid = predictions(*task.arch, rep.hmc, task.grid);
    rep.hmc_self_weight = kernel_self_mean(rep.hmc);
    rep.hmc_self_function = kernel_self_mean(rep.hmc_grid);
    rep.ok = true;
    info.ok = true;
  } catch (const std::exception& e) {
    rep.ok = false;
    rep.error = e.what();
    info.ok = false;
    info.error = e.what();
  }
}

// ---------------------------------------------------------------- algorithms

SamplerConfig sgmcmc_config(const ExperimentConfig& config, const CellKey& cell, std::uint64_t seed) {
  SamplerConfig s;
  const std::string& a = cell.algorithm;
  s.family = a.find("sghmc") != std::string::npos ? SgmcmcFamily::sghmc : SgmcmcFamily::sgld;
  if (a == "sgld_cv" || a == "sghmc_cv") {
    s.variant = SgmcmcVariant::cv;
  } else if (a == "sgld_svrg" || a == "sghmc_svrg") {
    s.variant = SgmcmcVariant::svrg;
  } else if (a == "csgld" || a == "csghmc") {
    s.variant = SgmcmcVariant::cyclical;
    s.cycles = static_cast<std::size_t>(cell.extra);
  } else if (a == "psgld") {
    s.variant = SgmcmcVariant::preconditioned;
  }
  s.step_size = cell.step_size;
  s.iterations = config.iterations;
  s.burn_in = config.burn_in;
  s.batch_size = config.batch_size;
  s.svrg_period = config.svrg_period;
  s.friction = config.friction;
  s.thin_target = config.thin_target;
  s.chain_stride = config.chain_stride;
  s.rng_seed = seed;
  return s;
}

OptimizerConfig grid_optimizer(const ExperimentConfig& config, double lr, std::size_t iterations) {
  OptimizerConfig opt;
  opt.iterations = iterations;
  opt.initial_step = lr;
  opt.final_step = lr * config.lr_decay_ratio;
  return opt;
}

SampleMatrix run_algorithm(const ExperimentConfig& config, const CellKey& cell, const Replicate& rep,
                           std::uint64_t seed) {
  const PosteriorSpec& post = *rep.posterior;
  const std::string& a = cell.algorithm;
  if (a == "swag") {
    SwagConfig sc;
    sc.step_size = cell.step_size;
    sc.iterations = config.swag_iterations;
    sc.rank = config.swag_rank;
    sc.batch_size = config.batch_size;
    sc.seed = split_seed(seed, {hash_string("sgd")});
    const SwagModel model = swag_fit(post, rep.map, sc);
    return swag_sample(model, config.swag_samples, split_seed(seed, {hash_string("draw")})).samples;
  }
  if (a == "ensemble") {
    return deep_ensemble(post, config.ensemble_size, grid_optimizer(config, cell.step_size, config.ensemble_iterations),
                         seed)
        .samples;
  }
  if (a == "mc_dropout") {
    return mc_dropout_sample(post, cell.extra, config.dropout_samples,
                             grid_optimizer(config, cell.step_size, config.map_iterations), seed)
        .samples;
  }
  const SamplerConfig sc = sgmcmc_config(config, cell, seed);
  return run_sgmcmc(post, sc, rep.map, &rep.map).samples.samples;
}

// ---------------------------------------------------------------- one run

struct RunOutput {
  ResultRow row;
  SampleMatrix weights;  // kept for replicate 0 only
  SampleMatrix grid;
};

void mark_diverged(ResultRow& row, const std::string& why) {
  row.ok = false;
  row.q2 = row.picp = row.mmd_weight = row.mmd_function = row.ksd = kNaN;
  row.picp_per_level.clear();
  row.indicators.clear();
  row.error = why;
}

RunOutput execute_run(const ExperimentConfig& config, const TaskContext& task, const CellKey& cell, std::size_t r,
                      const std::vector<double>& levels, std::optional<double> lengthscale, bool keep_samples) {
  RunOutput out;
  out.row.cell = cell;
  out.row.replicate = r;
  const Replicate& rep = task.reps[r];
  if (!rep.ok) {
    mark_diverged(out.row, "replicate aborted: " + rep.error);
    return out;
  }
  const auto t0 = Clock::now();
  const std::uint64_t seed = run_seed(config.seed, task.name, cell.algorithm, cell.hyper_index, r);
  try {
    SampleMatrix w = run_algorithm(config, cell, rep, seed);
    if (!w.allFinite()) throw DivergenceError("non-finite parameters in the sample", 0);
    const SampleMatrix test_pred = predictions(*task.arch, w, task.test.data.inputs);
    SampleMatrix grid_pred = predictions(*task.arch, w, task.grid);
    if (!test_pred.allFinite() || !grid_pred.allFinite()) throw DivergenceError("non-finite predictions", 0);

    BandOptions bo;
    bo.noise_draws = config.noise_draws;
    bo.seed = split_seed(seed, {hash_string("band")});
    bo.test_fingerprint = task.test_fingerprint;
    const PredictiveBand band =
        predictive_band(test_pred, config.band_noise ? task.spec.noise_sigma : 0.0, levels, bo);
    const Eigen::VectorXd targets = task.test.data.targets.col(0);
    ResultRow& row = out.row;
    row.q2 = q2(band.mean, targets);
    for (double level : levels) {
      const PredictiveBand* one = &band;
      const CoverageIndicators ind = coverage_indicators({one, 1}, targets, level);
      const double picp = static_cast<double>(ind.cast<double>().sum()) / static_cast<double>(ind.cols());
      row.picp_per_level.push_back(picp);
      if (std::abs(level - config.target_level) <= 1e-12) {
        row.picp = picp;
        row.indicators.assign(ind.data(), ind.data() + ind.size());
      }
    }
    row.mmd_weight = mmd_from_means(kernel_self_mean(w), rep.hmc_self_weight, kernel_cross_mean(w, rep.hmc));
    row.mmd_function =
        mmd_from_means(kernel_self_mean(grid_pred), rep.hmc_self_function, kernel_cross_mean(grid_pred, rep.hmc_grid));
    row.ksd = lengthscale ? ksd(w, score_oracle(*rep.posterior), *lengthscale) : kNaN;
    row.ok = true;
    if (keep_samples) {
      out.weights = std::move(w);
      out.grid = std::move(grid_pred);
    }
  } catch (const DivergenceError& e) {
    mark_diverged(out.row, e.what());
  } catch (const std::domain_error& e) {
    mark_diverged(out.row, e.what());
  }
  out.row.wall_time = seconds_since(t0);
  return out;
}

// Uniform subsample without replacement over the concatenation of `parts`, then the median heuristic.
double pooled_lengthscale(const std::vector<const SampleMatrix*>& parts, std::size_t subsample, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, Eigen::Index>> index;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (Eigen::Index i = 0; i < parts[p]->rows(); ++i) index.emplace_back(p, i);
  }
  if (index.size() < 2) throw std::invalid_argument("median heuristic: fewer than 2 pooled samples");
  Rng rng(seed);
  const std::size_t m = std::min(subsample, index.size());
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, index.size() - 1);
    std::swap(index[i], index[pick(rng)]);
  }
  SampleMatrix pooled(static_cast<Eigen::Index>(m), parts.front()->cols());
  for (std::size_t i = 0; i < m; ++i) {
    pooled.row(static_cast<Eigen::Index>(i)) = parts[index[i].first]->row(index[i].second);
  }
  return median_heuristic(pooled, m, seed);
}

DiscrepancyMatrix parallel_pairwise_mmd(const std::vector<const SampleMatrix*>& samples,
                                        std::vector<std::string> labels, std::size_t workers) {
  const std::size_t n = samples.size();
  std::vector<double> self(n);
  parallel_for(n, workers, [&](std::size_t i) { self[i] = kernel_self_mean(*samples[i]); });
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    values[p] = mmd_from_means(self[i], self[j], kernel_cross_mean(*samples[i], *samples[j]));
  });
  DiscrepancyMatrix out{std::move(labels), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(pairs[p].first);
    const auto j = static_cast<Eigen::Index>(pairs[p].second);
    out.values(i, j) = out.values(j, i) = values[p];
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1); NaN below two values.
double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return kNaN;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---------------------------------------------------------------- public helpers

std::string CellKey::label() const {
  std::string s = algorithm;
  if (hyper != "-") s += "/" + hyper;
  return s + "/eps=" + format_double(step_size, 6);
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::uint64_t run_seed(std::uint64_t master, const std::string& task, const std::string& algorithm,
                       std::size_t hyper_index, std::size_t replicate) {
  return split_seed(master, {hash_string(task), hash_string(algorithm), hyper_index, replicate});
}

std::uint64_t task_data_seed(std::uint64_t master, TaskId task) {
  return split_seed(master, {hash_string(task_name(task)), hash_string("data")});
}

std::vector<CellKey> enumerate_cells(const ExperimentConfig& config, TaskId task) {
  std::vector<CellKey> cells;
  for (const AlgorithmGrid& a : config.algorithms) {
    const std::size_t n_extra = std::max<std::size_t>(1, a.extra.size());
    for (std::size_t e = 0; e < n_extra; ++e) {
      for (std::size_t s = 0; s < a.step_sizes.size(); ++s) {
        CellKey c;
        c.task = task_name(task);
        c.algorithm = a.name;
        c.hyper = a.extra_label(e);
        c.hyper_index = e * a.step_sizes.size() + s;
        c.step_index = s;
        c.step_size = a.step_sizes[s];
        c.extra = a.has_extra() ? a.extra[e] : 0.0;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

std::vector<AggregateRow> aggregate(const ExperimentConfig& config, const std::vector<ResultRow>& rows) {
  std::vector<AggregateRow> out;
  const std::vector<double> levels = config.band_levels();
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].cell.task == rows[i].cell.task &&
           rows[j].cell.algorithm == rows[i].cell.algorithm && rows[j].cell.hyper_index == rows[i].cell.hyper_index) {
      ++j;
    }
    AggregateRow agg;
    agg.cell = rows[i].cell;
    agg.level = config.target_level;
    std::vector<double> picp, q2s, mw, mf, ks;
    std::vector<const ResultRow*> ok;
    for (std::size_t k = i; k < j; ++k) {
      if (rows[k].ok) {
        ok.push_back(&rows[k]);
        picp.push_back(rows[k].picp);
        q2s.push_back(rows[k].q2);
        mw.push_back(rows[k].mmd_weight);
        mf.push_back(rows[k].mmd_function);
        ks.push_back(rows[k].ksd);
      } else {
        ++agg.n_diverged;
      }
    }
    agg.n_ok = ok.size();
    agg.mcp = mean_of(picp);
    agg.picp_std = std_of(picp);
    agg.q2_mean = mean_of(q2s);
    agg.q2_std = std_of(q2s);
    agg.mmd_weight_mean = mean_of(mw);
    agg.mmd_function_mean = mean_of(mf);
    agg.ksd_mean = mean_of(ks);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      std::vector<double> v;
      for (const ResultRow* r : ok) v.push_back(r->picp_per_level[l]);
      agg.mcp_per_level.push_back(mean_of(v));
    }
    if (!ok.empty()) {
      const std::size_t n_test = ok.front()->indicators.size();
      CoverageIndicators ind(static_cast<Eigen::Index>(ok.size()), static_cast<Eigen::Index>(n_test));
      for (std::size_t r = 0; r < ok.size(); ++r) {
        for (std::size_t t = 0; t < n_test; ++t) {
          ind(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = ok[r]->indicators[t];
        }
      }
      const CoverageReport report = coverage_from_indicators(ind, config.target_level);
      agg.ccp_mae = report.ccp_mae;
      agg.ccp_per_x = report.ccp_per_x;
    } else {
      agg.ccp_mae = kNaN;
    }
    out.push_back(std::move(agg));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------- the sweep

BenchmarkSummary run_benchmark(const ExperimentConfig& config, bool write_files) {
  config.validate();
  BenchmarkSummary summary;
  const std::vector<double> levels = config.band_levels();

  for (TaskId id : config.tasks) {
    TaskContext task;
    task.id = id;
    task.name = task_name(id);
    task.spec = config.task(id);
    task.arch = std::make_unique<MlpArchitecture>(task.spec.architecture());
    task.data_seed = task_data_seed(config.seed, id);
    task.teacher = make_teacher(task.spec, task.data_seed);
    task.test = make_test_set(task.spec, task.data_seed, task.teacher ? &*task.teacher : nullptr);
    task.grid = make_function_grid(task.spec);
    task.test_fingerprint = dataset_fingerprint(task.test.data, task.spec.noise_sigma);
    task.reps.resize(config.replicates);
    task.cells = enumerate_cells(config, id);

    // Data, MAP and HMC reference for every replicate.
    std::vector<HmcReferenceInfo> hmc(config.replicates);
    parallel_for(config.replicates, config.workers, [&](std::size_t r) { prepare_replicate(config, task, r, hmc[r]); });
    for (const HmcReferenceInfo& h : hmc) {
      if (!h.ok) {
        const std::string msg = task.name + " replicate " + std::to_string(h.replicate) +
                                ": reference unavailable, replicate aborted (" + h.error + ")";
        std::cerr << "error: " << msg << '\n';
        summary.warnings.push_back(msg);
      } else if (h.acceptance_rate < config.hmc.accept_low) {
        summary.warnings.push_back(task.name + " replicate " + std::to_string(h.replicate) + ": HMC acceptance " +
                                   format_double(h.acceptance_rate, 4) + " below " +
                                   format_double(config.hmc.accept_low, 4));
      }
    }

    const std::size_t n_cells = task.cells.size();
    std::vector<ResultRow> rows(n_cells * config.replicates);

    // Replicate 0 first: its samples feed the KSD lengthscale and the discrepancy matrices.
    std::vector<RunOutput> first(n_cells);
    parallel_for(n_cells, config.workers, [&](std::size_t c) {
      first[c] = execute_run(config, task, task.cells[c], 0, levels, std::nullopt, true);
    });

    TaskOutput tout;
    tout.task = task.name;
    tout.test_inputs = task.test.data.inputs.col(0);
    std::vector<const SampleMatrix*> weight_parts;
    std::vector<const SampleMatrix*> grid_parts;
    std::vector<std::string> labels;
    std::optional<double> lengthscale;
    if (task.reps[0].ok) {
      weight_parts.push_back(&task.reps[0].hmc);
      grid_parts.push_back(&task.reps[0].hmc_grid);
      labels.emplace_back("hmc");
      CellKey ref;
      ref.task = task.name;
      ref.algorithm = "hmc";
      ref.hyper = "-";
      tout.matrix_cells.push_back(ref);
    }
    for (std::size_t c = 0; c < n_cells; ++c) {
      if (first[c].row.ok) {
        weight_parts.push_back(&first[c].weights);
        grid_parts.push_back(&first[c].grid);
        labels.push_back(task.cells[c].label());
        tout.matrix_cells.push_back(task.cells[c]);
      }
    }
    if (weight_parts.size() >= 1 && (weight_parts.size() > 1 || weight_parts.front()->rows() > 1)) {
      lengthscale = pooled_lengthscale(weight_parts, config.median_subsample,
                                       split_seed(config.seed, {hash_string(task.name), hash_string("median")}));
      tout.ksd_lengthscale = *lengthscale;
    } else {
      tout.ksd_lengthscale = kNaN;
    }
    parallel_for(n_cells, config.workers, [&](std::size_t c) {
      ResultRow& row = first[c].row;
      if (!row.ok) return;
      if (!lengthscale) {
        row.ksd = kNaN;
        return;
      }
      try {
        row.ksd = ksd(first[c].weights, score_oracle(*task.reps[0].posterior), *lengthscale);
      } catch (const std::domain_error& e) {
        mark_diverged(row, e.what());
      }
    });
    if (!labels.empty()) {
      tout.weight_matrix = parallel_pairwise_mmd(weight_parts, labels, config.workers);
      tout.function_matrix = parallel_pairwise_mmd(grid_parts, labels, config.workers);
      tout.weight_mds = mds_embed(tout.weight_matrix, 2);
      tout.function_mds = mds_embed(tout.function_matrix, 2);
    }
    for (std::size_t c = 0; c < n_cells; ++c) rows[c * config.replicates] = std::move(first[c].row);
    first.clear();

    // Remaining replicates.
    const std::size_t rest = config.replicates - 1;
    parallel_for(n_cells * rest, config.workers, [&](std::size_t u) {
      const std::size_t c = u / rest;
      const std::size_t r = 1 + u % rest;
      rows[c * config.replicates + r] = execute_run(config, task, task.cells[c], r, levels, lengthscale, false).row;
    });

    std::vector<AggregateRow> aggs = aggregate(config, rows);
    summary.rows.insert(summary.rows.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
    summary.aggregates.insert(summary.aggregates.end(), aggs.begin(), aggs.end());
    summary.hmc.insert(summary.hmc.end(), hmc.begin(), hmc.end());
    summary.tasks.push_back(std::move(tout));
  }

  if (write_files) write_outputs(config, summary);
  return summary;
}

// ---------------------------------------------------------------- CSV outputs

namespace {

std::vector<std::string> cell_fields(const CellKey& c) {
  return {c.algorithm, c.hyper, std::to_string(c.step_index), format_double(c.step_size)};
}

std::string f(double v) { return format_double(v); }

}  // namespace

void write_discrepancy_csv(const fs::path& path, const std::vector<CellKey>& cells, const DiscrepancyMatrix& m) {
  if (cells.size() != m.labels.size()) throw DimensionError("write_discrepancy_csv: cell count mismatch");
  std::vector<std::string> header{"label", "algorithm", "hyper", "step_index", "step_size"};
  header.insert(header.end(), m.labels.begin(), m.labels.end());
  CsvWriter w(path, header);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    auto row = cell_fields(cells[i]);
    row.insert(row.begin(), m.labels[i]);
    for (std::size_t j = 0; j < m.labels.size(); ++j) {
      row.push_back(f(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
    w.row(row);
  }
  w.close();
}

std::pair<std::vector<CellKey>, DiscrepancyMatrix> read_discrepancy_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  constexpr std::size_t kFixed = 5;
  const std::size_t n = t.rows.size();
  if (t.header.size() != kFixed + n) throw std::runtime_error(path.string() + ": matrix is not square");
  std::vector<CellKey> cells;
  DiscrepancyMatrix m;
  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = t.rows[i];
    if (r[0] != t.header[kFixed + i]) throw std::runtime_error(path.string() + ": row and column labels differ");
    CellKey c;
    c.algorithm = r[1];
    c.hyper = r[2];
    c.step_index = std::stoul(r[3]);
    c.step_size = parse_double(r[4]);
    cells.push_back(c);
    m.labels.push_back(r[0]);
    for (std::size_t j = 0; j < n; ++j) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(r[kFixed + j]);
    }
  }
  return {cells, m};
}

void write_mds_csv(const fs::path& path, const std::vector<CellKey>& cells, const DiscrepancyMatrix& m,
                   const MdsEmbedding& e) {
  CsvWriter w(path, {"label", "algorithm", "hyper", "step_index", "step_size", "x", "y"});
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double x = e.coordinates.cols() > 0 ? e.coordinates(r, 0) : 0.0;
    const double y = e.coordinates.cols() > 1 ? e.coordinates(r, 1) : 0.0;
    auto row = cell_fields(cells.at(i));
    row.insert(row.begin(), m.labels[i]);
    row.push_back(f(x));
    row.push_back(f(y));
    w.row(row);
  }
  w.close();
}

std::vector<fs::path> write_outputs(const ExperimentConfig& config, const BenchmarkSummary& summary) {
  const fs::path& dir = config.output_dir;
  fs::create_directories(dir);
  std::vector<fs::path> files;
  const std::vector<double> levels = config.band_levels();

  {
    files.push_back(dir / "results.csv");
    CsvWriter w(files.back(), {"task", "algorithm", "hyper", "step_index", "step_size", "replicate", "q2", "picp",
                               "mmd_weight", "mmd_function", "ksd", "status"});
    for (const ResultRow& r : summary.rows) {
      auto row = cell_fields(r.cell);
      row.insert(row.begin(), r.cell.task);
      row.insert(row.end(), {std::to_string(r.replicate), f(r.q2), f(r.picp), f(r.mmd_weight), f(r.mmd_function),
                             f(r.ksd), r.ok ? "ok" : "diverged"});
      w.row(row);
    }
    w.close();
  }
  {
    files.push_back(dir / "aggregates.csv");
    CsvWriter w(files.back(), {"task", "algorithm", "hyper", "step_index", "step_size", "n_ok", "n_diverged", "level",
                               "mcp", "ccp_mae", "picp_std", "q2_mean", "q2_std", "mmd_weight_mean",
                               "mmd_function_mean", "ksd_mean"});
    for (const AggregateRow& a : summary.aggregates) {
      auto row = cell_fields(a.cell);
      row.insert(row.begin(), a.cell.task);
      row.insert(row.end(), {std::to_string(a.n_ok), std::to_string(a.n_diverged), f(a.level), f(a.mcp), f(a.ccp_mae),
                             f(a.picp_std), f(a.q2_mean), f(a.q2_std), f(a.mmd_weight_mean), f(a.mmd_function_mean),
                             f(a.ksd_mean)});
      w.row(row);
    }
    w.close();
  }
  for (const TaskOutput& t : summary.tasks) {
    files.push_back(dir / ("coverage_curves_" + t.task + ".csv"));
    CsvWriter cw(files.back(), {"algorithm", "hyper", "step_index", "step_size", "level", "mcp"});
    files.push_back(dir / ("ccp_" + t.task + ".csv"));
    CsvWriter pw(files.back(), {"algorithm", "hyper", "step_index", "step_size", "test_index", "x", "ccp"});
    for (const AggregateRow& a : summary.aggregates) {
      if (a.cell.task != t.task) continue;
      for (std::size_t l = 0; l < levels.size(); ++l) {
        auto row = cell_fields(a.cell);
        row.push_back(f(levels[l]));
        row.push_back(f(a.mcp_per_level[l]));
        cw.row(row);
      }
      for (std::size_t i = 0; i < a.ccp_per_x.size(); ++i) {
        auto row = cell_fields(a.cell);
        row.insert(row.end(), {std::to_string(i), f(t.test_inputs(static_cast<Eigen::Index>(i))), f(a.ccp_per_x[i])});
        pw.row(row);
      }
    }
    cw.close();
    pw.close();

    if (!t.weight_matrix.labels.empty()) {
      files.push_back(dir / ("mmd_matrix_" + t.task + ".csv"));
      write_discrepancy_csv(files.back(), t.matrix_cells, t.weight_matrix);
      files.push_back(dir / ("mmd_matrix_function_" + t.task + ".csv"));
      write_discrepancy_csv(files.back(), t.matrix_cells, t.function_matrix);
      files.push_back(dir / ("mds_" + t.task + ".csv"));
      write_mds_csv(files.back(), t.matrix_cells, t.weight_matrix, t.weight_mds);
      files.push_back(dir / ("mds_function_" + t.task + ".csv"));
      write_mds_csv(files.back(), t.matrix_cells, t.function_matrix, t.function_mds);
    }

    files.push_back(dir / ("hmc_" + t.task + ".csv"));
    CsvWriter hw(files.back(), {"replicate", "status", "step_size", "acceptance_rate", "nonfinite_rejections", "samples"});
    for (const HmcReferenceInfo& h : summary.hmc) {
      if (h.task != t.task) continue;
      hw.row({std::to_string(h.replicate), h.ok ? "ok" : "failed", f(h.step_size), f(h.acceptance_rate),
              std::to_string(h.nonfinite_rejections), std::to_string(h.samples)});
    }
    hw.close();
  }
  {
    files.push_back(dir / "summary.json");
    nlohmann::ordered_json j;
    for (const TaskOutput& t : summary.tasks) {
      j["ksd_lengthscale"][t.task] = t.ksd_lengthscale;
      j["mds_distortion"][t.task] = t.weight_mds.distortion;
      j["mds_function_distortion"][t.task] = t.function_mds.distortion;
    }
    j["warnings"] = summary.warnings;
    std::ofstream out(files.back());
    out << j.dump(2) << '\n';
  }
  {
    // Wall-clock values differ between runs, so they live apart from the deterministic outputs.
    files.push_back(dir / "timings.csv");
    CsvWriter w(files.back(), {"task", "algorithm", "hyper", "step_index", "replicate", "wall_time"});
    for (const HmcReferenceInfo& h : summary.hmc) {
      w.row({h.task, "hmc", "-", "0", std::to_string(h.replicate), format_double(h.wall_time, 6)});
    }
    for (const ResultRow& r : summary.rows) {
      w.row({r.cell.task, r.cell.algorithm, r.cell.hyper, std::to_string(r.cell.step_index), std::to_string(r.replicate),
             format_double(r.wall_time, 6)});
    }
    w.close();
  }
  {
    files.push_back(dir / "config.json");
    std::ofstream out(files.back());
    out << to_json(config).dump(2) << '\n';
  }
  return files;
}

}  // namespace bnn
