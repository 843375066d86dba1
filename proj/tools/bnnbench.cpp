// Command-line front end: generate datasets, run the sweep, build PICP/MCP tables, re-embed MMD matrices.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bnn/datasets/io.hpp"
#include "bnn/harness/benchmark.hpp"
#include "bnn/harness/compare.hpp"
#include "bnn/harness/config.hpp"
#include "bnn/metrics/mds.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out;
  std::size_t workers = 0;
  std::string scale = "desk";
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config (keys override the preset)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--scale", o.scale, "preset: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", o.seed, "master seed");
}

bnn::ExperimentConfig resolve(const CommonOptions& o) {
  const bnn::Scale scale = bnn::parse_scale(o.scale);
  bnn::ExperimentConfig c = o.config_path.empty() ? bnn::preset(scale) : bnn::load_config(o.config_path, scale);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.workers > 0) c.workers = o.workers;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

int cmd_generate(const CommonOptions& o) {
  const bnn::ExperimentConfig c = resolve(o);
  const fs::path dir = c.output_dir / "datasets";
  for (bnn::TaskId id : c.tasks) {
    const bnn::ReplicateBundle b = bnn::generate(c.task(id), c.replicates, bnn::task_data_seed(c.seed, id));
    const auto files = bnn::write_bundle(b, dir);
    std::cout << bnn::task_name(id) << ": " << files.size() << " files in " << dir.string() << '\n';
  }
  return 0;
}

int cmd_run(const CommonOptions& o) {
  const bnn::ExperimentConfig c = resolve(o);
  const bnn::BenchmarkSummary s = bnn::run_benchmark(c);
  std::size_t diverged = 0;
  for (const auto& r : s.rows) diverged += r.ok ? 0 : 1;
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << s.rows.size() << " runs (" << diverged << " diverged), " << s.aggregates.size() << " cells -> "
            << c.output_dir.string() << '\n';
  return 0;
}

int cmd_compare(const CommonOptions& o, const std::string& in, const std::string& task, const std::string& algorithm) {
  const fs::path out = o.out.empty() ? fs::path(in) : fs::path(o.out);
  const auto inputs = bnn::load_comparison_inputs(in, task, algorithm);
  if (inputs.empty()) {
    std::cerr << "error: no cells for task " << task << " in " << in << '\n';
    return 1;
  }
  const auto cells = bnn::picp_mcp_comparison(inputs);
  for (const auto& c : cells) {
    for (const auto& w : c.warnings) std::cerr << "warning: " << c.input.algorithm << " step " << c.input.step_index << ": " << w << '\n';
  }
  for (const auto& f : bnn::write_comparison(cells, out, task)) std::cout << f.string() << '\n';
  return 0;
}

int cmd_mds(const CommonOptions& o, const std::string& in, const std::string& task, bool function_space,
            std::size_t dim) {
  const fs::path out = o.out.empty() ? fs::path(in) : fs::path(o.out);
  const std::string suffix = (function_space ? "function_" : "") + task;
  const auto [cells, matrix] = bnn::read_discrepancy_csv(fs::path(in) / ("mmd_matrix_" + suffix + ".csv"));
  const bnn::MdsEmbedding e = bnn::mds_embed(matrix, dim);
  for (const auto& n : e.notes) std::cerr << "warning: " << n << '\n';
  fs::create_directories(out);
  const fs::path path = out / ("mds_" + suffix + ".csv");
  bnn::write_mds_csv(path, cells, matrix, e);
  std::cout << path.string() << " (distortion " << e.distortion << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark of posterior approximations for Bayesian neural network regression"};
  app.require_subcommand(1);

  CommonOptions gen_opts, run_opts, cmp_opts, mds_opts;
  auto* gen = app.add_subcommand("generate", "write the synthetic datasets (CSV + JSON manifest)");
  add_common(gen, gen_opts);
  auto* run = app.add_subcommand("run", "run the benchmark sweep");
  add_common(run, run_opts);

  std::string cmp_in = "results", cmp_task = "AF1", cmp_alg;
  auto* cmp = app.add_subcommand("compare", "PICP histogram versus MCP and CCP per cell");
  add_common(cmp, cmp_opts);
  cmp->add_option("--in", cmp_in, "benchmark output directory");
  cmp->add_option("--task", cmp_task, "task id");
  cmp->add_option("--algorithm", cmp_alg, "restrict to one algorithm");

  std::string mds_in = "results", mds_task = "AF1";
  bool mds_function = false;
  std::size_t mds_dim = 2;
  auto* mds = app.add_subcommand("mds", "classical MDS of a saved MMD matrix");
  add_common(mds, mds_opts);
  mds->add_option("--in", mds_in, "benchmark output directory");
  mds->add_option("--task", mds_task, "task id");
  mds->add_flag("--function", mds_function, "use the function-space matrix");
  mds->add_option("--dim", mds_dim, "embedding dimension")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_opts);
    if (*run) return cmd_run(run_opts);
    if (*cmp) return cmd_compare(cmp_opts, cmp_in, bnn::task_name(bnn::parse_task_id(cmp_task)), cmp_alg);
    if (*mds) return cmd_mds(mds_opts, mds_in, bnn::task_name(bnn::parse_task_id(mds_task)), mds_function, mds_dim);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
