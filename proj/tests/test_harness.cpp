#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "bnn/harness/benchmark.hpp"
#include "bnn/harness/compare.hpp"
#include "bnn/harness/config.hpp"
#include "bnn/harness/csv.hpp"
#include "bnn/rng.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace bnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bnnbench_h_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small enough to run in seconds: narrow net, short chains, short HMC.
ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig c = desk_preset();
  c.tasks = {TaskId::af1};
  c.replicates = 2;
  c.seed = 11;
  c.hidden_widths = std::vector<std::size_t>{5};
  c.algorithms = {AlgorithmGrid{"sgld", {1e-4}, {}}};
  c.iterations = 300;
  c.burn_in = 100;
  c.chain_stride = 1;
  c.thin_target = 20;
  c.map_iterations = 200;
  c.hmc.chains = 2;
  c.hmc.iterations = 40;
  c.hmc.burn_in = 20;
  c.hmc.leapfrog_steps = 20;
  c.hmc.pilot_iterations = 10;
  c.hmc.max_rounds = 10;
  c.median_subsample = 100;
  c.output_dir = out;
  c.use_hmc_cache = false;
  return c;
}

}  // namespace

// ---------------------------------------------------------------- configuration

TEST(Config, PresetsAreValid) {
  EXPECT_NO_THROW(desk_preset().validate());
  EXPECT_NO_THROW(paper_preset().validate());
  const ExperimentConfig d = desk_preset();
  EXPECT_EQ(d.replicates, 20u);
  EXPECT_EQ(d.hidden_widths, (std::vector<std::size_t>{20, 20}));
  EXPECT_EQ(d.iterations, 20000u);
  EXPECT_EQ(d.thin_target, 500u);
  EXPECT_EQ(d.ensemble_size, 50u);
  EXPECT_EQ(d.hmc.leapfrog_steps, 1000u);
  EXPECT_EQ(d.algorithms.size(), known_algorithms().size());
  EXPECT_EQ(paper_preset().replicates, 500u);
}

TEST(Config, DefaultGrids) {
  const auto g = default_step_grid("sgld");
  ASSERT_EQ(g.size(), 10u);
  EXPECT_NEAR(g.front(), 1e-8, 1e-20);
  EXPECT_NEAR(g.back(), 1e-5, 1e-17);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], std::pow(1e3, 1.0 / 9.0), 1e-12);
  EXPECT_NEAR(default_step_grid("sghmc_cv").back(), 1e-6, 1e-18);
  EXPECT_NEAR(default_step_grid("swag").front(), 1e-7, 1e-19);
  EXPECT_NEAR(default_step_grid("mc_dropout").back(), 1e-1, 1e-13);
  EXPECT_THROW(default_step_grid("adam"), std::invalid_argument);
}

TEST(Config, JsonOverridesAndValidation) {
  const nlohmann::json j = nlohmann::json::parse(R"({
    "tasks": ["AF2", "af#3"], "replicates": 4, "seed": 99, "hidden_widths": [8, 8],
    "algorithms": [{"name": "csgld", "step_sizes": [1e-6, 1e-5], "cycles": [10]},
                   {"name": "mc_dropout", "dropout_rates": [0.2]}],
    "hmc": {"leapfrog_steps": 50}, "af2_latent": "quadratic", "workers": 3
  })");
  const ExperimentConfig c = apply_json(desk_preset(), j);
  EXPECT_EQ(c.tasks, (std::vector<TaskId>{TaskId::af2, TaskId::af3}));
  EXPECT_EQ(c.replicates, 4u);
  EXPECT_EQ(c.seed, 99u);
  ASSERT_EQ(c.algorithms.size(), 2u);
  EXPECT_EQ(c.algorithms[0].step_sizes, (std::vector<double>{1e-6, 1e-5}));
  EXPECT_EQ(c.algorithms[0].extra, (std::vector<double>{10}));
  EXPECT_EQ(c.algorithms[1].extra, (std::vector<double>{0.2}));
  EXPECT_EQ(c.algorithms[1].step_sizes.size(), 10u);
  EXPECT_EQ(c.hmc.leapfrog_steps, 50u);
  EXPECT_EQ(c.hmc.chains, 3u);
  EXPECT_EQ(c.task(TaskId::af2).af2_latent, Af2Latent::quadratic);
  EXPECT_EQ(c.task(TaskId::af3).hidden_widths, (std::vector<std::size_t>{8, 8}));
  EXPECT_NO_THROW(c.validate());

  EXPECT_THROW(apply_json(desk_preset(), nlohmann::json::parse(R"({"replicate": 3})")), std::invalid_argument);
  EXPECT_THROW(apply_json(desk_preset(), nlohmann::json::parse(R"({"hmc": {"leapfrog": 3}})")), std::invalid_argument);
  ExperimentConfig bad = desk_preset();
  bad.algorithms = {AlgorithmGrid{"sgld", {-1e-5}, {}}};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad.algorithms = {AlgorithmGrid{"bogus", {1e-5}, {}}};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad.algorithms = {AlgorithmGrid{"mc_dropout", {1e-3}, {1.0}}};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Config, RoundTripsThroughJson) {
  ExperimentConfig c = desk_preset();
  c.seed = 5;
  c.replicates = 3;
  const ExperimentConfig back = apply_json(desk_preset(), nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(Config, BandLevels) {
  const ExperimentConfig c = desk_preset();
  const auto levels = c.band_levels();
  ASSERT_EQ(levels.size(), 19u);  // 0.95 is already on the grid
  EXPECT_NEAR(levels.front(), 0.05, 1e-12);
  EXPECT_NEAR(levels.back(), 0.95, 1e-12);
}

// ---------------------------------------------------------------- seeds and scheduling

TEST(Seeds, RunSeedsAreDistinctAndStable) {
  std::map<std::uint64_t, int> seen;
  for (const char* alg : {"sgld", "sghmc", "swag"})
    for (std::size_t h = 0; h < 10; ++h)
      for (std::size_t r = 0; r < 20; ++r) ++seen[run_seed(1, "AF1", alg, h, r)];
  EXPECT_EQ(seen.size(), 600u);
  EXPECT_EQ(run_seed(1, "AF1", "sgld", 3, 4), run_seed(1, "AF1", "sgld", 3, 4));
  EXPECT_NE(run_seed(1, "AF1", "sgld", 3, 4), run_seed(2, "AF1", "sgld", 3, 4));
  EXPECT_EQ(run_seed(1, "AF1", "sgld", 3, 4),
            split_seed(1, {hash_string("AF1"), hash_string("sgld"), 3, 4}));
}

TEST(ParallelFor, RunsEveryIndexOnceAndPropagatesErrors) {
  for (std::size_t workers : {1u, 3u, 16u}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, workers, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  EXPECT_THROW(parallel_for(10, 4, [](std::size_t i) { if (i == 7) throw std::runtime_error("boom"); }),
               std::runtime_error);
  EXPECT_NO_THROW(parallel_for(0, 4, [](std::size_t) { FAIL(); }));
}

TEST(Cells, EnumerationOrderAndCount) {
  ExperimentConfig c = desk_preset();
  c.algorithms = {AlgorithmGrid{"sgld", {1e-6, 1e-5}, {}}, AlgorithmGrid{"csgld", {1e-6, 1e-5}, {10, 100}}};
  const auto cells = enumerate_cells(c, TaskId::af1);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0].label(), "sgld/eps=1e-06");
  EXPECT_EQ(cells[2].hyper, "M=10");
  EXPECT_EQ(cells[5].hyper, "M=100");
  EXPECT_EQ(cells[5].hyper_index, 3u);
  EXPECT_EQ(cells[5].step_index, 1u);
}

// ---------------------------------------------------------------- end-to-end

TEST(Benchmark, CardinalityAndAggregation) {
  const ExperimentConfig c = tiny_config(scratch("card"));
  const BenchmarkSummary s = run_benchmark(c);
  ASSERT_EQ(s.rows.size(), 2u);
  ASSERT_EQ(s.aggregates.size(), 1u);
  const CsvTable results = read_csv(c.output_dir / "results.csv");
  const CsvTable agg = read_csv(c.output_dir / "aggregates.csv");
  EXPECT_EQ(results.rows.size(), 2u);
  EXPECT_EQ(agg.rows.size(), 1u);
  const AggregateRow& a = s.aggregates[0];
  EXPECT_EQ(a.n_ok + a.n_diverged, 2u);
  double picp = 0.0;
  std::size_t ok = 0;
  for (const ResultRow& r : s.rows) {
    if (!r.ok) continue;
    picp += r.picp;
    ++ok;
  }
  ASSERT_GT(ok, 0u);
  EXPECT_NEAR(a.mcp, picp / static_cast<double>(ok), 1e-12);
  for (const char* f : {"coverage_curves_AF1.csv", "ccp_AF1.csv", "mmd_matrix_AF1.csv", "mds_AF1.csv", "hmc_AF1.csv",
                        "summary.json", "timings.csv"})
    EXPECT_TRUE(fs::exists(c.output_dir / f)) << f;
}

TEST(Benchmark, CompletenessOverGrids) {
  ExperimentConfig c = tiny_config(scratch("complete"));
  c.algorithms = {AlgorithmGrid{"sgld", {1e-5, 1e-4}, {}}, AlgorithmGrid{"mc_dropout", {1e-2}, {0.1, 0.3}},
                  AlgorithmGrid{"swag", {1e-5}, {}}};
  c.ensemble_iterations = 50;
  c.dropout_samples = 20;
  c.swag_iterations = 50;
  c.swag_samples = 20;
  c.swag_rank = 5;
  const BenchmarkSummary s = run_benchmark(c, false);
  EXPECT_EQ(s.rows.size(), (2u + 2u + 1u) * 2u);
  EXPECT_EQ(s.aggregates.size(), 5u);
  for (const AggregateRow& a : s.aggregates) EXPECT_EQ(a.n_ok + a.n_diverged, 2u);
}

TEST(Benchmark, DivergedCellsAreRecordedNotFatal) {
  ExperimentConfig c = tiny_config(scratch("diverge"));
  c.algorithms = {AlgorithmGrid{"sgld", {1e3}, {}}};
  const BenchmarkSummary s = run_benchmark(c);
  ASSERT_EQ(s.rows.size(), 2u);
  for (const ResultRow& r : s.rows) {
    EXPECT_FALSE(r.ok);
    EXPECT_FALSE(r.error.empty());
  }
  EXPECT_EQ(s.aggregates[0].n_diverged, 2u);
  const CsvTable results = read_csv(c.output_dir / "results.csv");
  EXPECT_EQ(results.rows[0][results.column("status")], "diverged");
}

TEST(Benchmark, OutputsIndependentOfWorkersAndReruns) {
  ExperimentConfig a = tiny_config(scratch("det1"));
  a.algorithms = {AlgorithmGrid{"sgld", {1e-5, 1e-4}, {}}, AlgorithmGrid{"sghmc", {1e-5}, {}}};
  ExperimentConfig b = a;
  b.output_dir = scratch("det2");
  b.workers = 4;
  ExperimentConfig again = a;
  again.output_dir = scratch("det3");
  run_benchmark(a);
  run_benchmark(b);
  run_benchmark(again);
  for (const char* f : {"results.csv", "aggregates.csv", "ccp_AF1.csv", "mmd_matrix_AF1.csv", "mds_AF1.csv",
                        "coverage_curves_AF1.csv", "hmc_AF1.csv"}) {
    EXPECT_EQ(slurp(a.output_dir / f), slurp(b.output_dir / f)) << f;
    EXPECT_EQ(slurp(a.output_dir / f), slurp(again.output_dir / f)) << f;
  }
}

TEST(Benchmark, HmcCacheReproducesReference) {
  ExperimentConfig c = tiny_config(scratch("cache"));
  c.use_hmc_cache = true;
  const BenchmarkSummary first = run_benchmark(c);
  const std::string before = slurp(c.output_dir / "results.csv");
  const BenchmarkSummary second = run_benchmark(c);
  for (const HmcReferenceInfo& h : first.hmc) EXPECT_FALSE(h.from_cache);
  for (const HmcReferenceInfo& h : second.hmc) EXPECT_TRUE(h.from_cache);
  EXPECT_EQ(before, slurp(c.output_dir / "results.csv"));
}

TEST(Benchmark, HmcReferenceMeetsAcceptanceFloor) {
  ExperimentConfig c = tiny_config(scratch("floor"));
  // a single one-step pilot round leaves the step far too large for the full chains
  c.hmc.initial_step = 0.01;
  c.hmc.pilot_iterations = 1;
  c.hmc.max_rounds = 1;
  c.hmc.accept_low = 0.9;
  c.hmc.accept_high = 1.0;
  c.replicates = 4;
  const BenchmarkSummary s = run_benchmark(c);
  for (const HmcReferenceInfo& h : s.hmc) {
    EXPECT_TRUE(h.ok);
    EXPECT_GE(h.acceptance_rate, 0.9) << "replicate " << h.replicate;
    EXPECT_LE(h.step_size, 0.005) << "replicate " << h.replicate;
  }
}

TEST(Benchmark, HmcCacheEntryBelowFloorIsRecomputed) {
  ExperimentConfig c = tiny_config(scratch("stale"));
  c.use_hmc_cache = true;
  const BenchmarkSummary first = run_benchmark(c);
  const fs::path manifest = c.output_dir / "hmc_cache" / "AF1_r1.json";
  ASSERT_TRUE(fs::exists(manifest));
  nlohmann::ordered_json m;
  std::ifstream(manifest) >> m;
  m["acceptance_rate"] = 0.5;
  std::ofstream(manifest) << m.dump();
  const BenchmarkSummary second = run_benchmark(c);
  ASSERT_EQ(second.hmc.size(), 2u);
  EXPECT_TRUE(second.hmc[0].from_cache);
  EXPECT_FALSE(second.hmc[1].from_cache);
  EXPECT_EQ(second.hmc[1].acceptance_rate, first.hmc[1].acceptance_rate);
}

TEST(Benchmark, DiscrepancyCsvRoundTrip) {
  const ExperimentConfig c = tiny_config(scratch("matrix"));
  const BenchmarkSummary s = run_benchmark(c);
  const auto [cells, m] = read_discrepancy_csv(c.output_dir / "mmd_matrix_AF1.csv");
  ASSERT_EQ(cells.size(), s.tasks[0].matrix_cells.size());
  EXPECT_EQ(cells[0].algorithm, "hmc");
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(m.labels, s.tasks[0].weight_matrix.labels);
  EXPECT_TRUE(m.values.isApprox(s.tasks[0].weight_matrix.values, 1e-10));
}

// ---------------------------------------------------------------- PICP versus MCP

TEST(Compare, PointMassWhenReplicatesAgree) {
  ComparisonInput in;
  in.picp_per_replicate = std::vector<double>(25, 0.8);
  in.ccp_per_x = {0.8, 0.8};
  in.level = 0.95;
  const auto out = picp_mcp_comparison({in});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].mcp, 0.8);
  EXPECT_NEAR(out[0].picp_std, 0.0, 1e-14);
  std::size_t nonzero = 0, total = 0;
  for (std::size_t k = 0; k < out[0].picp_histogram.counts.size(); ++k) {
    const std::size_t n = out[0].picp_histogram.counts[k];
    total += n;
    if (n == 0) continue;
    ++nonzero;
    EXPECT_LE(out[0].picp_histogram.edges[k], 0.8);
    EXPECT_GE(out[0].picp_histogram.edges[k + 1], 0.8);
  }
  EXPECT_EQ(nonzero, 1u);
  EXPECT_EQ(total, 25u);
  EXPECT_TRUE(out[0].warnings.empty());
}

TEST(Compare, TwoReplicatesWarnButStillReport) {
  ComparisonInput in;
  in.picp_per_replicate = {0.9, 1.0};
  in.ccp_per_x = {1.0, 0.9};
  const auto out = picp_mcp_comparison({in});
  EXPECT_NEAR(out[0].mcp, 0.95, 1e-15);
  EXPECT_FALSE(out[0].warnings.empty());
  std::size_t total = 0;
  for (std::size_t n : out[0].picp_histogram.counts) total += n;
  EXPECT_EQ(total, 2u);
  const Histogram h = unit_histogram({0.0, 1.0, 1.0}, 4);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{1, 0, 0, 2}));
}

TEST(Compare, PicpSpreadExceedsCalibrationErrorOnConjugateModel) {
  const auto sim = scenario::conjugate_coverage(200, 0.95, 21);
  ComparisonInput in;
  in.level = 0.95;
  in.picp_per_replicate = sim.report.picp_per_replicate;
  in.ccp_per_x = sim.report.ccp_per_x;
  const auto out = picp_mcp_comparison({in});
  EXPECT_NEAR(out[0].mcp, sim.report.mcp, 1e-12);
  EXPECT_NEAR(out[0].picp_std, std::sqrt(oracle::variance_of(sim.report.picp_per_replicate)), 1e-12);
  EXPECT_GT(out[0].picp_std, std::abs(out[0].mcp - 0.95));
}

TEST(Compare, LoadsBenchmarkOutputs) {
  ExperimentConfig c = tiny_config(scratch("cmp"));
  c.replicates = 3;
  const BenchmarkSummary s = run_benchmark(c);
  const auto inputs = load_comparison_inputs(c.output_dir, "AF1");
  ASSERT_EQ(inputs.size(), 1u);
  EXPECT_EQ(inputs[0].algorithm, "sgld");
  EXPECT_EQ(inputs[0].picp_per_replicate.size(), s.aggregates[0].n_ok);
  const auto cells = picp_mcp_comparison(inputs);
  EXPECT_NEAR(cells[0].mcp, s.aggregates[0].mcp, 1e-9);
  const auto files = write_comparison(cells, c.output_dir, "AF1");
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f));
}
