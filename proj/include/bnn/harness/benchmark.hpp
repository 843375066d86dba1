#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bnn/harness/config.hpp"
#include "bnn/metrics/mds.hpp"

namespace bnn {

/// One (algorithm, extra hyperparameter, step size) combination of a task's sweep.
struct CellKey {
  std::string task;
  std::string algorithm;
  std::string hyper;            // "-", "M=10", "p=0.1"
  std::size_t hyper_index = 0;  // extra_index * n_steps + step_index
  std::size_t step_index = 0;
  double step_size = 0.0;
  double extra = 0.0;           // cycles or dropout rate; 0 when unused

  /// "sgld/eps=1e-08", "csgld/M=10/eps=1e-08".
  std::string label() const;
};

struct ResultRow {
  CellKey cell;
  std::size_t replicate = 0;
  bool ok = false;
  double q2 = 0.0;
  double picp = 0.0;
  double mmd_weight = 0.0;
  double mmd_function = 0.0;
  double ksd = 0.0;
  double wall_time = 0.0;
  std::vector<double> picp_per_level;     // aligned with ExperimentConfig::band_levels()
  std::vector<std::uint8_t> indicators;   // per test point, at the target level
  std::string error;                      // why the row diverged
};

struct AggregateRow {
  CellKey cell;
  std::size_t n_ok = 0;
  std::size_t n_diverged = 0;
  double level = 0.0;
  double mcp = 0.0;
  double ccp_mae = 0.0;
  double picp_std = 0.0;
  double q2_mean = 0.0;
  double q2_std = 0.0;
  double mmd_weight_mean = 0.0;
  double mmd_function_mean = 0.0;
  double ksd_mean = 0.0;
  std::vector<double> mcp_per_level;
  std::vector<double> ccp_per_x;
};

struct HmcReferenceInfo {
  std::string task;
  std::size_t replicate = 0;
  bool ok = false;
  double step_size = 0.0;
  double acceptance_rate = 0.0;
  std::size_t nonfinite_rejections = 0;
  std::size_t samples = 0;
  bool from_cache = false;
  double wall_time = 0.0;
  std::string error;
};

struct TaskOutput {
  std::string task;
  double ksd_lengthscale = 0.0;
  /// Rows of the discrepancy matrices: the HMC reference (algorithm "hmc") then every ok cell of replicate 0.
  std::vector<CellKey> matrix_cells;
  DiscrepancyMatrix weight_matrix;
  DiscrepancyMatrix function_matrix;
  MdsEmbedding weight_mds;
  MdsEmbedding function_mds;
  Eigen::VectorXd test_inputs;
};

struct BenchmarkSummary {
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<HmcReferenceInfo> hmc;
  std::vector<TaskOutput> tasks;
  std::vector<std::string> warnings;
};

/// Runs `fn(i)` for i in [0, n) on `workers` threads. Each index runs exactly once;
/// the first exception is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Seed of one run: split_seed(master, {hash(task), hash(algorithm), hyper_index, replicate}).
std::uint64_t run_seed(std::uint64_t master, const std::string& task, const std::string& algorithm,
                       std::size_t hyper_index, std::size_t replicate);

/// Bundle seed of a task: split_seed(master, {hash(task), hash("data")}). Shared by `run` and `generate`.
std::uint64_t task_data_seed(std::uint64_t master, TaskId task);

/// Cells of one task in sweep order: algorithms in config order, then extra values, then step sizes.
std::vector<CellKey> enumerate_cells(const ExperimentConfig& config, TaskId task);

/// Full sweep. Writes every CSV to config.output_dir when `write_files` is set.
BenchmarkSummary run_benchmark(const ExperimentConfig& config, bool write_files = true);

/// Writes the CSV outputs of a summary; returns the files written.
std::vector<std::filesystem::path> write_outputs(const ExperimentConfig& config, const BenchmarkSummary& summary);

/// mmd_matrix CSV: label, algorithm, hyper, step_index, step_size, then one column per label.
void write_discrepancy_csv(const std::filesystem::path& path, const std::vector<CellKey>& cells,
                           const DiscrepancyMatrix& matrix);
std::pair<std::vector<CellKey>, DiscrepancyMatrix> read_discrepancy_csv(const std::filesystem::path& path);
/// mds CSV: label, algorithm, hyper, step_index, step_size, x, y (zeros for dropped dimensions).
void write_mds_csv(const std::filesystem::path& path, const std::vector<CellKey>& cells, const DiscrepancyMatrix& matrix,
                   const MdsEmbedding& embedding);

/// Aggregates over ok rows of each cell.
std::vector<AggregateRow> aggregate(const ExperimentConfig& config, const std::vector<ResultRow>& rows);

}  // namespace bnn
