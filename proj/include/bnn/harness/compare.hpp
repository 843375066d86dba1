#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace bnn {

struct ComparisonInput {
  std::string task;
  std::string algorithm;
  std::string hyper;
  std::size_t step_index = 0;
  double step_size = 0.0;
  double level = 0.95;
  std::vector<double> picp_per_replicate;
  std::vector<double> ccp_per_x;
};

struct Histogram {
  std::vector<double> edges;         // bins + 1 edges over [0, 1]
  std::vector<std::size_t> counts;   // the last bin is closed on the right
};

Histogram unit_histogram(const std::vector<double>& values, std::size_t bins = 20);

struct ComparisonCell {
  ComparisonInput input;
  double mcp = 0.0;       // mean of the PICPs
  double picp_std = 0.0;  // sample standard deviation across replicates
  double picp_min = 0.0;
  double picp_max = 0.0;
  double ccp_mae = 0.0;
  Histogram picp_histogram;
  Histogram ccp_histogram;
  std::vector<std::string> warnings;
};

/// PICP spread versus the single MCP value, per cell. Fewer than `min_replicates`
/// replicates produces a warning but the histograms are still built.
std::vector<ComparisonCell> picp_mcp_comparison(const std::vector<ComparisonInput>& cells,
                                                std::size_t min_replicates = 20);

/// Reads results.csv, aggregates.csv and ccp_<task>.csv from a benchmark output directory.
/// Only ok rows contribute. An empty `algorithm` selects every algorithm.
std::vector<ComparisonInput> load_comparison_inputs(const std::filesystem::path& dir, const std::string& task,
                                                    const std::string& algorithm = "");

/// Writes comparison_<task>.csv (summary) and comparison_hist_<task>.csv (histogram bins).
std::vector<std::filesystem::path> write_comparison(const std::vector<ComparisonCell>& cells,
                                                    const std::filesystem::path& dir, const std::string& task);

}  // namespace bnn
