#include "bnn/harness/compare.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "bnn/harness/csv.hpp"

namespace bnn {

Histogram unit_histogram(const std::vector<double>& values, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("unit_histogram: bins must be positive");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) / static_cast<double>(bins));
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    const double c = std::clamp(v, 0.0, 1.0);
    const auto b = std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)));
    ++h.counts[b];
  }
  return h;
}

std::vector<ComparisonCell> picp_mcp_comparison(const std::vector<ComparisonInput>& cells, std::size_t min_replicates) {
  std::vector<ComparisonCell> out;
  for (const ComparisonInput& in : cells) {
    ComparisonCell c;
    c.input = in;
    const auto& p = in.picp_per_replicate;
    if (p.empty()) {
      c.warnings.push_back("no ok replicates");
      c.mcp = c.picp_std = c.picp_min = c.picp_max = std::nan("");
    } else {
      const double n = static_cast<double>(p.size());
      c.mcp = std::accumulate(p.begin(), p.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : p) ss += (v - c.mcp) * (v - c.mcp);
      c.picp_std = p.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      c.picp_min = *std::min_element(p.begin(), p.end());
      c.picp_max = *std::max_element(p.begin(), p.end());
    }
    if (p.size() < min_replicates) {
      c.warnings.push_back("only " + std::to_string(p.size()) + " replicates (< " + std::to_string(min_replicates) + ")");
    }
    double mae = 0.0;
    for (double v : in.ccp_per_x) mae += std::abs(v - in.level);
    c.ccp_mae = in.ccp_per_x.empty() ? std::nan("") : mae / static_cast<double>(in.ccp_per_x.size());
    c.picp_histogram = unit_histogram(p);
    c.ccp_histogram = unit_histogram(in.ccp_per_x);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ComparisonInput> load_comparison_inputs(const std::filesystem::path& dir, const std::string& task,
                                                    const std::string& algorithm) {
  using Key = std::tuple<std::string, std::string, std::size_t>;
  std::map<Key, ComparisonInput> cells;
  std::vector<Key> order;

  const CsvTable agg = read_csv(dir / "aggregates.csv");
  {
    const auto ct = agg.column("task"), ca = agg.column("algorithm"), ch = agg.column("hyper"),
               ci = agg.column("step_index"), cs = agg.column("step_size"), cl = agg.column("level");
    for (const auto& r : agg.rows) {
      if (r[ct] != task || (!algorithm.empty() && r[ca] != algorithm)) continue;
      ComparisonInput in;
      in.task = task;
      in.algorithm = r[ca];
      in.hyper = r[ch];
      in.step_index = std::stoul(r[ci]);
      in.step_size = parse_double(r[cs]);
      in.level = parse_double(r[cl]);
      Key k{in.algorithm, in.hyper, in.step_index};
      order.push_back(k);
      cells.emplace(k, std::move(in));
    }
  }
  const CsvTable res = read_csv(dir / "results.csv");
  {
    const auto ct = res.column("task"), ca = res.column("algorithm"), ch = res.column("hyper"),
               ci = res.column("step_index"), cp = res.column("picp"), cst = res.column("status");
    for (const auto& r : res.rows) {
      if (r[ct] != task || r[cst] != "ok") continue;
      auto it = cells.find(Key{r[ca], r[ch], std::stoul(r[ci])});
      if (it != cells.end()) it->second.picp_per_replicate.push_back(parse_double(r[cp]));
    }
  }
  const auto ccp_path = dir / ("ccp_" + task + ".csv");
  if (std::filesystem::exists(ccp_path)) {
    const CsvTable ccp = read_csv(ccp_path);
    const auto ca = ccp.column("algorithm"), ch = ccp.column("hyper"), ci = ccp.column("step_index"),
               cc = ccp.column("ccp");
    for (const auto& r : ccp.rows) {
      auto it = cells.find(Key{r[ca], r[ch], std::stoul(r[ci])});
      if (it != cells.end()) it->second.ccp_per_x.push_back(parse_double(r[cc]));
    }
  }
  std::vector<ComparisonInput> out;
  for (const Key& k : order) out.push_back(cells.at(k));
  return out;
}

std::vector<std::filesystem::path> write_comparison(const std::vector<ComparisonCell>& cells,
                                                    const std::filesystem::path& dir, const std::string& task) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files{dir / ("comparison_" + task + ".csv"),
                                           dir / ("comparison_hist_" + task + ".csv")};
  CsvWriter s(files[0], {"algorithm", "hyper", "step_index", "step_size", "level", "n_replicates", "mcp", "picp_std",
                         "picp_min", "picp_max", "ccp_mae"});
  CsvWriter h(files[1], {"algorithm", "hyper", "step_index", "step_size", "kind", "bin_lo", "bin_hi", "count"});
  for (const ComparisonCell& c : cells) {
    const ComparisonInput& in = c.input;
    const std::vector<std::string> key{in.algorithm, in.hyper, std::to_string(in.step_index), format_double(in.step_size)};
    auto row = key;
    row.insert(row.end(), {format_double(in.level), std::to_string(in.picp_per_replicate.size()), format_double(c.mcp),
                           format_double(c.picp_std), format_double(c.picp_min), format_double(c.picp_max),
                           format_double(c.ccp_mae)});
    s.row(row);
    for (const auto& [kind, hist] : {std::pair{"picp", &c.picp_histogram}, std::pair{"ccp", &c.ccp_histogram}}) {
      for (std::size_t b = 0; b < hist->counts.size(); ++b) {
        auto hr = key;
        hr.insert(hr.end(), {kind, format_double(hist->edges[b]), format_double(hist->edges[b + 1]),
                             std::to_string(hist->counts[b])});
        h.row(hr);
      }
    }
  }
  s.close();
  h.close();
  return files;
}

}  // namespace bnn
