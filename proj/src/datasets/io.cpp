#include "bnn/datasets/io.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "bnn/harness/csv.hpp"

namespace bnn {

namespace {

std::vector<std::string> dataset_header(std::size_t d, bool with_latent) {
  std::vector<std::string> h;
  for (std::size_t i = 1; i <= d; ++i) h.push_back("x" + std::to_string(i));
  h.emplace_back("y");
  if (with_latent) h.emplace_back("latent");
  return h;
}

void write_dataset(const RegressionDataset& data, const Eigen::VectorXd* latent, const std::filesystem::path& path) {
  const auto d = static_cast<std::size_t>(data.inputs.cols());
  CsvWriter w(path, dataset_header(d, latent != nullptr));
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) row.push_back(format_double(data.inputs(i, c), 17));
    row.push_back(format_double(data.targets(i, 0), 17));
    if (latent) row.push_back(format_double((*latent)(i), 17));
    w.row(row);
  }
  w.close();
}

}  // namespace

std::vector<std::filesystem::path> write_bundle(const ReplicateBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string name = task_name(bundle.task.id);
  std::vector<std::filesystem::path> files;
  for (std::size_t r = 0; r < bundle.training_sets.size(); ++r) {
    files.push_back(dir / (name + "_train_" + std::to_string(r) + ".csv"));
    write_dataset(bundle.training_sets[r], nullptr, files.back());
  }
  files.push_back(dir / (name + "_test.csv"));
  write_dataset(bundle.test.data, &bundle.test.latent, files.back());

  nlohmann::ordered_json m;
  m["task"] = name;
  m["seed"] = bundle.seed;
  m["noise_sigma"] = bundle.task.noise_sigma;
  m["input_dim"] = bundle.task.input_dim;
  m["n_train"] = bundle.task.train_size;
  m["n_test"] = bundle.task.test_size;
  m["n_replicates"] = bundle.training_sets.size();
  m["ood"] = bundle.task.ood;
  if (bundle.task.id == TaskId::af2) m["af2_latent"] = bundle.task.af2_latent == Af2Latent::cubic ? "cubic" : "quadratic";
  files.push_back(dir / (name + "_manifest.json"));
  std::ofstream out(files.back());
  if (!out) throw std::runtime_error("cannot write " + files.back().string());
  out << m.dump(2) << '\n';
  return files;
}

RegressionDataset read_dataset_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t y_col = t.column("y");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(y_col));
  Eigen::MatrixXd y(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    for (std::size_t c = 0; c < y_col; ++c) x(i, static_cast<Eigen::Index>(c)) = parse_double(row[c]);
    y(i, 0) = parse_double(row[y_col]);
  }
  return RegressionDataset(std::move(x), std::move(y));
}

}  // namespace bnn
