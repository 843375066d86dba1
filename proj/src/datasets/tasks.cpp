#include "bnn/datasets/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>


namespace bnn {

namespace {

constexpr std::uint64_t kTeacherKey = hash_string("teacher");
constexpr std::uint64_t kTestKey = hash_string("test");
constexpr std::uint64_t kTrainKey = hash_string("train");

std::vector<std::size_t> with_io(const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{1};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

}  // namespace

MlpArchitecture TaskSpec::architecture() const { return MlpArchitecture(with_io(hidden_widths)); }

TaskSpec task_spec(TaskId id) {
  TaskSpec t;
  t.id = id;
  switch (id) {
    case TaskId::af1:
      t.noise_sigma = 0.2;
      t.train_size = 100;
      t.test_size = 200;
      t.train_support = {{-3.0, 3.0}};
      t.test_support = {{-3.0, 3.0}};
      t.ood = false;
      t.hidden_widths = {100, 100};
      break;
    case TaskId::af2:
      t.noise_sigma = 0.25;
      t.train_size = 100;
      t.test_size = 200;
      t.train_support = {{-4.0, -1.0}, {1.0, 4.0}};
      t.test_support = {{-4.0, 4.0}};
      t.ood = true;
      t.hidden_widths = {50, 50};
      break;
    case TaskId::af3:
      t.noise_sigma = 0.25;
      t.train_size = 82;
      t.test_size = 200;
      t.train_support = {{-6.0, -2.0}, {2.0, 6.0}};
      t.inner_count = 2;
      t.inner_support = {{-2.0, 2.0}};
      t.test_support = {{-6.0, 6.0}};
      t.ood = true;
      t.hidden_widths = {50, 50};
      break;
    case TaskId::af4:
      t.noise_sigma = 0.02;
      t.train_size = 120;
      t.test_size = 120;
      t.train_support = {{-10.0, -6.0}, {6.0, 10.0}, {14.0, 18.0}};
      t.test_support = {{-12.0, 22.0}};
      t.ood = true;
      t.hidden_widths = {100, 100, 100};
      t.teacher_hidden_widths = {100, 100, 100};
      break;
  }
  return t;
}

std::string task_name(TaskId id) {
  switch (id) {
    case TaskId::af1: return "AF1";
    case TaskId::af2: return "AF2";
    case TaskId::af3: return "AF3";
    case TaskId::af4: return "AF4";
  }
  return "?";
}

TaskId parse_task_id(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c != '#') key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (key == "AF1") return TaskId::af1;
  if (key == "AF2") return TaskId::af2;
  if (key == "AF3") return TaskId::af3;
  if (key == "AF4") return TaskId::af4;
  throw std::invalid_argument("unknown task id '" + std::string(name) + "'");
}

double latent_truth(const TaskSpec& task, double x, const ParamVector* teacher) {
  switch (task.id) {
    case TaskId::af1: return std::cos(2.0 * x) + std::sin(x);
    case TaskId::af2: return task.af2_latent == Af2Latent::cubic ? 0.1 * x * x * x : 0.1 * x * x;
    case TaskId::af3: return -(1.0 + x) * std::sin(1.2 * x);
    case TaskId::af4: {
      if (teacher == nullptr) throw std::invalid_argument("latent_truth: AF4 needs the teacher parameters");
      const MlpArchitecture arch(with_io(task.teacher_hidden_widths));
      Eigen::VectorXd in(1);
      in(0) = x;
      return forward(arch, *teacher, in)(0);
    }
  }
  throw std::invalid_argument("latent_truth: unknown task");
}

double uniform_on(const std::vector<Interval>& support, Rng& rng) {
  if (support.empty()) throw std::invalid_argument("uniform_on: empty support");
  double total = 0.0;
  for (const Interval& i : support) total += i.hi - i.lo;
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng);
  for (const Interval& i : support) {
    const double len = i.hi - i.lo;
    if (r < len) return i.lo + r;
    r -= len;
  }
  return support.back().hi;
}

bool in_support(const std::vector<Interval>& support, double x) {
  for (const Interval& i : support) {
    if (i.lo <= x && x <= i.hi) return true;
  }
  return false;
}

std::optional<ParamVector> make_teacher(const TaskSpec& task, std::uint64_t seed) {
  if (task.id != TaskId::af4) return std::nullopt;
  const MlpArchitecture arch(with_io(task.teacher_hidden_widths));
  Rng rng(split_seed(seed, {kTeacherKey}));
  return standard_normal(static_cast<Eigen::Index>(arch.parameter_count()), rng);
}

namespace {

RegressionDataset sample_dataset(const TaskSpec& task, const std::vector<double>& xs, Rng& rng,
                                 const ParamVector* teacher) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd x(n, 1);
  Eigen::MatrixXd y(n, 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = xs[static_cast<std::size_t>(i)];
    y(i, 0) = latent_truth(task, x(i, 0), teacher) + task.noise_sigma * noise(rng);
  }
  return RegressionDataset(std::move(x), std::move(y));
}

}  // namespace

RegressionDataset make_training_set(const TaskSpec& task, std::size_t replicate, std::uint64_t seed,
                                    const ParamVector* teacher) {
  Rng rng(split_seed(seed, {kTrainKey, replicate}));
  std::vector<double> xs;
  xs.reserve(task.train_size);
  const std::size_t outer = task.train_size - task.inner_count;
  for (std::size_t i = 0; i < outer; ++i) xs.push_back(uniform_on(task.train_support, rng));
  for (std::size_t i = 0; i < task.inner_count; ++i) xs.push_back(uniform_on(task.inner_support, rng));
  return sample_dataset(task, xs, rng, teacher);
}

TestSet make_test_set(const TaskSpec& task, std::uint64_t seed, const ParamVector* teacher) {
  Rng rng(split_seed(seed, {kTestKey}));
  std::vector<double> xs;
  xs.reserve(task.test_size);
  for (std::size_t i = 0; i < task.test_size; ++i) xs.push_back(uniform_on(task.test_support, rng));
  TestSet out;
  out.data = sample_dataset(task, xs, rng, teacher);
  out.latent.resize(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) out.latent(static_cast<Eigen::Index>(i)) = latent_truth(task, xs[i], teacher);
  return out;
}

Eigen::MatrixXd make_function_grid(const TaskSpec& task, std::size_t points) {
  if (points < 2) throw std::invalid_argument("make_function_grid: need at least 2 points");
  double lo = task.test_support.front().lo;
  double hi = task.test_support.front().hi;
  for (const Interval& i : task.test_support) {
    lo = std::min(lo, i.lo);
    hi = std::max(hi, i.hi);
  }
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(points), 1);
  grid.col(0) = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(points), lo, hi);
  return grid;
}

ReplicateBundle generate(const TaskSpec& task, std::size_t n_replicates, std::uint64_t seed) {
  if (task.input_dim != 1) throw std::invalid_argument("generate: only scalar inputs are supported");
  if (task.inner_count > task.train_size) throw std::invalid_argument("generate: inner_count exceeds train_size");
  ReplicateBundle b;
  b.task = task;
  b.seed = seed;
  b.teacher = make_teacher(task, seed);
  const ParamVector* teacher = b.teacher ? &*b.teacher : nullptr;
  b.training_sets.reserve(n_replicates);
  for (std::size_t r = 0; r < n_replicates; ++r) b.training_sets.push_back(make_training_set(task, r, seed, teacher));
  b.test = make_test_set(task, seed, teacher);
  b.function_grid = make_function_grid(task);
  return b;
}

}  // namespace bnn
