#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bnn/core/mlp.hpp"
#include "bnn/core/posterior.hpp"
#include "bnn/rng.hpp"

namespace bnn {

enum class TaskId { af1, af2, af3, af4 };

struct Interval {
  double lo;
  double hi;
};

enum class Af2Latent { cubic, quadratic };

struct TaskSpec {
  TaskId id = TaskId::af1;
  double noise_sigma = 0.2;
  std::size_t input_dim = 1;
  std::size_t train_size = 100;
  std::size_t test_size = 200;
  std::vector<Interval> train_support;
  std::vector<Interval> test_support;
  bool ood = false;
  /// Hidden widths of the surrogate network.
  std::vector<std::size_t> hidden_widths;
  /// AF3 only: the last `inner_count` training inputs are drawn from `inner_support`.
  std::size_t inner_count = 0;
  std::vector<Interval> inner_support;
  Af2Latent af2_latent = Af2Latent::cubic;
  /// AF4 only: hidden widths of the teacher network.
  std::vector<std::size_t> teacher_hidden_widths;

  MlpArchitecture architecture() const;
};

TaskSpec task_spec(TaskId id);
std::string task_name(TaskId id);
/// Accepts "AF1", "af1", "AF#1".
TaskId parse_task_id(std::string_view name);

/// Test inputs, noisy test targets and noiseless values, shared by all replicates of a bundle.
struct TestSet {
  RegressionDataset data;
  Eigen::VectorXd latent;
};

struct ReplicateBundle {
  TaskSpec task;
  std::uint64_t seed = 0;
  std::vector<RegressionDataset> training_sets;
  TestSet test;
  /// Evenly spaced inputs over the test support, used for function-space comparisons.
  Eigen::MatrixXd function_grid;
  std::optional<ParamVector> teacher;
};

inline constexpr std::size_t kFunctionGridSize = 200;

/// Noiseless latent function. AF4 needs the bundle's teacher parameters.
double latent_truth(const TaskSpec& task, double x, const ParamVector* teacher = nullptr);

/// Uniform draw on a union of intervals (component chosen proportionally to length).
double uniform_on(const std::vector<Interval>& support, Rng& rng);
bool in_support(const std::vector<Interval>& support, double x);

/// Pieces of `generate`, each seeded independently from the bundle seed so replicates can be
/// produced in any order.
std::optional<ParamVector> make_teacher(const TaskSpec& task, std::uint64_t seed);
RegressionDataset make_training_set(const TaskSpec& task, std::size_t replicate, std::uint64_t seed,
                                    const ParamVector* teacher);
TestSet make_test_set(const TaskSpec& task, std::uint64_t seed, const ParamVector* teacher);
Eigen::MatrixXd make_function_grid(const TaskSpec& task, std::size_t points = kFunctionGridSize);

ReplicateBundle generate(const TaskSpec& task, std::size_t n_replicates, std::uint64_t seed);

}  // namespace bnn
