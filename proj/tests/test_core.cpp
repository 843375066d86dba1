#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "bnn/core/linear_model.hpp"
#include "bnn/core/map.hpp"
#include "bnn/core/minibatch.hpp"
#include "bnn/core/mlp.hpp"
#include "bnn/core/posterior.hpp"
#include "bnn/datasets/tasks.hpp"
#include "bnn/errors.hpp"
#include "support/oracles.hpp"

using namespace bnn;

namespace {

RegressionDataset toy_data(std::size_t n, std::size_t in, std::mt19937_64& rng) {
  return {oracle::normal_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in), rng),
          oracle::normal_matrix(static_cast<Eigen::Index>(n), 1, rng)};
}

std::vector<Eigen::Index> all_coords(Eigen::Index d) {
  std::vector<Eigen::Index> c(static_cast<std::size_t>(d));
  std::iota(c.begin(), c.end(), Eigen::Index{0});
  return c;
}

}  // namespace

TEST(Architecture, ParameterCounts) {
  EXPECT_EQ(MlpArchitecture({1, 100, 100, 1}).parameter_count(), 10401u);
  EXPECT_EQ(MlpArchitecture({1, 50, 50, 1}).parameter_count(), 2u * 50 + 51 * 50 + 51);
  EXPECT_EQ(MlpArchitecture({1, 100, 100, 100, 1}).parameter_count(), 20501u);
  EXPECT_EQ(MlpArchitecture({3, 4, 2}).parameter_count(), (3u + 1) * 4 + (4u + 1) * 2);
}

TEST(Architecture, RejectsMissingHiddenLayerAndZeroWidth) {
  EXPECT_THROW(MlpArchitecture({1, 1}), std::invalid_argument);
  EXPECT_THROW(MlpArchitecture({1, 0, 1}), std::invalid_argument);
}

TEST(Architecture, FlattenRoundTripIsExact) {
  std::mt19937_64 rng(1);
  for (const auto& sizes : std::vector<std::vector<std::size_t>>{{1, 2, 1}, {2, 5, 3, 1}, {1, 20, 20, 1}, {4, 7, 7, 7, 2}}) {
    const MlpArchitecture arch(sizes);
    const Eigen::VectorXd v = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
    std::vector<Eigen::MatrixXd> ws;
    std::vector<Eigen::VectorXd> bs;
    for (const auto& view : unflatten(arch, v)) {
      ws.emplace_back(view.weights);
      bs.emplace_back(view.bias.transpose());
    }
    const Eigen::VectorXd back = flatten(arch, ws, bs);
    EXPECT_TRUE((back.array() == v.array()).all());
  }
}

TEST(Architecture, LayoutIsWeightsThenBiasRowMajor) {
  const MlpArchitecture arch({2, 3, 1});
  EXPECT_EQ(arch.layer(0).weight_offset, 0u);
  EXPECT_EQ(arch.layer(0).bias_offset, 6u);
  EXPECT_EQ(arch.layer(1).weight_offset, 9u);
  EXPECT_EQ(arch.layer(1).bias_offset, 12u);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(13, 0, 12);
  const auto views = unflatten(arch, v);
  EXPECT_EQ(views[0].weights(0, 1), 1.0);
  EXPECT_EQ(views[0].weights(1, 0), 3.0);
  EXPECT_EQ(views[0].bias(2), 8.0);
}

TEST(Forward, ZeroParamsGiveZeroOutput) {
  const MlpArchitecture arch({2, 5, 5, 1});
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
  EXPECT_EQ(forward(arch, w, Eigen::Vector2d(3.0, -7.0))[0], 0.0);
}

TEST(Forward, NegativePreactivationLeavesOnlyOutputBias) {
  const MlpArchitecture arch({1, 1, 1});
  Eigen::VectorXd w(4);
  w << 1.0, -1.0, 5.0, 0.25;  // W1, b1, W2, b2
  EXPECT_EQ(forward(arch, w, Eigen::VectorXd::Zero(1))[0], 0.25);
}

TEST(Forward, MatchesLoopOracle) {
  std::mt19937_64 rng(2);
  for (const auto& sizes : std::vector<std::vector<std::size_t>>{{1, 2, 1}, {3, 8, 4, 2}, {1, 50, 50, 1}}) {
    const MlpArchitecture arch(sizes);
    for (int rep = 0; rep < 5; ++rep) {
      const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
      const Eigen::VectorXd x = oracle::normal_vector(static_cast<Eigen::Index>(sizes.front()), rng);
      const auto want = oracle::loop_forward(sizes, w, std::vector<double>(x.data(), x.data() + x.size()));
      const Eigen::VectorXd got = forward(arch, w, x);
      for (std::size_t m = 0; m < want.size(); ++m) {
        EXPECT_NEAR(got[static_cast<Eigen::Index>(m)], want[m], 1e-12 * std::max(1.0, std::abs(want[m])));
      }
    }
  }
}

TEST(Forward, DimensionMismatchRejected) {
  const MlpArchitecture arch({1, 3, 1});
  EXPECT_THROW(forward(arch, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(1)), DimensionError);
  EXPECT_THROW(forward(arch, Eigen::VectorXd::Zero(10), Eigen::VectorXd::Zero(2)), DimensionError);
}

TEST(Potential, ZeroResidualLeavesOnlyConstants) {
  const MlpArchitecture arch({1, 4, 1});
  const double sigma = 0.3;
  // w = 0 predicts 0, so a single target of 0 has zero residual.
  const PosteriorSpec post(arch, RegressionDataset(Eigen::MatrixXd::Constant(1, 1, 0.7), Eigen::MatrixXd::Zero(1, 1)),
                           sigma);
  const double d = static_cast<double>(arch.parameter_count());
  const double want = 0.5 * std::log(2.0 * M_PI * sigma * sigma) + 0.5 * d * std::log(2.0 * M_PI);
  EXPECT_NEAR(post.value(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))), want, 1e-12);
}

TEST(Potential, DoublingResidualIsQuadratic) {
  const MlpArchitecture arch({1, 4, 1});
  const double sigma = 0.5;
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const PosteriorSpec p1(arch, RegressionDataset(x, Eigen::MatrixXd::Constant(1, 1, 0.8)), sigma);
  const PosteriorSpec p2(arch, RegressionDataset(x, Eigen::MatrixXd::Constant(1, 1, 1.6)), sigma);
  EXPECT_NEAR(p2.value(w) - p1.value(w), (1.6 * 1.6 - 0.8 * 0.8) / (2.0 * sigma * sigma), 1e-12);
}

TEST(Potential, MatchesPerPointLogDensityOracle) {
  std::mt19937_64 rng(3);
  for (const auto& sizes : std::vector<std::vector<std::size_t>>{{1, 2, 1}, {2, 6, 3, 1}, {1, 20, 20, 1}}) {
    const MlpArchitecture arch(sizes);
    const RegressionDataset data = toy_data(17, sizes.front(), rng);
    const PosteriorSpec post(arch, data, 0.4);
    const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
    const double want = oracle::brute_potential(sizes, w, data.inputs, data.targets, 0.4);
    EXPECT_NEAR(post.value(w), want, 1e-10 * std::abs(want));
    EXPECT_NEAR(post.negative_log_likelihood(w) + post.negative_log_prior(w), want, 1e-10 * std::abs(want));
  }
}

TEST(Gradient, MatchesFiniteDifferencesOnTwoUnitNetwork) {
  std::mt19937_64 rng(4);
  const MlpArchitecture arch({1, 2, 1});
  for (int rep = 0; rep < 50; ++rep) {
    const PosteriorSpec post(arch, toy_data(10, 1, rng), 0.5);
    const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
    const Eigen::VectorXd fd = oracle::fd_gradient(post, w, all_coords(w.size()));
    EXPECT_LE((post.grad(w) - fd).norm(), 1e-5 * fd.norm()) << "case " << rep;
  }
}

TEST(Gradient, MatchesFiniteDifferencesOnDeeperNetworks) {
  std::mt19937_64 rng(5);
  for (const auto& sizes : std::vector<std::vector<std::size_t>>{{2, 5, 3, 1}, {1, 20, 20, 1}, {1, 8, 8, 8, 1}}) {
    const MlpArchitecture arch(sizes);
    for (int rep = 0; rep < 10; ++rep) {
      const PosteriorSpec post(arch, toy_data(12, sizes.front(), rng), 0.3);
      const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng, 0.5);
      const Eigen::VectorXd fd = oracle::fd_gradient(post, w, all_coords(w.size()));
      EXPECT_LE((post.grad(w) - fd).norm(), 1e-5 * fd.norm());
    }
  }
}

TEST(Gradient, ZeroResidualLeavesPriorTerm) {
  std::mt19937_64 rng(6);
  const MlpArchitecture arch({1, 5, 1});
  const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
  const Eigen::MatrixXd x = oracle::normal_matrix(8, 1, rng);
  const PosteriorSpec post(arch, RegressionDataset(x, forward_batch(arch, w, x)), 0.2);
  const Eigen::VectorXd g = post.grad(w);
  const auto bias = static_cast<Eigen::Index>(arch.layer(1).bias_offset);
  EXPECT_NEAR(g[bias], w[bias], 1e-12);
  EXPECT_LE((g - w).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gradient, LinearInData) {
  std::mt19937_64 rng(7);
  const MlpArchitecture arch({1, 6, 1});
  const RegressionDataset d1 = toy_data(9, 1, rng), d2 = toy_data(5, 1, rng);
  Eigen::MatrixXd x(14, 1), y(14, 1);
  x << d1.inputs, d2.inputs;
  y << d1.targets, d2.targets;
  const PosteriorSpec p1(arch, d1, 0.3), p2(arch, d2, 0.3), p12(arch, RegressionDataset(x, y), 0.3);
  const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
  const Eigen::VectorXd sum = p1.grad(w) + p2.grad(w) - w;
  EXPECT_LE((p12.grad(w) - sum).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, sum.cwiseAbs().maxCoeff()));
}

TEST(Gradient, ValueAndGradAgreesWithSeparateCalls) {
  std::mt19937_64 rng(8);
  const MlpArchitecture arch({1, 7, 7, 1});
  const PosteriorSpec post(arch, toy_data(11, 1, rng), 0.3);
  const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
  Eigen::VectorXd g;
  const double u = post.value_and_grad(w, g);
  EXPECT_NEAR(u, post.value(w), 1e-10 * std::abs(u));
  EXPECT_LE((g - post.grad(w)).norm(), 1e-12 * g.norm());
}

TEST(Minibatch, DrawsDistinctIndicesInRange) {
  MinibatchSampler s(40, {12, 9});
  std::vector<int> counts(40, 0);
  for (int k = 0; k < 2000; ++k) {
    const auto b = s.next();
    ASSERT_EQ(b.size(), 12u);
    std::set<std::size_t> uniq(b.begin(), b.end());
    EXPECT_EQ(uniq.size(), 12u);
    for (std::size_t i : b) {
      ASSERT_LT(i, 40u);
      ++counts[i];
    }
  }
  // Each index is drawn with probability 12/40 per batch: 600 expected, sd about 20.5.
  for (int c : counts) EXPECT_NEAR(c, 600, 5 * 20.5);
}

TEST(Minibatch, RejectsBatchLargerThanData) { EXPECT_THROW(MinibatchSampler(5, {6, 0}), std::invalid_argument); }

TEST(StochasticGrad, FullBatchEqualsExactGradient) {
  std::mt19937_64 rng(9);
  const MlpArchitecture arch({1, 10, 10, 1});
  const PosteriorSpec post(arch, toy_data(30, 1, rng), 0.3);
  const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
  MinibatchSampler s(30, {30, 1});
  const Eigen::VectorXd g = stochastic_grad(post, w, s);
  const Eigen::VectorXd exact = post.grad(w);
  EXPECT_LE((g - exact).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, exact.cwiseAbs().maxCoeff()));
}

TEST(StochasticGrad, VarianceReducedAtAnchorEqualsExactGradient) {
  std::mt19937_64 rng(10);
  const MlpArchitecture arch({1, 10, 1});
  const PosteriorSpec post(arch, toy_data(30, 1, rng), 0.3);
  const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
  const auto vr = VarianceReductionState::anchor_at(post, w, 0);
  MinibatchSampler s(30, {4, 2});
  const Eigen::VectorXd exact = post.grad(w);
  for (int k = 0; k < 5; ++k) {
    const Eigen::VectorXd g = stochastic_grad(post, w, s, &vr);
    EXPECT_LE((g - exact).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, exact.cwiseAbs().maxCoeff()));
  }
  EXPECT_TRUE((vr.anchor_full_grad().array() == exact.array()).all());
}

TEST(StochasticGrad, PlainEstimatorIsUnbiased) {
  std::mt19937_64 rng(11);
  const MlpArchitecture arch({1, 3, 1});
  const PosteriorSpec post(arch, toy_data(50, 1, rng), 0.5);
  const Eigen::VectorXd w = oracle::normal_vector(static_cast<Eigen::Index>(arch.parameter_count()), rng);
  MinibatchSampler s(50, {8, 3});
  const int n = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(w.size()), sq = Eigen::VectorXd::Zero(w.size());
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd g = stochastic_grad(post, w, s);
    sum += g;
    sq += g.cwiseAbs2();
  }
  const Eigen::VectorXd mean = sum / n;
  const Eigen::VectorXd var = (sq / n - mean.cwiseAbs2()) * n / (n - 1.0);
  const Eigen::VectorXd exact = post.grad(w);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    EXPECT_LE(std::abs(mean[i] - exact[i]), 3.0 * std::sqrt(var[i] / n) + 1e-12) << "coordinate " << i;
  }
}

TEST(StochasticGrad, AnchorFromAnotherPosteriorIsAContractError) {
  std::mt19937_64 rng(12);
  const MlpArchitecture arch({1, 3, 1});
  const PosteriorSpec a(arch, toy_data(10, 1, rng), 0.5);
  const PosteriorSpec b(arch, toy_data(10, 1, rng), 0.5);
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
  const auto vr = VarianceReductionState::anchor_at(a, w, 0);
  MinibatchSampler s(10, {2, 0});
  EXPECT_THROW(stochastic_grad(b, w, s, &vr), ContractError);
}

TEST(Map, RecoversRidgeSolutionOnLinearModel) {
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd x = oracle::normal_matrix(60, 3, rng);
  const Eigen::VectorXd y = x * Eigen::Vector3d(0.5, -1.0, 2.0) + oracle::normal_vector(60, rng, 0.3);
  const LinearRegressionPosterior post(RegressionDataset(x, y), 0.3);
  OptimizerConfig opt;
  opt.iterations = 5000;
  opt.init_seed = 4;
  const MapResult r = train_map(post, opt);
  const auto truth = oracle::conjugate_posterior(x, y, 0.3);
  EXPECT_LE((r.params - truth.mean).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Map, ZeroIterationsReturnsInitialization) {
  std::mt19937_64 rng(14);
  const MlpArchitecture arch({1, 4, 1});
  const PosteriorSpec post(arch, toy_data(10, 1, rng), 0.3);
  OptimizerConfig opt;
  opt.iterations = 0;
  opt.init_seed = 77;
  const MapResult r = train_map(post, opt);
  EXPECT_TRUE((r.params.array() == prior_draw(post.dim(), 77).array()).all());
  EXPECT_EQ(r.final_potential, r.initial_potential);
}

TEST(Map, ImprovesPotentialOnAf1AndIsDeterministic) {
  const TaskSpec task = task_spec(TaskId::af1);
  const RegressionDataset data = make_training_set(task, 0, 99, nullptr);
  const PosteriorSpec post(MlpArchitecture({1, 20, 20, 1}), data, task.noise_sigma);
  OptimizerConfig opt;
  opt.iterations = 500;
  opt.init_seed = 3;
  const MapResult a = train_map(post, opt);
  const MapResult b = train_map(post, opt);
  EXPECT_LE(a.final_potential, a.initial_potential);
  EXPECT_LT(a.final_potential, 0.5 * a.initial_potential);
  EXPECT_TRUE((a.params.array() == b.params.array()).all());
}

namespace {

class NanAfterOrigin final : public Potential {
 public:
  std::size_t dim() const override { return 2; }
  std::size_t num_data() const override { return 1; }
  double value(const ParamVector& w) const override {
    return w.norm() > 0.5 ? std::numeric_limits<double>::quiet_NaN() : w.squaredNorm();
  }
  ParamVector data_grad(const ParamVector& w, std::span<const std::size_t>) const override {
    return ParamVector::Zero(w.size());
  }
  ParamVector prior_grad(const ParamVector&) const override { return ParamVector::Constant(2, -1.0); }
  Eigen::MatrixXd predict(const ParamVector&, const Eigen::MatrixXd& x) const override {
    return Eigen::MatrixXd::Zero(x.rows(), 1);
  }
  std::uint64_t fingerprint() const override { return 1; }
};

}  // namespace

TEST(Map, NonFinitePotentialRaisesDivergenceWithIteration) {
  NanAfterOrigin p;
  OptimizerConfig opt;
  opt.iterations = 1000;
  opt.initial_step = 0.1;
  opt.final_step = 0.1;
  try {
    train_map(p, opt, ParamVector::Zero(2));
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.iteration(), 0u);
    EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos);
  }
}
