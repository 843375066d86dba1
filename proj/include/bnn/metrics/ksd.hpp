#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "bnn/core/mlp.hpp"
#include "bnn/core/potential.hpp"

namespace bnn {

/// s_p(w) = grad log p(Y|X,w) p(w) = -grad U(w).
using ScoreOracle = std::function<ParamVector(const ParamVector&)>;

ScoreOracle score_oracle(const Potential& potential);

/// Langevin Stein kernel built on the IMQ base kernel k = (1 + ||w - w'||^2 / l^2)^(-1/2):
///   k_p = <grad_w, grad_w'> k + <s(w), grad_w' k> + <s(w'), grad_w k> + <s(w), s(w')> k
/// with the trace term d u^(-3/2) / l^2 - 3 u^(-5/2) r^2 / l^4, u = 1 + r^2 / l^2.
double stein_kernel(std::span<const double> w, std::span<const double> w_prime, std::span<const double> score_w,
                    std::span<const double> score_w_prime, double lengthscale);

double stein_kernel(const ParamVector& w, const ParamVector& w_prime, const ScoreOracle& score, double lengthscale);

/// KSD = sqrt(max(0, mean over all ordered pairs of k_p)) (V-statistic).
/// Throws std::domain_error naming the first sample whose score is not finite.
double ksd(const SampleMatrix& samples, const ScoreOracle& score, double lengthscale);

/// Same, with scores already evaluated (row i of `scores` is s_p at row i of `samples`).
double ksd_from_scores(const SampleMatrix& samples, const SampleMatrix& scores, double lengthscale);

/// Median of the pairwise Euclidean distances over a subsample of at most
/// `subsample_size` rows, drawn without replacement using `seed`.
double median_heuristic(const SampleMatrix& pooled, std::size_t subsample_size, std::uint64_t seed);

}  // namespace bnn
