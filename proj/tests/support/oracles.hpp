#pragma once

// Independent reference computations shared by the unit tests and the acceptance binary.
// Nothing here calls into the library's numerical kernels.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "bnn/core/mlp.hpp"
#include "bnn/core/potential.hpp"
#include "bnn/core/posterior.hpp"

namespace oracle {

/// Diagonal Gaussian N(mean, diag(var)) as a potential with no data term.
class GaussianTarget final : public bnn::Potential {
 public:
  GaussianTarget(Eigen::VectorXd mean, Eigen::VectorXd var) : mean_(std::move(mean)), var_(std::move(var)) {}
  explicit GaussianTarget(std::size_t dim)
      : mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
        var_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))) {}

  std::size_t dim() const override { return static_cast<std::size_t>(mean_.size()); }
  std::size_t num_data() const override { return 1; }
  double value(const bnn::ParamVector& w) const override {
    const double log2pi = std::log(2.0 * M_PI);
    double u = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double r = w[i] - mean_[i];
      u += 0.5 * r * r / var_[i] + 0.5 * (log2pi + std::log(var_[i]));
    }
    return u;
  }
  bnn::ParamVector data_grad(const bnn::ParamVector& w, std::span<const std::size_t>) const override {
    return bnn::ParamVector::Zero(w.size());
  }
  bnn::ParamVector prior_grad(const bnn::ParamVector& w) const override {
    return ((w - mean_).array() / var_.array()).matrix();
  }
  Eigen::MatrixXd predict(const bnn::ParamVector& w, const Eigen::MatrixXd& inputs) const override {
    return Eigen::MatrixXd::Constant(inputs.rows(), 1, w[0]);
  }
  std::uint64_t fingerprint() const override { return 0x6761757373ULL; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd var_;
};

inline Eigen::VectorXd normal_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

/// Plain loops over the documented layout: per layer W (fan_in x fan_out, row-major) then bias.
inline std::vector<double> loop_forward(const std::vector<std::size_t>& sizes, const Eigen::VectorXd& params,
                                        const std::vector<double>& x) {
  std::vector<double> h = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    std::vector<double> next(out, 0.0);
    for (std::size_t j = 0; j < out; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < in; ++i) s += h[i] * params[static_cast<Eigen::Index>(off + i * out + j)];
      s += params[static_cast<Eigen::Index>(off + in * out + j)];
      next[j] = (l + 2 < sizes.size()) ? std::max(s, 0.0) : s;
    }
    off += in * out + out;
    h = std::move(next);
  }
  return h;
}

/// Signs of every hidden pre-activation (true when positive), in the loop_forward order.
inline std::vector<bool> relu_pattern(const std::vector<std::size_t>& sizes, const Eigen::VectorXd& params,
                                      const std::vector<double>& x) {
  std::vector<bool> pattern;
  std::vector<double> h = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 2 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    std::vector<double> next(out, 0.0);
    for (std::size_t j = 0; j < out; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < in; ++i) s += h[i] * params[static_cast<Eigen::Index>(off + i * out + j)];
      s += params[static_cast<Eigen::Index>(off + in * out + j)];
      pattern.push_back(s > 0.0);
      next[j] = std::max(s, 0.0);
    }
    off += in * out + out;
    h = std::move(next);
  }
  return pattern;
}

/// True when moving coordinate i by +-h flips some ReLU for some row of x, so that central
/// differences straddle a kink of U and are not a valid reference there.
inline bool crosses_kink(const std::vector<std::size_t>& sizes, const Eigen::VectorXd& w, const Eigen::MatrixXd& x,
                         Eigen::Index i, double h = 1e-5) {
  Eigen::VectorXd wp = w, wm = w;
  wp[i] += h;
  wm[i] -= h;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> xr(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) xr[static_cast<std::size_t>(c)] = x(r, c);
    const auto base = relu_pattern(sizes, w, xr);
    if (relu_pattern(sizes, wp, xr) != base || relu_pattern(sizes, wm, xr) != base) return true;
  }
  return false;
}

/// -sum_i log N(y_i; f(x_i), sigma^2 I) - log N(w; 0, I), one Gaussian log-density at a time.
inline double brute_potential(const std::vector<std::size_t>& sizes, const Eigen::VectorXd& params,
                              const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double sigma) {
  double u = 0.0;
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    std::vector<double> xi(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) xi[static_cast<std::size_t>(c)] = x(n, c);
    const auto f = loop_forward(sizes, params, xi);
    for (Eigen::Index m = 0; m < y.cols(); ++m) {
      const double r = y(n, m) - f[static_cast<std::size_t>(m)];
      u -= -0.5 * std::log(2.0 * M_PI * sigma * sigma) - r * r / (2.0 * sigma * sigma);
    }
  }
  for (Eigen::Index i = 0; i < params.size(); ++i) u -= -0.5 * std::log(2.0 * M_PI) - 0.5 * params[i] * params[i];
  return u;
}

/// Central differences of U at the listed coordinates.
inline Eigen::VectorXd fd_gradient(const bnn::Potential& p, const Eigen::VectorXd& w,
                                   const std::vector<Eigen::Index>& coords, double h = 1e-5) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(coords.size()));
  Eigen::VectorXd wp = w;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const Eigen::Index i = coords[k];
    wp[i] = w[i] + h;
    const double up = p.value(wp);
    wp[i] = w[i] - h;
    const double um = p.value(wp);
    wp[i] = w[i];
    g[static_cast<Eigen::Index>(k)] = (up - um) / (2.0 * h);
  }
  return g;
}

/// Conjugate linear regression with prior N(0, I): covariance (I + X^T X / s^2)^-1, mean Sigma X^T y / s^2.
struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline GaussianPosterior conjugate_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double sigma) {
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(d, d) + x.transpose() * x / (sigma * sigma);
  Eigen::MatrixXd cov = prec.inverse();
  Eigen::VectorXd mean = cov * x.transpose() * y / (sigma * sigma);
  return {mean, cov};
}

inline double energy_k(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.norm() + b.norm() - (a - b).norm();
}

/// Squared MMD between the empirical measure of all rows and the multiset `picked`, by double sums.
inline double naive_mmd2(const Eigen::MatrixXd& pts, const std::vector<std::size_t>& picked) {
  const Eigen::Index t = pts.rows();
  const double m = static_cast<double>(picked.size());
  double pp = 0.0, qq = 0.0, pq = 0.0;
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j < t; ++j) pp += energy_k(pts.row(i), pts.row(j));
  for (std::size_t a : picked)
    for (std::size_t b : picked)
      qq += energy_k(pts.row(static_cast<Eigen::Index>(a)), pts.row(static_cast<Eigen::Index>(b)));
  for (Eigen::Index i = 0; i < t; ++i)
    for (std::size_t a : picked) pq += energy_k(pts.row(i), pts.row(static_cast<Eigen::Index>(a)));
  const double td = static_cast<double>(t);
  return pp / (td * td) + qq / (m * m) - 2.0 * pq / (td * m);
}

/// Greedy trace by full recomputation of MMD^2 for every candidate. Candidates within rounding
/// of the best (1e-10 relative) count as tied and the smallest index wins.
inline std::vector<std::size_t> naive_thin(const Eigen::MatrixXd& pts, std::size_t m) {
  std::vector<std::size_t> picked;
  for (std::size_t step = 0; step < m; ++step) {
    std::size_t best = 0;
    double best_val = 0.0;
    for (Eigen::Index j = 0; j < pts.rows(); ++j) {
      auto trial = picked;
      trial.push_back(static_cast<std::size_t>(j));
      const double v = naive_mmd2(pts, trial);
      if (j == 0 || v < best_val - 1e-10 * (1.0 + std::abs(best_val))) {
        best_val = v;
        best = static_cast<std::size_t>(j);
      } else if (v < best_val) {
        best_val = v;  // tied: keep the smaller index but track the lower value
      }
    }
    picked.push_back(best);
  }
  return picked;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson on average ranks).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Standard error of the mean of a correlated series, by non-overlapping batch means.
inline double batch_means_se(const std::vector<double>& x, std::size_t batches = 50) {
  const std::size_t len = x.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += x[b * len + i];
    means[b] = s / static_cast<double>(len);
  }
  const double mu = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
  double v = 0.0;
  for (double m : means) v += (m - mu) * (m - mu);
  v /= static_cast<double>(batches - 1);
  return std::sqrt(v / static_cast<double>(batches));
}

inline double mean_of(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance_of(const std::vector<double>& x) {
  const double mu = mean_of(x);
  double v = 0.0;
  for (double a : x) v += (a - mu) * (a - mu);
  return v / static_cast<double>(x.size() - 1);
}

}  // namespace oracle
