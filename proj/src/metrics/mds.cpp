#include "bnn/metrics/mds.hpp"

#include <cmath>
#include <stdexcept>

#include "bnn/errors.hpp"
#include "bnn/metrics/mmd.hpp"

namespace bnn {

void DiscrepancyMatrix::validate() const {
  const Eigen::Index n = values.rows();
  if (values.cols() != n) throw DimensionError("DiscrepancyMatrix: matrix is not square");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw DimensionError("DiscrepancyMatrix: label count mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (values(i, i) != 0.0) throw std::invalid_argument("DiscrepancyMatrix: non-zero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(values(i, j)) || values(i, j) < 0.0) {
        throw std::invalid_argument("DiscrepancyMatrix: entries must be finite and non-negative");
      }
      if (std::abs(values(i, j) - values(j, i)) > 1e-10) throw std::invalid_argument("DiscrepancyMatrix: not symmetric");
    }
  }
}

DiscrepancyMatrix pairwise_mmd(const std::vector<SampleMatrix>& samples, std::vector<std::string> labels,
                               const KernelSpec& kernel) {
  if (samples.size() != labels.size()) throw DimensionError("pairwise_mmd: label count mismatch");
  const std::size_t n = samples.size();
  std::vector<double> self(n);
  for (std::size_t i = 0; i < n; ++i) self[i] = kernel_self_mean(samples[i], kernel);
  DiscrepancyMatrix out{std::move(labels), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = mmd_from_means(self[i], self[j], kernel_cross_mean(samples[i], samples[j], kernel));
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return out;
}

MdsEmbedding mds_embed(const DiscrepancyMatrix& matrix, std::size_t dim) {
  matrix.validate();
  if (dim == 0) throw std::invalid_argument("mds_embed: dim must be positive");
  const Eigen::Index n = matrix.values.rows();
  if (n == 0) throw std::invalid_argument("mds_embed: empty matrix");

  const Eigen::MatrixXd d2 = matrix.values.array().square().matrix();
  const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd b = -0.5 * j * d2 * j;
  b = 0.5 * (b + b.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) throw std::runtime_error("mds_embed: eigendecomposition failed");
  // Eigen returns ascending order.
  const Eigen::VectorXd values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  MdsEmbedding out;
  out.eigenvalues = values;
  const double scale = values.cwiseAbs().maxCoeff();
  const double tol = 1e-12 * std::max(scale, 1.0);
  double negative = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (values(i) < -tol) negative -= values(i);
  }
  const double total = values.cwiseAbs().sum();
  out.distortion = total > 0.0 ? negative / total : 0.0;
  if (negative > 0.0) {
    out.notes.push_back("negative eigenvalues truncated to zero; distortion " + std::to_string(out.distortion));
  }

  std::size_t positive = 0;
  while (positive < static_cast<std::size_t>(n) && values(static_cast<Eigen::Index>(positive)) > tol) ++positive;
  std::size_t used = dim;
  if (positive < dim) {
    used = positive;
    out.notes.push_back("embedding dimension reduced from " + std::to_string(dim) + " to " + std::to_string(positive));
  }

  out.coordinates = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(used));
  for (std::size_t c = 0; c < used; ++c) {
    Eigen::VectorXd v = vectors.col(static_cast<Eigen::Index>(c));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.coordinates.col(static_cast<Eigen::Index>(c)) = v * std::sqrt(values(static_cast<Eigen::Index>(c)));
  }
  return out;
}

}  // namespace bnn
