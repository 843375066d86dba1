#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnn/core/mlp.hpp"
#include "bnn/metrics/kernels.hpp"

namespace bnn {

/// Pairwise discrepancies between labelled approximations.
struct DiscrepancyMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;

  /// Square, labelled, symmetric to 1e-10, non-negative, exactly zero diagonal.
  void validate() const;
};

/// MMD between every pair of samples; the diagonal is set to 0.
/// Self terms are computed once per sample.
DiscrepancyMatrix pairwise_mmd(const std::vector<SampleMatrix>& samples, std::vector<std::string> labels,
                               const KernelSpec& kernel = {});

struct MdsEmbedding {
  Eigen::MatrixXd coordinates;  // n x dim (dim may be reduced)
  Eigen::VectorXd eigenvalues;  // all eigenvalues of B, descending
  double distortion = 0.0;      // sum |negative eigenvalues| / sum |eigenvalues|
  std::vector<std::string> notes;
};

/// Classical MDS: B = -1/2 J (D o D) J, top `dim` eigenpairs, coordinates v * sqrt(lambda).
/// Each eigenvector is signed so that its largest-magnitude entry is positive.
MdsEmbedding mds_embed(const DiscrepancyMatrix& matrix, std::size_t dim = 2);

}  // namespace bnn
