#include "grpsel/model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace grpsel {

GroupStructure::GroupStructure(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) {
    throw std::invalid_argument("GroupStructure: at least one group required");
  }
  offsets_.resize(sizes_.size() + 1);
  offsets_[0] = 0;
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (sizes_[k] < 1) {
      throw std::invalid_argument("GroupStructure: group " + std::to_string(k) +
                                  " has non-positive size");
    }
    offsets_[k + 1] = offsets_[k] + sizes_[k];
  }
}

int GroupStructure::max_size() const {
  return *std::max_element(sizes_.begin(), sizes_.end());
}

int GroupStructure::min_size() const {
  return *std::min_element(sizes_.begin(), sizes_.end());
}

GroupedDesign::GroupedDesign(Eigen::MatrixXd matrix, GroupStructure groups)
    : matrix_(std::move(matrix)), groups_(std::move(groups)) {
  if (matrix_.rows() < 1) {
    throw std::invalid_argument("GroupedDesign: need at least one row");
  }
  if (matrix_.cols() != groups_.total_dim()) {
    throw std::invalid_argument(
        "GroupedDesign: matrix has " + std::to_string(matrix_.cols()) +
        " columns but groups sum to " + std::to_string(groups_.total_dim()));
  }
}

GroupedCoefficients::GroupedCoefficients(Eigen::VectorXd values,
                                         GroupStructure groups)
    : values_(std::move(values)), groups_(std::move(groups)) {
  if (values_.size() != groups_.total_dim()) {
    throw std::invalid_argument(
        "GroupedCoefficients: vector length " + std::to_string(values_.size()) +
        " does not match group total " + std::to_string(groups_.total_dim()));
  }
}

GroupedCoefficients GroupedCoefficients::zero(const GroupStructure& groups) {
  return GroupedCoefficients(Eigen::VectorXd::Zero(groups.total_dim()), groups);
}

std::vector<int> GroupedCoefficients::active_set(double tol) const {
  std::vector<int> active;
  for (int k = 0; k < groups_.num_groups(); ++k) {
    if (group_norm(k) > tol) active.push_back(k);
  }
  return active;
}

Eigen::VectorXd group_norms(const GroupedCoefficients& beta) {
  const int p = beta.groups().num_groups();
  Eigen::VectorXd norms(p);
  for (int k = 0; k < p; ++k) norms[k] = beta.group_norm(k);
  return norms;
}

Eigen::MatrixXd extract_submatrix(const GroupedDesign& design,
                                  const std::vector<int>& group_indices) {
  const GroupStructure& g = design.groups();
  int cols = 0;
  for (int k : group_indices) {
    if (k < 0 || k >= g.num_groups()) {
      throw std::invalid_argument("extract_submatrix: group index " +
                                  std::to_string(k) + " out of range");
    }
    cols += g.size(k);
  }
  Eigen::MatrixXd out(design.n(), cols);
  int at = 0;
  for (int k : group_indices) {
    out.middleCols(at, g.size(k)) = design.group_block(k);
    at += g.size(k);
  }
  return out;
}

Reparameterization reparameterize(const GroupedDesign& design,
                                  const GroupMetric& metric) {
  const GroupStructure& g = design.groups();
  const int p = g.num_groups();
  if (static_cast<int>(metric.matrices.size()) != p) {
    throw std::invalid_argument("reparameterize: metric has " +
                                std::to_string(metric.matrices.size()) +
                                " matrices for " + std::to_string(p) + " groups");
  }
  std::vector<Eigen::MatrixXd> factors(static_cast<std::size_t>(p));
  Eigen::MatrixXd transformed(design.n(), g.total_dim());
  for (int k = 0; k < p; ++k) {
    const Eigen::MatrixXd& R = metric.matrices[static_cast<std::size_t>(k)];
    const int dk = g.size(k);
    if (R.rows() != dk || R.cols() != dk) {
      throw std::invalid_argument("reparameterize: R for group " +
                                  std::to_string(k) + " is not " +
                                  std::to_string(dk) + "x" + std::to_string(dk));
    }
    if (!R.isApprox(R.transpose(), 1e-10)) {
      throw std::invalid_argument("reparameterize: R for group " +
                                  std::to_string(k) + " is not symmetric");
    }
    // R_k = d_k Q_k' Q_k with Q_k the upper-triangular Cholesky factor of R_k/d_k.
    Eigen::LLT<Eigen::MatrixXd> llt(Eigen::MatrixXd(R / static_cast<double>(dk)));
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("reparameterize: R for group " +
                                  std::to_string(k) +
                                  " is not positive definite");
    }
    Eigen::MatrixXd Q = llt.matrixU();
    factors[static_cast<std::size_t>(k)] = Q;
    // X_k* = X_k Q_k^{-1}, solved as (Q_k^{-T} X_k')'.
    transformed.middleCols(g.offset(k), dk) =
        Q.triangularView<Eigen::Upper>()
            .transpose()
            .solve(design.group_block(k).transpose())
            .transpose();
  }
  return Reparameterization{GroupedDesign(std::move(transformed), g),
                            std::move(factors)};
}

GroupedCoefficients Reparameterization::to_original(
    const GroupedCoefficients& beta_star) const {
  const GroupStructure& g = design.groups();
  Eigen::VectorXd out(g.total_dim());
  for (int k = 0; k < g.num_groups(); ++k) {
    out.segment(g.offset(k), g.size(k)) =
        factors[static_cast<std::size_t>(k)]
            .triangularView<Eigen::Upper>()
            .solve(beta_star.group(k));
  }
  return GroupedCoefficients(std::move(out), g);
}

GroupedCoefficients Reparameterization::to_transformed(
    const GroupedCoefficients& beta) const {
  const GroupStructure& g = design.groups();
  Eigen::VectorXd out(g.total_dim());
  for (int k = 0; k < g.num_groups(); ++k) {
    out.segment(g.offset(k), g.size(k)) =
        factors[static_cast<std::size_t>(k)] * beta.group(k);
  }
  return GroupedCoefficients(std::move(out), g);
}

double general_penalty(const GroupedCoefficients& beta,
                       const GroupMetric& metric, double lambda) {
  double total = 0.0;
  for (int k = 0; k < beta.groups().num_groups(); ++k) {
    const auto bk = beta.group(k);
    total += std::sqrt(bk.dot(metric.matrices[static_cast<std::size_t>(k)] * bk));
  }
  return lambda * total;
}

double zero_tolerance(const Eigen::VectorXd& y) {
  const double scale = y.norm() / std::sqrt(static_cast<double>(y.size()));
  return 1e-8 * std::max(1.0, scale);
}

Standardization standardize(const GroupedDesign& design,
                            const Eigen::VectorXd& y) {
  const Eigen::MatrixXd& X = design.matrix();
  const int n = design.n();
  const int m = static_cast<int>(X.cols());
  Eigen::VectorXd center = X.colwise().mean();
  Eigen::MatrixXd Xc = X.rowwise() - center.transpose();
  Eigen::VectorXd scale(m);
  for (int j = 0; j < m; ++j) {
    const double sd = std::sqrt(Xc.col(j).squaredNorm() / std::max(1, n - 1));
    scale[j] = sd > 0 ? sd : 1.0;
    Xc.col(j) /= scale[j];
  }
  const double y_center = y.mean();
  return Standardization{GroupedDesign(std::move(Xc), design.groups()),
                         y.array() - y_center, std::move(center),
                         std::move(scale), y_center};
}

}  // namespace grpsel
