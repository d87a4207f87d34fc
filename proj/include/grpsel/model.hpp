#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace grpsel {

/// Partition of a flat coordinate space into contiguous groups.
class GroupStructure {
 public:
  GroupStructure() = default;
  explicit GroupStructure(std::vector<int> sizes);

  int num_groups() const { return static_cast<int>(sizes_.size()); }
  int size(int k) const { return sizes_.at(static_cast<std::size_t>(k)); }
  int offset(int k) const { return offsets_.at(static_cast<std::size_t>(k)); }
  int total_dim() const { return offsets_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }

  int max_size() const;  // d_a
  int min_size() const;  // d_b
  // d = d_a / d_b, the group-size imbalance ratio (>= 1).
  double size_ratio() const {
    return static_cast<double>(max_size()) / static_cast<double>(min_size());
  }

  bool operator==(const GroupStructure& other) const {
    return sizes_ == other.sizes_;
  }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;  // length p+1, offsets_[p] = total_dim
};

/// n x N_d design matrix partitioned into column groups.
class GroupedDesign {
 public:
  GroupedDesign(Eigen::MatrixXd matrix, GroupStructure groups);

  int n() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const GroupStructure& groups() const { return groups_; }

  /// View of the columns of group k (X_k).
  auto group_block(int k) const {
    return matrix_.middleCols(groups_.offset(k), groups_.size(k));
  }

 private:
  Eigen::MatrixXd matrix_;
  GroupStructure groups_;
};

/// Coefficient vector partitioned like a design's columns.
class GroupedCoefficients {
 public:
  GroupedCoefficients() = default;
  GroupedCoefficients(Eigen::VectorXd values, GroupStructure groups);
  /// All-zero coefficients for the given structure.
  static GroupedCoefficients zero(const GroupStructure& groups);

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  const GroupStructure& groups() const { return groups_; }

  Eigen::VectorBlock<const Eigen::VectorXd> group(int k) const {
    return values_.segment(groups_.offset(k), groups_.size(k));
  }
  Eigen::VectorBlock<Eigen::VectorXd> group(int k) {
    return values_.segment(groups_.offset(k), groups_.size(k));
  }

  double group_norm(int k) const { return group(k).norm(); }

  /// Groups whose block norm exceeds tol.
  std::vector<int> active_set(double tol = 0.0) const;

 private:
  Eigen::VectorXd values_;
  GroupStructure groups_;
};

/// Per-group positive definite matrices R_k defining a general quadratic
/// penalty sum_k (beta_k' R_k beta_k)^{1/2}.
struct GroupMetric {
  std::vector<Eigen::MatrixXd> matrices;
};

/// Per-group Euclidean norms ||beta_k||_2.
Eigen::VectorXd group_norms(const GroupedCoefficients& beta);

/// Columns of the selected groups, in their original order. Empty A gives an
/// n x 0 matrix. Throws std::invalid_argument on out-of-range indices.
Eigen::MatrixXd extract_submatrix(const GroupedDesign& design,
                                  const std::vector<int>& group_indices);

/// Result of transforming a design so the general quadratic penalty becomes
/// the plain sqrt(d_k)-weighted group norm penalty: X_k* = X_k Q_k^{-1} with
/// R_k = d_k Q_k' Q_k (upper-triangular Cholesky factor Q_k).
struct Reparameterization {
  GroupedDesign design;                 // transformed design X*
  std::vector<Eigen::MatrixXd> factors; // Q_k, upper triangular

  /// Map transformed-space coefficients back: beta_k = Q_k^{-1} beta*_k.
  GroupedCoefficients to_original(const GroupedCoefficients& beta_star) const;
  /// Map original coefficients into the transformed space: beta*_k = Q_k beta_k.
  GroupedCoefficients to_transformed(const GroupedCoefficients& beta) const;
};

/// Throws std::invalid_argument naming the offending group if any R_k is not
/// symmetric positive definite, or if dimensions do not match the design.
Reparameterization reparameterize(const GroupedDesign& design,
                                  const GroupMetric& metric);

/// General penalty value lambda * sum_k (beta_k' R_k beta_k)^{1/2}.
double general_penalty(const GroupedCoefficients& beta,
                       const GroupMetric& metric, double lambda);

/// Scale-aware threshold below which a fitted block norm is declared zero:
/// 1e-8 * max(1, ||y||_2 / sqrt(n)).
double zero_tolerance(const Eigen::VectorXd& y);

/// Explicit standardization: center y, center columns and scale them to unit
/// sample standard deviation. Recorded so fits can be mapped back.
struct Standardization {
  GroupedDesign design;
  Eigen::VectorXd y;
  Eigen::VectorXd column_center;
  Eigen::VectorXd column_scale;  // applied as x <- (x - center) / scale
  double y_center = 0.0;
};

Standardization standardize(const GroupedDesign& design,
                            const Eigen::VectorXd& y);

}  // namespace grpsel
