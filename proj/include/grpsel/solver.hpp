#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <vector>

#include "grpsel/model.hpp"

namespace grpsel {

/// Penalty level and per-group multipliers. The effective level for group k
/// is lambda * weights[k]; an infinite weight pins the group at zero.
struct PenaltyConfig {
  double lambda = 0.0;
  Eigen::VectorXd weights;  // empty means all ones

  static PenaltyConfig uniform(double lambda) { return PenaltyConfig{lambda, {}}; }

  double weight(int k) const {
    return weights.size() == 0 ? 1.0 : weights[k];
  }
};

struct SolverOptions {
  double kkt_tol = 1e-6;
  int max_iters = 10000;  // total block sweeps
  // declare a stall when a full cycle improves the objective by less than
  // this relative amount while the coefficients have stopped moving; 0
  // disables the stall check
  double objective_tol = 1e-10;
};

struct FitResult {
  GroupedCoefficients beta;
  PenaltyConfig penalty;  // the penalty this fit solved
  double objective = 0.0;
  double rss = 0.0;  // ||y - X beta||^2 (unhalved)
  double kkt_residual = 0.0;
  std::vector<int> active_set;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // value after each sweep
  double zero_tol = 0.0;  // block-norm threshold used for active_set
};

/// Cached per-group Gram factorizations X_k'X_k = V diag(s) V'. Built once
/// per design and shared across fits (read-only afterwards).
class GramCache {
 public:
  explicit GramCache(const GroupedDesign& design);

  const Eigen::VectorXd& eigenvalues(int k) const { return eigenvalues_[k]; }
  const Eigen::MatrixXd& eigenvectors(int k) const { return eigenvectors_[k]; }
  const Eigen::MatrixXd& gram(int k) const { return grams_[k]; }

 private:
  std::vector<Eigen::VectorXd> eigenvalues_;
  std::vector<Eigen::MatrixXd> eigenvectors_;
  std::vector<Eigen::MatrixXd> grams_;
};

/// Exact minimizer of 0.5||r - X_k b||^2 + level * ||b||_2 over the block,
/// given the spectral factors of X_k'X_k and the gradient g = X_k'r.
/// Returns zero iff ||g||_2 <= level. level = +inf pins the block at zero;
/// level = 0 gives the (minimum-norm) least-squares block solution.
Eigen::VectorXd solve_block(const Eigen::VectorXd& eigenvalues,
                            const Eigen::MatrixXd& eigenvectors,
                            const Eigen::VectorXd& gradient, double level);

/// Spec-level wrapper: minimizes the objective in block k with all other
/// blocks fixed, where partial_residual = y - sum_{j != k} X_j beta_j.
Eigen::VectorXd block_update(const GroupedDesign& design, int k,
                             const Eigen::VectorXd& partial_residual,
                             const PenaltyConfig& penalty);

/// Max over groups of the first-order optimality violation:
/// active k:  || X_k'(y - X beta) - lambda_k sqrt(d_k) beta_k/||beta_k|| ||_2
/// zero k:    ( || X_k'(y - X beta) ||_2 - lambda_k sqrt(d_k) )_+
/// Groups with infinite weight contribute zero.
double kkt_residual(const GroupedDesign& design, const Eigen::VectorXd& y,
                    const GroupedCoefficients& beta,
                    const PenaltyConfig& penalty);

/// Smallest penalty level with an all-zero solution:
/// max_k ||X_k'y||_2 / (w_k sqrt(d_k)). Requires finite positive weights.
double lambda_max(const GroupedDesign& design, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& weights = {});

/// 0.5 * rss + sum_k lambda_k sqrt(d_k) ||beta_k||; pinned groups excluded.
double objective_value(const GroupedDesign& design, const Eigen::VectorXd& y,
                       const GroupedCoefficients& beta,
                       const PenaltyConfig& penalty);

/// Cyclic block coordinate descent with exact block minimization.
/// Non-convergence yields converged=false with the best iterate; dimension
/// mismatches throw std::invalid_argument.
FitResult fit(const GroupedDesign& design, const Eigen::VectorXd& y,
              const PenaltyConfig& penalty, const SolverOptions& opts = {},
              const std::optional<GroupedCoefficients>& warm_start = {},
              const GramCache* cache = nullptr);

/// Warm-started fits over a strictly descending lambda grid.
std::vector<FitResult> fit_path(const GroupedDesign& design,
                                const Eigen::VectorXd& y,
                                const std::vector<double>& lambda_grid,
                                const Eigen::VectorXd& weights = {},
                                const SolverOptions& opts = {},
                                const GramCache* cache = nullptr);

/// Geometric grid of `points` values from `from` down to `from * decade`.
std::vector<double> geometric_grid(double from, double decade, int points);

}  // namespace grpsel
