#pragma once

#include <vector>

#include "grpsel/selection.hpp"
#include "grpsel/solver.hpp"

namespace grpsel {

struct AdaptiveConfig {
  double lambda_tilde = 0.0;  // second-stage penalty level
};

/// Inverse-norm weights from an initial estimate: 1/||b_k|| for groups whose
/// norm exceeds tol, +infinity for the rest (those groups stay pinned).
Eigen::VectorXd adaptive_weights(const GroupedCoefficients& initial,
                                 double tol = 0.0);

/// Weighted fit computed through the scale transformation: groups zeroed by
/// the initial estimate are dropped, surviving columns X_k are multiplied by
/// ||initial_k||, a plain fit runs at lambda_tilde, and the solution is
/// mapped back. The result is expressed against the original design with the
/// weighted penalty recorded; an all-zero initial gives the zero fit.
FitResult adaptive_fit(const GroupedDesign& design, const Eigen::VectorXd& y,
                       const GroupedCoefficients& initial,
                       const AdaptiveConfig& config,
                       const SolverOptions& opts = {},
                       double initial_tol = 0.0);

struct TwoStageResult {
  FitResult initial;              // first-stage fit at the BIC-chosen level
  FitResult final;                // weighted fit at the BIC-chosen level
  std::vector<int> dropped_groups;
  Eigen::VectorXd weights;        // +infinity on dropped groups
  bool degenerate = false;        // stage one selected the empty model
  BicSelection stage1;
  BicSelection stage2;            // empty records when degenerate
  std::vector<double> stage2_grid;
};

/// Full pipeline: plain path over stage1_grid with BIC selection, weights
/// from the chosen fit, then a weighted path with BIC selection. An empty
/// stage2_grid requests the default 50-point geometric grid computed from
/// the rescaled surviving design. Costs about two path fits.
TwoStageResult two_stage(const GroupedDesign& design, const Eigen::VectorXd& y,
                         const std::vector<double>& stage1_grid,
                         const std::vector<double>& stage2_grid = {},
                         const SolverOptions& opts = {},
                         DfRule rule = DfRule::coefficient_count);

}  // namespace grpsel
