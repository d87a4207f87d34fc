#include "grpsel/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace grpsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Rescaled {
  std::vector<int> survivors;        // original indices of kept groups
  Eigen::VectorXd norms;             // full-length initial block norms
  std::optional<GroupedDesign> design;  // surviving columns scaled by norms
};

Rescaled build_rescaled(const GroupedDesign& design,
                        const GroupedCoefficients& initial, double tol) {
  const GroupStructure& groups = design.groups();
  Rescaled out;
  out.norms = group_norms(initial);
  std::vector<int> sizes;
  int total = 0;
  for (int k = 0; k < groups.num_groups(); ++k) {
    if (out.norms[k] > tol) {
      out.survivors.push_back(k);
      sizes.push_back(groups.size(k));
      total += groups.size(k);
    }
  }
  if (out.survivors.empty()) return out;

  Eigen::MatrixXd scaled(design.n(), total);
  int at = 0;
  for (int k : out.survivors) {
    scaled.middleCols(at, groups.size(k)) =
        design.group_block(k) * out.norms[k];
    at += groups.size(k);
  }
  out.design.emplace(std::move(scaled), GroupStructure(std::move(sizes)));
  return out;
}

Eigen::VectorXd full_weights(const Rescaled& rescaled, int p) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(p, kInf);
  for (int k : rescaled.survivors) w[k] = 1.0 / rescaled.norms[k];
  return w;
}

FitResult zero_fit(const GroupedDesign& design, const Eigen::VectorXd& y,
                   const PenaltyConfig& penalty) {
  FitResult out;
  out.beta = GroupedCoefficients::zero(design.groups());
  out.penalty = penalty;
  out.rss = y.squaredNorm();
  out.objective = 0.5 * out.rss;
  out.kkt_residual = 0.0;
  out.iterations = 0;
  out.converged = true;
  out.zero_tol = zero_tolerance(y);
  return out;
}

// solve the reduced problem to a tolerance tight enough that the mapped-back
// solution meets the caller's tolerance in the original weighted problem
SolverOptions reduced_options(const SolverOptions& opts,
                              const Rescaled& rescaled) {
  double smallest = kInf;
  for (int k : rescaled.survivors) smallest = std::min(smallest, rescaled.norms[k]);
  SolverOptions tightened = opts;
  tightened.kkt_tol = opts.kkt_tol * std::min(1.0, smallest);
  if (tightened.objective_tol > 0.0)
    tightened.objective_tol =
        std::max(opts.objective_tol * std::min(1.0, smallest * smallest), 1e-15);
  return tightened;
}

FitResult expand_fit(const GroupedDesign& design, const Eigen::VectorXd& y,
                     double lambda_tilde, const Rescaled& rescaled,
                     const FitResult& reduced, const SolverOptions& opts) {
  const GroupStructure& groups = design.groups();
  PenaltyConfig penalty{lambda_tilde, full_weights(rescaled, groups.num_groups())};

  FitResult out;
  out.beta = GroupedCoefficients::zero(groups);
  for (std::size_t i = 0; i < rescaled.survivors.size(); ++i) {
    int k = rescaled.survivors[i];
    out.beta.group(k) = rescaled.norms[k] * reduced.beta.group(int(i));
  }
  out.penalty = penalty;
  out.rss = reduced.rss;
  out.objective = 0.5 * out.rss;
  for (int k : rescaled.survivors)
    out.objective += lambda_tilde * (1.0 / rescaled.norms[k]) *
                     std::sqrt(double(groups.size(k))) * out.beta.group_norm(k);
  out.kkt_residual = kkt_residual(design, y, out.beta, penalty);
  out.iterations = reduced.iterations;
  // the tightened inner tolerance is sufficient, not necessary; the
  // mapped-back residual decides
  out.converged = out.kkt_residual <= opts.kkt_tol;
  out.objective_trace = reduced.objective_trace;
  out.zero_tol = zero_tolerance(y);
  out.active_set = out.beta.active_set(out.zero_tol);
  return out;
}

}  // namespace

Eigen::VectorXd adaptive_weights(const GroupedCoefficients& initial,
                                 double tol) {
  Eigen::VectorXd norms = group_norms(initial);
  Eigen::VectorXd w(norms.size());
  for (Eigen::Index k = 0; k < norms.size(); ++k)
    w[k] = norms[k] > tol ? 1.0 / norms[k] : kInf;
  return w;
}

FitResult adaptive_fit(const GroupedDesign& design, const Eigen::VectorXd& y,
                       const GroupedCoefficients& initial,
                       const AdaptiveConfig& config, const SolverOptions& opts,
                       double initial_tol) {
  if (y.size() != design.n())
    throw std::invalid_argument("response length does not match design");
  if (!(initial.groups() == design.groups()))
    throw std::invalid_argument("initial estimate grouping does not match design");
  if (!(config.lambda_tilde >= 0.0) || !std::isfinite(config.lambda_tilde))
    throw std::invalid_argument("lambda_tilde must be finite and nonnegative");

  Rescaled rescaled = build_rescaled(design, initial, initial_tol);
  if (!rescaled.design) {
    return zero_fit(
        design, y,
        PenaltyConfig{config.lambda_tilde,
                      full_weights(rescaled, design.groups().num_groups())});
  }
  FitResult reduced = fit(*rescaled.design, y,
                          PenaltyConfig::uniform(config.lambda_tilde),
                          reduced_options(opts, rescaled));
  return expand_fit(design, y, config.lambda_tilde, rescaled, reduced, opts);
}

TwoStageResult two_stage(const GroupedDesign& design, const Eigen::VectorXd& y,
                         const std::vector<double>& stage1_grid,
                         const std::vector<double>& stage2_grid,
                         const SolverOptions& opts, DfRule rule) {
  TwoStageResult out;

  std::vector<FitResult> path1 = fit_path(design, y, stage1_grid, {}, opts);
  out.stage1 = select_by_bic(path1, design, y, rule);
  out.initial = path1[out.stage1.index];

  Rescaled rescaled =
      build_rescaled(design, out.initial.beta, out.initial.zero_tol);
  out.weights = full_weights(rescaled, design.groups().num_groups());
  for (int k = 0; k < design.groups().num_groups(); ++k)
    if (std::isinf(out.weights[k])) out.dropped_groups.push_back(k);

  if (!rescaled.design) {
    out.degenerate = true;
    out.final = zero_fit(design, y, PenaltyConfig{0.0, out.weights});
    return out;
  }

  out.stage2_grid = stage2_grid;
  if (out.stage2_grid.empty()) {
    double top = lambda_max(*rescaled.design, y);
    if (top <= 0.0) {
      // surviving columns carry no signal; only the zero fit makes sense
      out.degenerate = true;
      out.final = zero_fit(design, y, PenaltyConfig{0.0, out.weights});
      return out;
    }
    out.stage2_grid = geometric_grid(top, 1e-3, 50);
  }

  SolverOptions tightened = reduced_options(opts, rescaled);
  std::vector<FitResult> path2 =
      fit_path(*rescaled.design, y, out.stage2_grid, {}, tightened);
  out.stage2 = select_by_bic(path2, *rescaled.design, y, rule);
  out.final = expand_fit(design, y, out.stage2_grid[out.stage2.index], rescaled,
                         path2[out.stage2.index], opts);
  return out;
}

}  // namespace grpsel
