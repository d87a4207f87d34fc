#include "grpsel/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace grpsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double block_level(const PenaltyConfig& penalty, const GroupStructure& groups,
                   int k) {
  return penalty.lambda * penalty.weight(k) * std::sqrt(double(groups.size(k)));
}

void check_penalty(const PenaltyConfig& penalty, int num_groups) {
  if (!(penalty.lambda >= 0.0) || !std::isfinite(penalty.lambda))
    throw std::invalid_argument("penalty level must be finite and nonnegative");
  if (penalty.weights.size() != 0 && penalty.weights.size() != num_groups)
    throw std::invalid_argument("weight vector length does not match group count");
  for (Eigen::Index k = 0; k < penalty.weights.size(); ++k) {
    double w = penalty.weights[k];
    if (std::isnan(w) || w < 0.0)
      throw std::invalid_argument(
          "group weights must be nonnegative (infinity pins a group at zero)");
  }
}

double relative_decrease(double before, double after) {
  return (before - after) / std::max(1.0, std::abs(before));
}

// KKT violation given the full correlation vector X'(y - X beta).
double kkt_from_correlation(const Eigen::VectorXd& correlation,
                            const GroupedCoefficients& beta,
                            const PenaltyConfig& penalty) {
  const GroupStructure& groups = beta.groups();
  double worst = 0.0;
  for (int k = 0; k < groups.num_groups(); ++k) {
    if (std::isinf(penalty.weight(k))) continue;
    double level = block_level(penalty, groups, k);
    Eigen::VectorXd ck = correlation.segment(groups.offset(k), groups.size(k));
    double norm_bk = beta.group_norm(k);
    double violation;
    if (norm_bk > 0.0) {
      violation = (ck - (level / norm_bk) * beta.group(k)).norm();
    } else {
      violation = std::max(0.0, ck.norm() - level);
    }
    worst = std::max(worst, violation);
  }
  return worst;
}

}  // namespace

GramCache::GramCache(const GroupedDesign& design) {
  int p = design.groups().num_groups();
  eigenvalues_.reserve(p);
  eigenvectors_.reserve(p);
  grams_.reserve(p);
  for (int k = 0; k < p; ++k) {
    Eigen::MatrixXd gram =
        design.group_block(k).transpose() * design.group_block(k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("eigendecomposition failed for group " +
                               std::to_string(k));
    eigenvalues_.push_back(eig.eigenvalues().cwiseMax(0.0));
    eigenvectors_.push_back(eig.eigenvectors());
    grams_.push_back(std::move(gram));
  }
}

Eigen::VectorXd solve_block(const Eigen::VectorXd& eigenvalues,
                            const Eigen::MatrixXd& eigenvectors,
                            const Eigen::VectorXd& gradient, double level) {
  if (level < 0.0 || std::isnan(level))
    throw std::invalid_argument("penalty level must be nonnegative");
  const Eigen::Index d = gradient.size();
  if (eigenvalues.size() != d || eigenvectors.rows() != d || eigenvectors.cols() != d)
    throw std::invalid_argument("factor dimensions do not match gradient");

  if (std::isinf(level)) return Eigen::VectorXd::Zero(d);
  double gnorm = gradient.norm();
  if (gnorm <= level) return Eigen::VectorXd::Zero(d);

  Eigen::VectorXd z = eigenvectors.transpose() * gradient;

  if (level == 0.0) {
    // minimum-norm least squares on the block
    double smax = eigenvalues.maxCoeff();
    double cutoff = smax * double(d) * std::numeric_limits<double>::epsilon();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i)
      if (eigenvalues[i] > cutoff) w[i] = z[i] / eigenvalues[i];
    return eigenvectors * w;
  }

  // The solution is b = V diag(t / (s_i t + level)) V'g with t = ||b||_2 the
  // root of phi(t) = sum_i z_i^2 / (s_i t + level)^2 - 1. phi is convex and
  // decreasing, so Newton from any point left of the root climbs to it
  // monotonically; t0 below satisfies phi(t0) >= 0.
  double smax = eigenvalues.maxCoeff();
  if (smax <= 0.0) return Eigen::VectorXd::Zero(d);
  Eigen::ArrayXd z2 = z.array().square();
  double t = (gnorm - level) / smax;
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::ArrayXd denom = eigenvalues.array() * t + level;
    double f = (z2 / denom.square()).sum() - 1.0;
    if (f <= 1e-13) break;
    double fp = -2.0 * (z2 * eigenvalues.array() / denom.cube()).sum();
    if (!(fp < 0.0)) break;
    double step = -f / fp;
    t += step;
    if (step <= 1e-16 * (1.0 + t)) break;
  }
  Eigen::ArrayXd scale = t / (eigenvalues.array() * t + level);
  return eigenvectors * (scale * z.array()).matrix();
}

Eigen::VectorXd block_update(const GroupedDesign& design, int k,
                             const Eigen::VectorXd& partial_residual,
                             const PenaltyConfig& penalty) {
  if (k < 0 || k >= design.groups().num_groups())
    throw std::invalid_argument("group index out of range");
  if (partial_residual.size() != design.n())
    throw std::invalid_argument("residual length does not match design");
  check_penalty(penalty, design.groups().num_groups());

  auto block = design.group_block(k);
  Eigen::MatrixXd gram = block.transpose() * block;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed for group " +
                             std::to_string(k));
  Eigen::VectorXd gradient = block.transpose() * partial_residual;
  return solve_block(eig.eigenvalues().cwiseMax(0.0), eig.eigenvectors(),
                     gradient, block_level(penalty, design.groups(), k));
}

double kkt_residual(const GroupedDesign& design, const Eigen::VectorXd& y,
                    const GroupedCoefficients& beta,
                    const PenaltyConfig& penalty) {
  if (y.size() != design.n())
    throw std::invalid_argument("response length does not match design");
  if (!(beta.groups() == design.groups()))
    throw std::invalid_argument("coefficient grouping does not match design");
  check_penalty(penalty, design.groups().num_groups());
  Eigen::VectorXd residual = y - design.matrix() * beta.values();
  Eigen::VectorXd correlation = design.matrix().transpose() * residual;
  return kkt_from_correlation(correlation, beta, penalty);
}

double lambda_max(const GroupedDesign& design, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& weights) {
  if (y.size() != design.n())
    throw std::invalid_argument("response length does not match design");
  int p = design.groups().num_groups();
  if (weights.size() != 0 && weights.size() != p)
    throw std::invalid_argument("weight vector length does not match group count");
  double best = 0.0;
  for (int k = 0; k < p; ++k) {
    double w = weights.size() == 0 ? 1.0 : weights[k];
    if (std::isinf(w) && w > 0) continue;
    if (std::isnan(w) || w <= 0.0)
      throw std::invalid_argument(
          "weights must be positive (infinity pins a group at zero)");
    double corr = (design.group_block(k).transpose() * y).norm();
    best = std::max(best,
                    corr / (w * std::sqrt(double(design.groups().size(k)))));
  }
  return best;
}

double objective_value(const GroupedDesign& design, const Eigen::VectorXd& y,
                       const GroupedCoefficients& beta,
                       const PenaltyConfig& penalty) {
  if (y.size() != design.n())
    throw std::invalid_argument("response length does not match design");
  if (!(beta.groups() == design.groups()))
    throw std::invalid_argument("coefficient grouping does not match design");
  check_penalty(penalty, design.groups().num_groups());
  double value = 0.5 * (y - design.matrix() * beta.values()).squaredNorm();
  for (int k = 0; k < design.groups().num_groups(); ++k) {
    if (std::isinf(penalty.weight(k))) continue;
    value += block_level(penalty, design.groups(), k) * beta.group_norm(k);
  }
  return value;
}

FitResult fit(const GroupedDesign& design, const Eigen::VectorXd& y,
              const PenaltyConfig& penalty, const SolverOptions& opts,
              const std::optional<GroupedCoefficients>& warm_start,
              const GramCache* cache) {
  const GroupStructure& groups = design.groups();
  const int p = groups.num_groups();
  if (y.size() != design.n())
    throw std::invalid_argument("response length does not match design");
  check_penalty(penalty, p);
  if (!(opts.kkt_tol > 0.0))
    throw std::invalid_argument("kkt_tol must be positive");
  if (opts.max_iters < 1)
    throw std::invalid_argument("max_iters must be at least 1");
  if (opts.objective_tol < 0.0)
    throw std::invalid_argument("objective_tol must be nonnegative");

  std::optional<GramCache> local_cache;
  if (cache == nullptr) {
    local_cache.emplace(design);
    cache = &*local_cache;
  }

  std::vector<double> level(p);
  std::vector<bool> pinned(p);
  for (int k = 0; k < p; ++k) {
    pinned[k] = std::isinf(penalty.weight(k));
    level[k] = pinned[k] ? kInf : block_level(penalty, groups, k);
  }

  GroupedCoefficients beta = GroupedCoefficients::zero(groups);
  if (warm_start) {
    if (!(warm_start->groups() == groups))
      throw std::invalid_argument("warm start grouping does not match design");
    beta.values() = warm_start->values();
    for (int k = 0; k < p; ++k)
      if (pinned[k]) beta.group(k).setZero();
  }

  Eigen::VectorXd residual = beta.values().isZero(0.0)
                                 ? y
                                 : Eigen::VectorXd(y - design.matrix() * beta.values());

  auto objective_now = [&]() {
    double value = 0.5 * residual.squaredNorm();
    for (int k = 0; k < p; ++k)
      if (!pinned[k]) value += level[k] * beta.group_norm(k);
    return value;
  };

  // one pass of exact block minimization over the listed groups
  double cycle_movement = 0.0;
  auto sweep = [&](const std::vector<int>& order) {
    for (int k : order) {
      if (pinned[k]) continue;
      auto block = design.group_block(k);
      Eigen::VectorXd bk = beta.group(k);
      bool was_zero = bk.isZero(0.0);
      Eigen::VectorXd gradient = block.transpose() * residual;
      if (!was_zero) gradient.noalias() += cache->gram(k) * bk;
      Eigen::VectorXd updated = solve_block(
          cache->eigenvalues(k), cache->eigenvectors(k), gradient, level[k]);
      if (was_zero && updated.isZero(0.0)) continue;
      cycle_movement = std::max(
          cycle_movement, (updated - bk).lpNorm<Eigen::Infinity>());
      residual.noalias() -= block * (updated - bk);
      beta.group(k) = updated;
    }
  };

  // refreshes the residual, removing incremental drift
  auto exact_kkt = [&]() {
    residual = y - design.matrix() * beta.values();
    Eigen::VectorXd correlation = design.matrix().transpose() * residual;
    return kkt_from_correlation(correlation, beta, penalty);
  };

  std::vector<int> all_groups(p);
  for (int k = 0; k < p; ++k) all_groups[k] = k;

  FitResult result;
  result.objective_trace.reserve(16);
  double objective = objective_now();
  double kkt = kInf;
  int iterations = 0;
  bool converged = false;

  // per-sweep floor inside the polish loop, so objective_tol = 0 still
  // terminates once roundoff stops all progress
  const double inner_tol = std::max(opts.objective_tol, 1e-15);

  while (iterations < opts.max_iters) {
    double cycle_start = objective;
    cycle_movement = 0.0;
    sweep(all_groups);
    ++iterations;
    objective = objective_now();
    result.objective_trace.push_back(objective);

    kkt = exact_kkt();
    if (kkt <= opts.kkt_tol) {
      converged = true;
      break;
    }

    // polish the current active set until it stops improving, then take
    // another full pass to pick up violators
    while (iterations < opts.max_iters) {
      std::vector<int> active;
      for (int k = 0; k < p; ++k)
        if (!pinned[k] && !beta.group(k).isZero(0.0)) active.push_back(k);
      if (active.empty()) break;
      double before = objective;
      sweep(active);
      ++iterations;
      objective = objective_now();
      result.objective_trace.push_back(objective);
      if (relative_decrease(before, objective) <= inner_tol) break;
    }

    // stall is judged over the whole cycle (full pass plus polish); near a
    // tight tolerance the per-cycle decrease drops below double resolution
    // while the blocks are still moving, so a flat objective alone is not
    // enough. objective_tol = 0 disables it, leaving kkt_tol and max_iters
    // in charge
    const double movement_floor =
        1e-14 * std::max(1.0, beta.values().lpNorm<Eigen::Infinity>());
    if (opts.objective_tol > 0.0 &&
        relative_decrease(cycle_start, objective) <= opts.objective_tol &&
        cycle_movement <= movement_floor)
      break;
  }

  if (!converged) {
    kkt = exact_kkt();
    converged = kkt <= opts.kkt_tol;
  }

  result.rss = residual.squaredNorm();
  result.objective = 0.5 * result.rss;
  for (int k = 0; k < p; ++k)
    if (!pinned[k]) result.objective += level[k] * beta.group_norm(k);
  result.beta = std::move(beta);
  result.penalty = penalty;
  result.kkt_residual = kkt;
  result.iterations = iterations;
  result.converged = converged;
  result.zero_tol = zero_tolerance(y);
  result.active_set = result.beta.active_set(result.zero_tol);
  return result;
}

std::vector<FitResult> fit_path(const GroupedDesign& design,
                                const Eigen::VectorXd& y,
                                const std::vector<double>& lambda_grid,
                                const Eigen::VectorXd& weights,
                                const SolverOptions& opts,
                                const GramCache* cache) {
  if (lambda_grid.empty())
    throw std::invalid_argument("lambda grid must be nonempty");
  for (std::size_t i = 0; i + 1 < lambda_grid.size(); ++i)
    if (!(lambda_grid[i] > lambda_grid[i + 1]))
      throw std::invalid_argument("lambda grid must be strictly decreasing");
  if (!(lambda_grid.back() >= 0.0))
    throw std::invalid_argument("lambda values must be nonnegative");

  std::optional<GramCache> local_cache;
  if (cache == nullptr) {
    local_cache.emplace(design);
    cache = &*local_cache;
  }

  std::vector<FitResult> path;
  path.reserve(lambda_grid.size());
  std::optional<GroupedCoefficients> warm;
  for (double lambda : lambda_grid) {
    PenaltyConfig penalty{lambda, weights};
    path.push_back(fit(design, y, penalty, opts, warm, cache));
    warm = path.back().beta;
  }
  return path;
}

std::vector<double> geometric_grid(double from, double decade, int points) {
  if (!(from > 0.0) || !(decade > 0.0) || decade >= 1.0)
    throw std::invalid_argument("grid needs from > 0 and decade in (0, 1)");
  if (points < 1) throw std::invalid_argument("grid needs at least one point");
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = from;
    return grid;
  }
  for (int i = 0; i < points; ++i)
    grid[i] = from * std::pow(decade, double(i) / double(points - 1));
  return grid;
}

}  // namespace grpsel
