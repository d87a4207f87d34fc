#include "grpsel/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

#include <Eigen/Cholesky>

#include "grpsel/adaptive.hpp"
#include "grpsel/rng.hpp"
#include "grpsel/selection.hpp"
#include "grpsel/solver.hpp"

namespace grpsel {

namespace {

GroupedCoefficients make_truth(const GroupStructure& groups,
                               const std::vector<std::pair<int, std::vector<double>>>& blocks) {
  GroupedCoefficients beta = GroupedCoefficients::zero(groups);
  for (const auto& [k, values] : blocks) {
    auto block = beta.group(k);
    for (int i = 0; i < block.size(); ++i) block[i] = values[static_cast<std::size_t>(i)];
  }
  return beta;
}

}  // namespace

ExampleSpec ExampleSpec::benchmark(int example_id) {
  ExampleSpec spec;
  spec.example_id = example_id;

  const auto equal_sized = [](int count, int size) {
    return GroupStructure(std::vector<int>(static_cast<std::size_t>(count), size));
  };
  const auto mixed_sized = [](int fives, int threes) {
    std::vector<int> sizes(static_cast<std::size_t>(fives), 5);
    sizes.insert(sizes.end(), static_cast<std::size_t>(threes), 3);
    return GroupStructure(sizes);
  };

  switch (example_id) {
    case 1:
      spec.groups = equal_sized(10, 5);
      spec.beta_true = make_truth(
          spec.groups, {{0, {0.5, 1.0, 1.5, 2.0, 2.5}}, {1, {2.0, 2.0, 2.0, 2.0, 2.0}}});
      break;
    case 2:
      spec.groups = equal_sized(10, 5);
      spec.beta_true = make_truth(spec.groups, {{0, {0.5, 1.0, 1.5, 1.0, 0.5}},
                                                {1, {1.0, 1.0, 1.0, 1.0, 1.0}},
                                                {2, {-1.0, 0.0, 1.0, 2.0, 1.5}},
                                                {3, {-1.5, 1.0, 0.5, 0.5, 0.5}}});
      break;
    case 3:
      spec.groups = equal_sized(210, 5);
      spec.beta_true = make_truth(spec.groups, {{0, {0.5, 1.0, 1.5, 1.0, 0.5}},
                                                {1, {1.0, 1.0, 1.0, 1.0, 1.0}},
                                                {2, {-1.0, 0.0, 1.0, 2.0, 1.5}},
                                                {3, {-1.5, 1.0, 0.5, 0.5, 0.5}}});
      break;
    case 4:
      spec.groups = mixed_sized(5, 5);
      spec.beta_true = make_truth(spec.groups, {{0, {0.5, 1.0, 1.5, 2.0, 2.5}},
                                                {1, {2.0, 0.0, 0.0, 2.0, 2.0}},
                                                {5, {-1.0, -2.0, -3.0}}});
      break;
    case 5:
      spec.groups = mixed_sized(5, 5);
      spec.beta_true = make_truth(spec.groups, {{0, {0.5, 1.0, 1.5, 2.0, 2.5}},
                                                {1, {2.0, 2.0, 2.0, 2.0, 2.0}},
                                                {2, {-1.0, 0.0, 1.0, 2.0, 3.0}},
                                                {3, {-1.5, 2.0, 0.0, 0.0, 0.0}},
                                                {5, {2.0, -2.0, 1.0}},
                                                {6, {0.0, -3.0, 1.5}},
                                                {7, {-1.5, 1.5, 2.0}},
                                                {8, {-2.0, -2.0, -2.0}}});
      break;
    case 6:
      spec.groups = mixed_sized(100, 110);
      spec.beta_true = make_truth(spec.groups, {{0, {0.5, 1.0, 1.5, 2.0, 2.5}},
                                                {1, {2.0, 2.0, 2.0, 2.0, 2.0}},
                                                {2, {-1.0, 0.0, 1.0, 2.0, 3.0}},
                                                {3, {-1.5, 2.0, 0.0, 0.0, 0.0}},
                                                {100, {2.0, -2.0, 1.0}},
                                                {101, {0.0, -3.0, 1.5}},
                                                {102, {-1.5, 1.5, 2.0}},
                                                {103, {-2.0, -2.0, -2.0}}});
      break;
    default:
      throw std::invalid_argument("benchmark id must be between 1 and 6");
  }
  return spec;
}

SimulatedData generate(const ExampleSpec& spec, std::uint64_t seed, std::uint64_t stream) {
  if (spec.n < 1) throw std::invalid_argument("generate: n must be positive");
  if (std::abs(spec.rho) >= 1.0) throw std::invalid_argument("generate: |rho| must be below 1");
  if (spec.sigma < 0.0) throw std::invalid_argument("generate: sigma must be nonnegative");
  if (!(spec.beta_true.groups() == spec.groups))
    throw std::invalid_argument("generate: beta_true grouping differs from spec.groups");

  const int n = spec.n;
  const int num_groups = spec.groups.num_groups();
  const int total = spec.groups.total_dim();

  Eigen::MatrixXd toeplitz(num_groups, num_groups);
  for (int a = 0; a < num_groups; ++a)
    for (int b = 0; b < num_groups; ++b) toeplitz(a, b) = std::pow(spec.rho, std::abs(a - b));
  Eigen::LLT<Eigen::MatrixXd> llt(toeplitz);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("generate: factor covariance is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  std::normal_distribution<double> normal(0.0, 1.0);

  auto factor_rng = make_stream(seed, stream, 0);
  Eigen::MatrixXd shocks(n, num_groups);
  for (int j = 0; j < num_groups; ++j)
    for (int i = 0; i < n; ++i) shocks(i, j) = normal(factor_rng);
  // lower-triangular mixing keeps leading factor columns identical across
  // scenarios that extend the factor list
  const Eigen::MatrixXd factors = shocks * chol.transpose();

  auto covariate_rng = make_stream(seed, stream, 1);
  const double root_half = std::sqrt(0.5);
  Eigen::MatrixXd x(n, total);
  for (int k = 0; k < num_groups; ++k) {
    const int offset = spec.groups.offset(k);
    for (int c = 0; c < spec.groups.size(k); ++c)
      for (int i = 0; i < n; ++i)
        x(i, offset + c) = (factors(i, k) + normal(covariate_rng)) * root_half;
  }

  auto error_rng = make_stream(seed, stream, 2);
  Eigen::VectorXd y = x * spec.beta_true.values();
  for (int i = 0; i < n; ++i) y[i] += spec.sigma * normal(error_rng);

  return SimulatedData{GroupedDesign(std::move(x), spec.groups), std::move(y), spec.beta_true};
}

Eigen::MatrixXd population_covariance(const ExampleSpec& spec) {
  const int total = spec.groups.total_dim();
  Eigen::MatrixXd cov(total, total);
  for (int ka = 0; ka < spec.groups.num_groups(); ++ka) {
    for (int kb = 0; kb < spec.groups.num_groups(); ++kb) {
      const double factor_cov = std::pow(spec.rho, std::abs(ka - kb));
      for (int a = 0; a < spec.groups.size(ka); ++a) {
        for (int b = 0; b < spec.groups.size(kb); ++b) {
          const int row = spec.groups.offset(ka) + a;
          const int col = spec.groups.offset(kb) + b;
          if (row == col)
            cov(row, col) = 1.0;
          else if (ka == kb)
            cov(row, col) = 0.5;
          else
            cov(row, col) = 0.5 * factor_cov;
        }
      }
    }
  }
  return cov;
}

double model_error(const GroupedCoefficients& beta_hat, const GroupedCoefficients& beta_true,
                   const Eigen::MatrixXd& covariance) {
  if (!(beta_hat.groups() == beta_true.groups()))
    throw std::invalid_argument("model_error: mismatched groupings");
  const int total = beta_true.groups().total_dim();
  if (covariance.rows() != total || covariance.cols() != total)
    throw std::invalid_argument("model_error: covariance dimension mismatch");
  const Eigen::VectorXd diff = beta_hat.values() - beta_true.values();
  return diff.dot(covariance * diff);
}

double sample_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("sample_quantile: empty sample");
  if (prob < 0.0 || prob > 1.0) throw std::invalid_argument("sample_quantile: prob outside [0,1]");
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

namespace {

double mean_of(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double standard_error(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const auto count = static_cast<double>(values.size());
  return std::sqrt(ss / (count - 1.0) / count);
}

// percentage of true flags plus its binomial standard error, both in points
std::pair<double, double> percentage(const std::vector<bool>& flags) {
  double hits = 0.0;
  for (bool f : flags) hits += f ? 1.0 : 0.0;
  const auto count = static_cast<double>(flags.size());
  const double p = hits / count;
  return {100.0 * p, 100.0 * std::sqrt(p * (1.0 - p) / count)};
}

SimulationMetrics aggregate(const std::vector<double>& selected,
                            const std::vector<double>& errors, const std::vector<bool>& includes,
                            const std::vector<bool>& exact) {
  SimulationMetrics m;
  m.mean_selected = mean_of(selected);
  m.se_selected = standard_error(selected, m.mean_selected);
  std::vector<double> sorted = selected;
  std::sort(sorted.begin(), sorted.end());
  m.q25 = sample_quantile(sorted, 0.25);
  m.median_selected = sample_quantile(sorted, 0.5);
  m.q75 = sample_quantile(sorted, 0.75);
  m.mean_model_error = mean_of(errors);
  m.se_model_error = standard_error(errors, m.mean_model_error);
  std::tie(m.pct_incl, m.se_incl) = percentage(includes);
  std::tie(m.pct_sel, m.se_sel) = percentage(exact);
  return m;
}

bool contains_all(const std::vector<int>& selected, const std::vector<int>& truth) {
  return std::includes(selected.begin(), selected.end(), truth.begin(), truth.end());
}

}  // namespace

ReplicationReport run_replications(const ExampleSpec& spec, int replications, std::uint64_t seed,
                                   SimMethod method) {
  if (replications < 1) throw std::invalid_argument("run_replications: need at least one run");

  ReplicationReport report;
  report.spec = spec;
  report.replications = replications;
  report.seed = seed;
  report.method = method;
  report.records.reserve(static_cast<std::size_t>(replications));

  const Eigen::MatrixXd covariance = population_covariance(spec);
  const std::vector<int> truth = spec.beta_true.active_set();
  const bool run_stage2 = method != SimMethod::group_lasso;

  std::vector<double> sel_initial, sel_final, me_initial, me_final;
  std::vector<bool> incl_initial, incl_final, exact_initial, exact_final;

  for (int r = 0; r < replications; ++r) {
    const SimulatedData data = generate(spec, seed, static_cast<std::uint64_t>(r));
    const std::vector<double> grid = default_lambda_grid(data.design, data.y);

    ReplicationRecord record;
    record.replication = r;

    FitResult initial;
    FitResult final_fit;
    if (run_stage2) {
      TwoStageResult two = two_stage(data.design, data.y, grid);
      initial = std::move(two.initial);
      final_fit = std::move(two.final);
      record.converged = initial.converged && final_fit.converged;
    } else {
      const std::vector<FitResult> path = fit_path(data.design, data.y, grid);
      const BicSelection choice = select_by_bic(path, data.design, data.y);
      initial = path[static_cast<std::size_t>(choice.index)];
      record.converged = initial.converged;
    }

    record.selected_initial = static_cast<int>(initial.active_set.size());
    record.me_initial = model_error(initial.beta, data.beta_true, covariance);
    record.includes_truth_initial = contains_all(initial.active_set, truth);
    record.exact_initial = initial.active_set == truth;
    record.lambda_initial = initial.penalty.lambda;
    if (run_stage2) {
      record.selected_final = static_cast<int>(final_fit.active_set.size());
      record.me_final = model_error(final_fit.beta, data.beta_true, covariance);
      record.includes_truth_final = contains_all(final_fit.active_set, truth);
      record.exact_final = final_fit.active_set == truth;
      record.lambda_final = final_fit.penalty.lambda;
    }
    report.records.push_back(record);

    if (!record.converged) {
      ++report.failures;
      continue;
    }
    sel_initial.push_back(static_cast<double>(record.selected_initial));
    me_initial.push_back(record.me_initial);
    incl_initial.push_back(record.includes_truth_initial);
    exact_initial.push_back(record.exact_initial);
    if (run_stage2) {
      sel_final.push_back(static_cast<double>(record.selected_final));
      me_final.push_back(record.me_final);
      incl_final.push_back(record.includes_truth_final);
      exact_final.push_back(record.exact_final);
    }
  }

  if (sel_initial.empty()) throw std::runtime_error("run_replications: every replication failed");
  report.group_lasso = aggregate(sel_initial, me_initial, incl_initial, exact_initial);
  if (run_stage2) report.adaptive = aggregate(sel_final, me_final, incl_final, exact_final);
  return report;
}

}  // namespace grpsel
