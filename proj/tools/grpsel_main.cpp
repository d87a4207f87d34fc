#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "grpsel/adaptive.hpp"
#include "grpsel/io.hpp"
#include "grpsel/model.hpp"
#include "grpsel/run_config.hpp"
#include "grpsel/selection.hpp"
#include "grpsel/simgen.hpp"
#include "grpsel/solver.hpp"
#include "grpsel/theory.hpp"
#include "grpsel/version.hpp"

namespace {

using grpsel::RunConfig;
using nlohmann::json;

// a numerical result the command could not recover from; maps to exit 3
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json finite_or_null(double value) {
  if (std::isfinite(value)) return value;
  return nullptr;
}

grpsel::SolverOptions solver_options(const RunConfig& config) {
  grpsel::SolverOptions opts;
  opts.kkt_tol = config.kkt_tol;
  opts.max_iters = config.max_iters;
  opts.objective_tol = config.objective_tol;
  if (opts.kkt_tol <= 0.0) throw std::invalid_argument("--kkt-tol must be positive");
  if (opts.max_iters < 1) throw std::invalid_argument("--max-iters must be positive");
  return opts;
}

grpsel::DfRule df_rule(const RunConfig& config) {
  if (config.df_rule == "coefficient_count") return grpsel::DfRule::coefficient_count;
  if (config.df_rule == "yuan_lin") return grpsel::DfRule::yuan_lin;
  throw std::invalid_argument("--df-rule must be coefficient_count or yuan_lin");
}

grpsel::SimMethod sim_method(const RunConfig& config) {
  if (config.method == "both") return grpsel::SimMethod::both;
  if (config.method == "group_lasso") return grpsel::SimMethod::group_lasso;
  if (config.method == "adaptive") return grpsel::SimMethod::adaptive;
  throw std::invalid_argument("--method must be both, group_lasso or adaptive");
}

// "auto" or a nonnegative number
double parse_lambda(const std::string& text, bool& is_auto) {
  if (text == "auto") {
    is_auto = true;
    return 0.0;
  }
  is_auto = false;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0.0)
    throw std::invalid_argument("--lambda must be 'auto' or a nonnegative number");
  return value;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << content;
}

json base_report(const RunConfig& config) {
  json report;
  report["schema_version"] = 1;
  report["version"] = grpsel::version;
  report["seed"] = config.seed;
  report["config"] = config;
  return report;
}

long long elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               start)
      .count();
}

json metrics_json(const grpsel::SimulationMetrics& m) {
  return json{{"mean_selected", m.mean_selected},
              {"se_selected", m.se_selected},
              {"median_selected", m.median_selected},
              {"q25", m.q25},
              {"q75", m.q75},
              {"mean_model_error", m.mean_model_error},
              {"se_model_error", m.se_model_error},
              {"pct_incl", m.pct_incl},
              {"se_incl", m.se_incl},
              {"pct_sel", m.pct_sel},
              {"se_sel", m.se_sel}};
}

std::string metrics_row(const char* tag, const grpsel::SimulationMetrics& m) {
  char line[160];
  std::snprintf(line, sizeof(line),
                "%-12s  %5.2f (%4.2f)   %4.1f [%4.1f, %4.1f]   %8.2f (%5.2f)   %5.1f (%3.1f)   "
                "%5.1f (%3.1f)\n",
                tag, m.mean_selected, m.se_selected, m.median_selected, m.q25, m.q75,
                m.mean_model_error, m.se_model_error, m.pct_incl, m.se_incl, m.pct_sel, m.se_sel);
  return line;
}

std::string simulate_table(const grpsel::ReplicationReport& report) {
  const grpsel::ExampleSpec& spec = report.spec;
  char head[200];
  std::snprintf(head, sizeof(head),
                "scenario %d: n = %d, %d groups, %d columns, %zu true groups, sigma = %g, rho = "
                "%g\n%d replications, seed %llu, failures %d\n\n",
                spec.example_id, spec.n, spec.groups.num_groups(), spec.groups.total_dim(),
                spec.beta_true.active_set().size(), spec.sigma, spec.rho, report.replications,
                static_cast<unsigned long long>(report.seed), report.failures);
  std::string table = head;
  char columns[160];
  std::snprintf(columns, sizeof(columns), "%-12s  %12s   %17s   %16s   %11s   %11s\n", "method",
                "mean (se)", "med [q25, q75]", "ME (se)", "%incl (se)", "%sel (se)");
  table += columns;
  table += metrics_row("group lasso", report.group_lasso);
  if (report.method != grpsel::SimMethod::group_lasso)
    table += metrics_row("adaptive", report.adaptive);
  return table;
}

int cmd_simulate(RunConfig config) {
  if (config.example < 1 || config.example > 6)
    throw std::invalid_argument("--example must be between 1 and 6");
  if (config.replications < 1) throw std::invalid_argument("--reps must be positive");
  const grpsel::SimMethod method = sim_method(config);

  const grpsel::ExampleSpec spec = grpsel::ExampleSpec::benchmark(config.example);
  const grpsel::ReplicationReport report =
      grpsel::run_replications(spec, config.replications, config.seed, method);

  // no timing in this report: reruns with the same flags must be identical bytes
  json out = base_report(config);
  out["example"] = {{"id", spec.example_id},
                    {"n", spec.n},
                    {"rho", spec.rho},
                    {"sigma", spec.sigma},
                    {"group_sizes", spec.groups.sizes()},
                    {"true_active", spec.beta_true.active_set()}};
  out["replications"] = report.replications;
  out["failures"] = report.failures;
  out["group_lasso"] = metrics_json(report.group_lasso);
  out["adaptive"] =
      method == grpsel::SimMethod::group_lasso ? json(nullptr) : metrics_json(report.adaptive);
  json records = json::array();
  for (const grpsel::ReplicationRecord& rec : report.records) {
    json entry{{"replication", rec.replication},
               {"converged", rec.converged},
               {"initial",
                {{"selected", rec.selected_initial},
                 {"model_error", rec.me_initial},
                 {"includes_truth", rec.includes_truth_initial},
                 {"exact", rec.exact_initial},
                 {"lambda", rec.lambda_initial}}}};
    if (method == grpsel::SimMethod::group_lasso)
      entry["final"] = nullptr;
    else
      entry["final"] = {{"selected", rec.selected_final},
                        {"model_error", rec.me_final},
                        {"includes_truth", rec.includes_truth_final},
                        {"exact", rec.exact_final},
                        {"lambda", rec.lambda_final}};
    records.push_back(std::move(entry));
  }
  out["records"] = std::move(records);

  const std::string table = simulate_table(report);
  std::cout << table;
  if (!config.table_path.empty()) write_file(config.table_path, table);
  if (!config.out_path.empty()) write_file(config.out_path, out.dump(2) + "\n");
  return 0;
}

json bic_json(const std::vector<grpsel::BicRecord>& records) {
  json rows = json::array();
  for (const grpsel::BicRecord& r : records)
    rows.push_back({{"lambda", r.lambda},
                    {"rss", r.rss},
                    {"df", r.df},
                    {"bic", r.bic},
                    {"active_groups", r.active_groups}});
  return rows;
}

json fit_body(const grpsel::FitResult& fit, const grpsel::RegressionData& data) {
  json groups = json::array();
  for (int k = 0; k < data.design.groups().num_groups(); ++k)
    groups.push_back({{"name", data.group_names[static_cast<std::size_t>(k)]},
                      {"size", data.design.groups().size(k)},
                      {"norm", fit.beta.group_norm(k)},
                      {"selected", fit.beta.group_norm(k) > fit.zero_tol}});
  std::vector<std::string> selected_names;
  for (int k : fit.active_set) selected_names.push_back(data.group_names[static_cast<std::size_t>(k)]);
  return json{{"lambda", fit.penalty.lambda},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"kkt_residual", fit.kkt_residual},
              {"rss", fit.rss},
              {"objective", fit.objective},
              {"active_groups", fit.active_set},
              {"selected_names", selected_names},
              {"groups", groups},
              {"columns", data.column_names},
              {"coefficients", std::vector<double>(
                                   fit.beta.values().data(),
                                   fit.beta.values().data() + fit.beta.values().size())}};
}

int report_convergence_failure(const grpsel::FitResult& fit) {
  std::fprintf(stderr,
               "fit did not converge: kkt residual %.3e after %d sweeps at lambda %.6g\n",
               fit.kkt_residual, fit.iterations, fit.penalty.lambda);
  return 3;
}

int cmd_fit(RunConfig config) {
  const auto start = std::chrono::steady_clock::now();
  if (config.method == "both") config.method = "group_lasso";
  if (config.method != "group_lasso" && config.method != "adaptive")
    throw std::invalid_argument("--method must be group_lasso or adaptive");
  if (config.data_path.empty() || config.groups_path.empty())
    throw std::invalid_argument("--data and --groups are required");

  const grpsel::RegressionData data =
      grpsel::load_regression_data(config.data_path, config.groups_path);
  const grpsel::SolverOptions opts = solver_options(config);
  const grpsel::DfRule rule = df_rule(config);

  json out = json::object();
  grpsel::FitResult fit;
  bool degenerate = false;

  if (config.method == "group_lasso") {
    if (config.lambda_mode == "auto") {
      const std::vector<double> grid = grpsel::default_lambda_grid(
          data.design, data.y, {}, config.grid_points, config.grid_decade);
      const std::vector<grpsel::FitResult> path =
          grpsel::fit_path(data.design, data.y, grid, {}, opts);
      const grpsel::BicSelection choice = grpsel::select_by_bic(path, data.design, data.y, rule);
      fit = path[static_cast<std::size_t>(choice.index)];
      out["bic"] = bic_json(choice.records);
      if (!config.csv_path.empty())
        write_file(config.csv_path, grpsel::bic_table_csv(choice.records));
    } else {
      fit = grpsel::fit(data.design, data.y,
                        grpsel::PenaltyConfig::uniform(config.lambda), opts);
    }
  } else {
    std::vector<double> stage1;
    if (config.lambda_mode == "auto")
      stage1 = grpsel::default_lambda_grid(data.design, data.y, {}, config.grid_points,
                                           config.grid_decade);
    else
      stage1 = {config.lambda};
    const grpsel::TwoStageResult two =
        grpsel::two_stage(data.design, data.y, stage1, {}, opts, rule);
    fit = two.final;
    degenerate = two.degenerate;
    out["stage1"] = {{"lambda", two.initial.penalty.lambda},
                     {"active_groups", two.initial.active_set},
                     {"dropped_groups", two.dropped_groups}};
    if (!two.stage2.records.empty()) out["bic"] = bic_json(two.stage2.records);
    if (!config.csv_path.empty() && !two.stage2.records.empty())
      write_file(config.csv_path, grpsel::bic_table_csv(two.stage2.records));
  }

  json report = base_report(config);
  report.update(out);
  report["method"] = config.method;
  report["degenerate"] = degenerate;
  report["n"] = static_cast<int>(data.y.size());
  report["fit"] = fit_body(fit, data);
  report["wall_time_ms"] = elapsed_ms(start);
  const std::string serialized = report.dump(2) + "\n";
  if (!config.out_path.empty())
    write_file(config.out_path, serialized);
  else
    std::cout << serialized;

  if (!fit.converged) return report_convergence_failure(fit);
  if (degenerate) std::fprintf(stderr, "note: stage one selected the empty model\n");
  return 0;
}

int cmd_path(RunConfig config) {
  const auto start = std::chrono::steady_clock::now();
  if (config.data_path.empty() || config.groups_path.empty())
    throw std::invalid_argument("--data and --groups are required");
  const grpsel::RegressionData data =
      grpsel::load_regression_data(config.data_path, config.groups_path);
  const grpsel::SolverOptions opts = solver_options(config);

  const std::vector<double> grid = grpsel::default_lambda_grid(
      data.design, data.y, {}, config.grid_points, config.grid_decade);
  const std::vector<grpsel::FitResult> path =
      grpsel::fit_path(data.design, data.y, grid, {}, opts);
  const grpsel::BicSelection choice =
      grpsel::select_by_bic(path, data.design, data.y, df_rule(config));

  const std::string csv = grpsel::bic_table_csv(choice.records);
  if (!config.csv_path.empty()) write_file(config.csv_path, csv);

  json report = base_report(config);
  report["grid"] = grid;
  report["bic"] = bic_json(choice.records);
  report["chosen_index"] = choice.index;
  report["chosen_lambda"] = choice.records[static_cast<std::size_t>(choice.index)].lambda;
  json actives = json::array();
  for (const grpsel::FitResult& fit : path) actives.push_back(fit.active_set);
  report["active_sets"] = std::move(actives);
  report["wall_time_ms"] = elapsed_ms(start);

  const std::string serialized = report.dump(2) + "\n";
  if (!config.out_path.empty())
    write_file(config.out_path, serialized);
  else if (config.csv_path.empty())
    std::cout << csv;
  if (!config.out_path.empty() || !config.csv_path.empty())
    std::printf("path of %zu fits, chosen lambda %.6g (index %d)\n", path.size(),
                report["chosen_lambda"].get<double>(), choice.index);
  return 0;
}

json bounds_json(const grpsel::BoundConstants& b) {
  json out;
  out["lambda"] = b.lambda;
  out["sigma"] = b.sigma;
  out["c0"] = b.c0;
  out["a_n"] = b.a_n;
  out["n"] = b.n;
  out["q"] = b.q;
  out["q_star"] = b.q_star;
  out["d_max"] = b.d_max;
  out["d_min"] = b.d_min;
  out["d_ratio"] = b.d_ratio;
  out["total_dim"] = b.total_dim;
  out["c_lower"] = b.c_lower;
  out["c_upper"] = b.c_upper;
  out["c_bar"] = finite_or_null(b.c_bar);
  out["eta1"] = b.eta1;
  out["eta2"] = b.eta2;
  out["r1"] = finite_or_null(b.r1);
  out["r2"] = finite_or_null(b.r2);
  out["M1"] = finite_or_null(b.M1);
  out["M2"] = finite_or_null(b.M2);
  out["M3"] = finite_or_null(b.M3);
  out["r1_sq_q"] = finite_or_null(b.r1_sq_q);
  out["r2_sq_q"] = finite_or_null(b.r2_sq_q);
  out["M1_q"] = finite_or_null(b.M1_q);
  out["M2_q"] = finite_or_null(b.M2_q);
  out["M3_q"] = finite_or_null(b.M3_q);
  out["B1"] = finite_or_null(b.B1);
  out["B1_proof"] = finite_or_null(b.B1_proof);
  out["count_bound"] = finite_or_null(b.count_bound);
  out["omega_sq_bound"] = finite_or_null(b.omega_sq_bound);
  out["omega_sq_bound_proof"] = finite_or_null(b.omega_sq_bound_proof);
  out["zeta_sq_bound"] = finite_or_null(b.zeta_sq_bound);
  out["zeta_sq_bound_proof"] = finite_or_null(b.zeta_sq_bound_proof);
  out["coverage_threshold"] = finite_or_null(b.coverage_threshold);
  out["lambda_np"] = finite_or_null(b.lambda_np);
  out["lambda_0"] = finite_or_null(b.lambda_0);
  return out;
}

json check_json(const grpsel::BoundCheck& c) {
  return json{{"observed", c.observed}, {"bound", finite_or_null(c.bound)}, {"holds", c.holds}};
}

int cmd_diagnose(RunConfig config) {
  const auto start = std::chrono::steady_clock::now();
  if (config.data_path.empty() || config.groups_path.empty() || config.beta_path.empty())
    throw std::invalid_argument("--data, --groups and --beta are required");
  if (config.sigma < 0.0) throw std::invalid_argument("--sigma must be nonnegative");

  const grpsel::RegressionData data =
      grpsel::load_regression_data(config.data_path, config.groups_path);
  const grpsel::GroupedCoefficients beta_true =
      grpsel::read_coefficients(config.beta_path, data.design.groups());
  const int n = data.design.n();

  // defaults derived from the inputs are echoed back through the config
  if (config.small_groups.empty()) {
    for (int k = 0; k < data.design.groups().num_groups(); ++k)
      if (beta_true.group_norm(k) == 0.0) config.small_groups.push_back(k);
  }
  const grpsel::SparsityProfile profile =
      grpsel::sparsity_profile(beta_true, config.small_groups);
  if (config.q_star == 0)
    config.q_star = std::min(profile.num_groups, 2 * profile.q + 2);

  grpsel::SrcOptions src_opts;
  src_opts.exhaustive = config.src_mode == "exhaustive";
  if (config.src_mode != "exhaustive" && config.src_mode != "sampled")
    throw std::invalid_argument("--src must be exhaustive or sampled");
  src_opts.samples = config.src_samples;
  src_opts.seed = config.seed;
  grpsel::SrcCertificate certificate;
  try {
    certificate = grpsel::verify_src(data.design, config.q_star, src_opts);
  } catch (const std::invalid_argument& err) {
    const std::string what = err.what();
    if (what.find("exhaustive cap") != std::string::npos)
      throw NumericalError(what + " (pass --src sampled)");
    throw;
  }

  grpsel::Eta2Options eta_opts;
  eta_opts.seed = config.seed;
  const grpsel::Eta2Result eta =
      grpsel::eta2(data.design, beta_true, config.small_groups, eta_opts);

  bool lambda_auto = config.lambda_mode == "auto";
  if (lambda_auto) {
    const grpsel::BoundConstants probe = grpsel::eval_bounds(
        profile, certificate, eta.value, n, config.sigma, 1.0, config.c0, config.a_n);
    if (!std::isfinite(probe.lambda_np) || probe.lambda_np <= 0.0)
      throw std::invalid_argument(
          "cannot derive a penalty level from the inputs; pass --lambda explicitly");
    config.lambda = probe.lambda_np;
    config.lambda_mode = "fixed";
  }
  const grpsel::BoundConstants bounds =
      grpsel::eval_bounds(profile, certificate, eta.value, n, config.sigma, config.lambda,
                          config.c0, config.a_n);

  const grpsel::FitResult fit = grpsel::fit(
      data.design, data.y, grpsel::PenaltyConfig::uniform(config.lambda), solver_options(config));
  const grpsel::SelectionDiagnostics diag = grpsel::selection_diagnostics(
      data.design, beta_true, fit.beta, config.small_groups);
  const grpsel::SelectionBoundReport checks =
      grpsel::check_selection_bounds(bounds, diag, profile);
  const grpsel::ErrorBoundReport errors =
      grpsel::check_error_bounds(bounds, beta_true, fit.beta, data.design);

  std::optional<grpsel::RegularityReport> regularity;
  if (profile.q >= 1) {
    if (config.lambda_tilde == 0.0) config.lambda_tilde = config.lambda;
    if (config.r_n == 0.0)
      config.r_n = std::sqrt(static_cast<double>(n) /
                             (profile.q * std::log(static_cast<double>(profile.total_dim))));
    regularity = grpsel::check_regularity(profile, data.design, config.lambda_tilde, config.r_n);
  }

  json report = base_report(config);
  report["profile"] = {{"small_groups", profile.small_groups},
                       {"important_groups", profile.important_groups},
                       {"q", profile.q},
                       {"eta1", profile.eta1},
                       {"exactly_sparse", profile.exactly_sparse},
                       {"theta_a", profile.theta_a},
                       {"theta_b", profile.theta_b},
                       {"group_norms", profile.group_norms},
                       {"num_groups", profile.num_groups},
                       {"total_dim", profile.total_dim},
                       {"max_group_size", profile.max_group_size},
                       {"min_group_size", profile.min_group_size}};
  report["certificate"] = {{"q_star", certificate.q_star},
                           {"c_lower", certificate.c_lower},
                           {"c_upper", certificate.c_upper},
                           {"c_bar", finite_or_null(certificate.c_bar)},
                           {"exhaustive", certificate.exhaustive},
                           {"subsets_checked", certificate.subsets_checked}};
  report["eta2"] = {{"value", eta.value},
                    {"exact", eta.exact},
                    {"subsets_checked", eta.subsets_checked}};
  report["bounds"] = bounds_json(bounds);
  report["fit"] = {{"lambda", fit.penalty.lambda},
                   {"converged", fit.converged},
                   {"iterations", fit.iterations},
                   {"kkt_residual", fit.kkt_residual},
                   {"active_groups", fit.active_set}};
  report["selection"] = {{"q_hat", diag.q_hat},
                         {"omega_tilde", diag.omega_tilde},
                         {"zeta2", diag.zeta2},
                         {"selected", diag.selected},
                         {"important", diag.important},
                         {"missed_important", diag.missed_important},
                         {"union_count", diag.union_count}};
  report["selection_checks"] = {{"count", check_json(checks.count)},
                                {"omega_sq", check_json(checks.omega_sq)},
                                {"zeta_sq", check_json(checks.zeta_sq)},
                                {"coverage", check_json(checks.coverage)},
                                {"all_hold", checks.all_hold},
                                {"lambda", checks.lambda},
                                {"lambda_required", finite_or_null(checks.lambda_required)},
                                {"lambda_admissible", checks.lambda_admissible}};
  report["error_bounds"] = {{"coef_error", errors.coef_error},
                            {"pred_error", errors.pred_error},
                            {"coef_bound", finite_or_null(errors.coef_bound)},
                            {"pred_bound", finite_or_null(errors.pred_bound)},
                            {"coef_ratio", finite_or_null(errors.coef_ratio)},
                            {"pred_ratio", finite_or_null(errors.pred_ratio)},
                            {"coef_holds", errors.coef_holds},
                            {"pred_holds", errors.pred_holds},
                            {"coef_rate", finite_or_null(errors.coef_rate)},
                            {"pred_rate", finite_or_null(errors.pred_rate)}};
  if (regularity) {
    report["regularity"] = {
        {"general_initial_terms", regularity->general_initial_terms},
        {"refit_initial_terms", regularity->refit_initial_terms},
        {"important_gram_min", regularity->important_gram_min},
        {"important_gram_max", regularity->important_gram_max},
        {"lambda_tilde", config.lambda_tilde},
        {"r_n", config.r_n}};
  } else {
    report["regularity"] = nullptr;
  }
  report["wall_time_ms"] = elapsed_ms(start);

  const std::string serialized = report.dump(2) + "\n";
  if (!config.out_path.empty()) write_file(config.out_path, serialized);

  std::printf("profile: %d groups, %d columns, q = %d, eta1 = %g%s\n", profile.num_groups,
              profile.total_dim, profile.q, profile.eta1,
              profile.exactly_sparse ? " (exactly sparse)" : "");
  std::printf("spectrum: q* = %d, %s over %lld subsets, c in [%.4g, %.4g], c_bar = %.4g\n",
              certificate.q_star, certificate.exhaustive ? "exhaustive" : "sampled",
              static_cast<long long>(certificate.subsets_checked), certificate.c_lower,
              certificate.c_upper, certificate.c_bar);
  std::printf("eta2 = %g (%s), lambda = %.6g, lambda_np = %.6g, lambda_0 = %.6g\n", eta.value,
              eta.exact ? "exact" : "sampled lower bound", bounds.lambda, bounds.lambda_np,
              bounds.lambda_0);
  std::printf("fit: %d active groups, kkt = %.3g, %s\n", diag.q_hat, fit.kkt_residual,
              fit.converged ? "converged" : "NOT converged");
  std::printf("checks: count %d <= %.4g %s | omega^2 %.4g <= %.4g %s | zeta^2 %.4g <= %.4g %s | "
              "coverage %s | %s\n",
              checks.count.observed > 0 ? static_cast<int>(checks.count.observed) : 0,
              checks.count.bound, checks.count.holds ? "ok" : "VIOLATED", checks.omega_sq.observed,
              checks.omega_sq.bound, checks.omega_sq.holds ? "ok" : "VIOLATED",
              checks.zeta_sq.observed, checks.zeta_sq.bound,
              checks.zeta_sq.holds ? "ok" : "VIOLATED",
              checks.coverage.holds ? "ok" : "VIOLATED",
              checks.all_hold ? "all hold" : "violations above");
  std::printf("error: coef %.4g vs bound %.4g (ratio %.3g), pred %.4g vs %.4g (ratio %.3g)\n",
              errors.coef_error, errors.coef_bound, errors.coef_ratio, errors.pred_error,
              errors.pred_bound, errors.pred_ratio);

  if (!fit.converged) return report_convergence_failure(fit);
  return 0;
}

// the config file is applied before CLI11 runs so that explicit flags win
RunConfig preload_config(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc)
      path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0)
      path = arg.substr(9);
  }
  if (path.empty()) return {};
  return grpsel::load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig config;
  try {
    config = preload_config(argc, argv);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  }

  CLI::App app{"grouped sparse linear regression toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::string lambda_text;
  std::string seed_text;

  const auto add_shared = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file; explicit flags win");
    cmd->add_option("--kkt-tol", config.kkt_tol, "solver optimality tolerance");
    cmd->add_option("--max-iters", config.max_iters, "solver sweep budget");
    cmd->add_option("--objective-tol", config.objective_tol,
                    "stall threshold, 0 disables the stall check");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run a bundled benchmark scenario");
  simulate->add_option("--example", config.example, "scenario id, 1 to 6");
  simulate->add_option("--reps", config.replications, "replication count");
  simulate->add_option("--seed", config.seed, "base seed; replication r uses stream r");
  simulate->add_option("--method", config.method, "both, group_lasso or adaptive");
  simulate->add_option("--out", config.out_path, "write the JSON report here");
  simulate->add_option("--table", config.table_path, "also write the text table here");
  simulate->add_option("--config", config_path, "JSON config file; explicit flags win");

  const auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--data", config.data_path, "CSV, response first, header row");
    cmd->add_option("--groups", config.groups_path, "group map JSON");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit one model to a data file");
  add_data(fit);
  fit->add_option("--method", config.method, "group_lasso (default) or adaptive");
  fit->add_option("--lambda", lambda_text, "penalty level, or 'auto' for BIC over a grid");
  fit->add_option("--grid-points", config.grid_points, "auto grid length");
  fit->add_option("--grid-decade", config.grid_decade, "auto grid bottom over lambda_max");
  fit->add_option("--df-rule", config.df_rule, "coefficient_count or yuan_lin");
  fit->add_option("--out", config.out_path, "write the JSON report here (default stdout)");
  fit->add_option("--bic-csv", config.csv_path, "write the BIC table CSV here");
  add_shared(fit);

  CLI::App* path_cmd = app.add_subcommand("path", "BIC table over a penalty grid");
  add_data(path_cmd);
  path_cmd->add_option("--grid-points", config.grid_points, "grid length");
  path_cmd->add_option("--grid-decade", config.grid_decade, "grid bottom over lambda_max");
  path_cmd->add_option("--df-rule", config.df_rule, "coefficient_count or yuan_lin");
  path_cmd->add_option("--out", config.out_path, "write the JSON report here");
  path_cmd->add_option("--csv", config.csv_path, "write the BIC CSV here (default stdout)");
  add_shared(path_cmd);

  CLI::App* diagnose = app.add_subcommand("diagnose", "sparsity, spectrum and bound report");
  add_data(diagnose);
  diagnose->add_option("--beta", config.beta_path, "reference coefficients JSON");
  diagnose->add_option("--small-groups", config.small_groups,
                       "indices of the small set (default: exact zeros of beta)");
  diagnose->add_option("--sigma", config.sigma, "noise standard deviation");
  diagnose->add_option("--lambda", lambda_text,
                       "penalty level, or 'auto' for the noise-calibrated level");
  diagnose->add_option("--c0", config.c0, "slack constant in the calibrated level");
  diagnose->add_option("--a-n", config.a_n, "dimension floor inside the log term");
  diagnose->add_option("--q-star", config.q_star,
                       "spectrum subset size (default: 2q + 2, capped at the group count)");
  diagnose->add_option("--src", config.src_mode, "exhaustive or sampled");
  diagnose->add_option("--src-samples", config.src_samples, "subsets drawn in sampled mode");
  diagnose->add_option("--seed", config.seed, "seed for sampled modes");
  diagnose->add_option("--lambda-tilde", config.lambda_tilde,
                       "reweighted-stage level for the regularity report (default: lambda)");
  diagnose->add_option("--r-n", config.r_n,
                       "initial-estimator rate (default: sqrt(n / (q log N)))");
  diagnose->add_option("--out", config.out_path, "write the JSON report here");
  add_shared(diagnose);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);  // --help
    app.exit(err);
    return 2;
  }

  try {
    if (!lambda_text.empty()) {
      bool is_auto = false;
      const double value = parse_lambda(lambda_text, is_auto);
      config.lambda_mode = is_auto ? "auto" : "fixed";
      config.lambda = value;
    }
    if (simulate->parsed()) {
      config.command = "simulate";
      return cmd_simulate(std::move(config));
    }
    if (fit->parsed()) {
      config.command = "fit";
      return cmd_fit(std::move(config));
    }
    if (path_cmd->parsed()) {
      config.command = "path";
      return cmd_path(std::move(config));
    }
    config.command = "diagnose";
    return cmd_diagnose(std::move(config));
  } catch (const std::invalid_argument& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 3;
  }
}
