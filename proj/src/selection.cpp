#include "grpsel/selection.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace grpsel {

double bic_score(int n, double rss, double df) {
  if (n < 1) throw std::invalid_argument("bic_score: n must be at least 1");
  if (!(rss > 0.0))
    throw std::domain_error("bic_score: rss must be positive");
  return double(n) * std::log(rss / double(n)) + std::log(double(n)) * df;
}

double degrees_of_freedom(const FitResult& result, const GroupedDesign& design,
                          const Eigen::VectorXd& y, DfRule rule) {
  const GroupStructure& groups = design.groups();
  if (rule == DfRule::coefficient_count) {
    double df = 0.0;
    for (int k : result.active_set) df += double(groups.size(k));
    return df;
  }

  // yuan_lin: 1 + (||b_k|| / ||b_k_ols||)(d_k - 1) per active group
  if (design.n() <= groups.total_dim())
    throw std::invalid_argument(
        "degrees_of_freedom: the yuan_lin rule needs more rows than columns");
  Eigen::VectorXd ols = design.matrix().colPivHouseholderQr().solve(y);
  GroupedCoefficients ols_beta(ols, groups);
  double df = 0.0;
  for (int k : result.active_set) {
    double ratio = 1.0;
    double denom = ols_beta.group_norm(k);
    if (denom > 0.0) ratio = result.beta.group_norm(k) / denom;
    df += 1.0 + ratio * double(groups.size(k) - 1);
  }
  return df;
}

BicSelection select_by_bic(const std::vector<FitResult>& path,
                           const GroupedDesign& design,
                           const Eigen::VectorXd& y, DfRule rule) {
  if (path.empty())
    throw std::invalid_argument("select_by_bic: empty path");

  BicSelection out;
  out.records.reserve(path.size());
  int best = -1;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const FitResult& r = path[i];
    BicRecord rec;
    rec.lambda = r.penalty.lambda;
    rec.rss = r.rss;
    rec.df = degrees_of_freedom(r, design, y, rule);
    rec.bic = bic_score(design.n(), r.rss, rec.df);
    rec.active_groups = int(r.active_set.size());
    out.records.push_back(rec);

    if (best < 0 || rec.bic < out.records[best].bic ||
        (rec.bic == out.records[best].bic &&
         rec.lambda > out.records[best].lambda))
      best = int(i);
  }
  out.index = best;
  return out;
}

std::vector<double> default_lambda_grid(const GroupedDesign& design,
                                        const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& weights,
                                        int points, double decade) {
  double top = lambda_max(design, y, weights);
  if (top <= 0.0)
    throw std::invalid_argument(
        "default_lambda_grid: lambda_max is zero (response orthogonal to design)");
  return geometric_grid(top, decade, points);
}

std::string bic_table_csv(const std::vector<BicRecord>& records) {
  std::string csv = "lambda,rss,df,bic,active_groups\n";
  char line[192];
  for (const BicRecord& r : records) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%d\n", r.lambda,
                  r.rss, r.df, r.bic, r.active_groups);
    csv += line;
  }
  return csv;
}

}  // namespace grpsel
