#pragma once

#include <string>
#include <vector>

#include "grpsel/solver.hpp"

namespace grpsel {

/// How many effective degrees of freedom a fit spends.
enum class DfRule {
  coefficient_count,  // sum of d_k over active groups
  yuan_lin            // sum of 1 + (||b_k|| / ||b_k_ols||)(d_k - 1); needs n > N_d
};

struct BicRecord {
  double lambda = 0.0;
  double rss = 0.0;
  double df = 0.0;
  double bic = 0.0;
  int active_groups = 0;
};

/// n log(rss/n) + log(n) df. Throws std::domain_error when rss <= 0 (a
/// perfect fit has no finite score).
double bic_score(int n, double rss, double df);

struct BicSelection {
  int index = 0;  // position of the chosen fit in the path
  std::vector<BicRecord> records;
};

/// Scores every fit in the path and picks the BIC argmin; ties go to the
/// larger penalty (the sparser model). Perfect fits propagate the
/// bic_score domain error.
BicSelection select_by_bic(const std::vector<FitResult>& path,
                           const GroupedDesign& design,
                           const Eigen::VectorXd& y,
                           DfRule rule = DfRule::coefficient_count);

/// Degrees of freedom of one fit under the given rule.
double degrees_of_freedom(const FitResult& result, const GroupedDesign& design,
                          const Eigen::VectorXd& y, DfRule rule);

/// Default selection grid: `points` geometric steps from lambda_max down by
/// the factor `decade`.
std::vector<double> default_lambda_grid(const GroupedDesign& design,
                                        const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& weights = {},
                                        int points = 100, double decade = 1e-3);

/// CSV table with header lambda,rss,df,bic,active_groups.
std::string bic_table_csv(const std::vector<BicRecord>& records);

}  // namespace grpsel
