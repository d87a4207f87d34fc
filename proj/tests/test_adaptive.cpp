#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "grpsel/adaptive.hpp"
#include "reference_solvers.hpp"

using namespace grpsel;

namespace {

GroupedDesign make_design(int n, const GroupStructure& g, std::uint64_t seed) {
  return GroupedDesign(testref::random_matrix(n, g.total_dim(), seed), g);
}

bool is_subset(const std::vector<int>& inner, const std::vector<int>& outer) {
  return std::all_of(inner.begin(), inner.end(), [&](int k) {
    return std::find(outer.begin(), outer.end(), k) != outer.end();
  });
}

}  // namespace

TEST_CASE("adaptive weights invert the initial block norms") {
  GroupStructure g({1, 1, 1});
  Eigen::VectorXd v(3);
  v << 2.0, 0.5, 0.0;
  GroupedCoefficients initial(v, g);

  Eigen::VectorXd w = adaptive_weights(initial);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(2.0));
  CHECK(std::isinf(w[2]));

  // weight times norm is one on the active set
  GroupStructure g2({2, 3, 2});
  GroupedCoefficients random_initial(testref::random_vector(7, 6001), g2);
  Eigen::VectorXd w2 = adaptive_weights(random_initial);
  for (int k = 0; k < 3; ++k)
    CHECK(w2[k] * random_initial.group_norm(k) == doctest::Approx(1.0));

  // a tolerance treats tiny norms as zero
  Eigen::VectorXd tiny(3);
  tiny << 1.0, 1e-12, 0.0;
  Eigen::VectorXd w3 = adaptive_weights(GroupedCoefficients(tiny, g), 1e-8);
  CHECK(w3[0] == doctest::Approx(1.0));
  CHECK(std::isinf(w3[1]));
  CHECK(std::isinf(w3[2]));

  CHECK(adaptive_weights(GroupedCoefficients::zero(g)).allFinite() == false);
}

TEST_CASE("rescale-fit-unscale equals the directly weighted fit") {
  GroupStructure g({2, 3, 2, 1});
  GroupedDesign design = make_design(30, g, 6101);
  Eigen::VectorXd beta_true = Eigen::VectorXd::Zero(8);
  beta_true.segment(0, 2) << 2, -1;
  beta_true.segment(5, 2) << 1.5, 1.0;
  Eigen::VectorXd y = design.matrix() * beta_true +
                      0.3 * testref::random_vector(30, 6102);

  SolverOptions opts;
  opts.kkt_tol = 1e-10;
  opts.objective_tol = 0.0;

  FitResult stage1 = fit(design, y, PenaltyConfig::uniform(2.0), opts);
  REQUIRE(stage1.active_set.size() >= 1);
  REQUIRE(stage1.active_set.size() < 4);

  AdaptiveConfig config{1.5};
  FitResult via_rescale =
      adaptive_fit(design, y, stage1.beta, config, opts, stage1.zero_tol);

  Eigen::VectorXd w = adaptive_weights(stage1.beta, stage1.zero_tol);
  FitResult direct = fit(design, y, PenaltyConfig{1.5, w}, opts);

  CHECK((via_rescale.beta.values() - direct.beta.values()).norm() < 1e-8);
  CHECK(via_rescale.kkt_residual <= opts.kkt_tol);
  CHECK(via_rescale.converged);

  // dropped groups stay exactly zero
  for (int k = 0; k < 4; ++k) {
    if (std::isinf(w[k])) CHECK(via_rescale.beta.group(k).isZero(0.0));
  }
}

TEST_CASE("adaptive fit at zero penalty is least squares on survivors") {
  GroupStructure g({2, 2});
  GroupedDesign design = make_design(20, g, 6201);
  Eigen::VectorXd y = testref::random_vector(20, 6202);

  SolverOptions opts;
  opts.kkt_tol = 1e-9;
  opts.objective_tol = 0.0;
  opts.max_iters = 100000;

  GroupedCoefficients all_active(Eigen::VectorXd::Ones(4), g);
  FitResult res = adaptive_fit(design, y, all_active, AdaptiveConfig{0.0}, opts);
  Eigen::VectorXd ols = design.matrix().colPivHouseholderQr().solve(y);
  CHECK((res.beta.values() - ols).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("an all-zero initial estimate gives the zero fit") {
  GroupStructure g({2, 2});
  GroupedDesign design = make_design(15, g, 6301);
  Eigen::VectorXd y = testref::random_vector(15, 6302);

  FitResult res = adaptive_fit(design, y, GroupedCoefficients::zero(g),
                               AdaptiveConfig{1.0});
  CHECK(res.beta.values().isZero(0.0));
  CHECK(res.converged);
  CHECK(res.rss == doctest::Approx(y.squaredNorm()));
  CHECK(res.active_set.empty());
}

TEST_CASE("two stage pipeline refines the first-stage model") {
  GroupStructure g({2, 2, 2, 2, 2});
  GroupedDesign design = make_design(60, g, 6401);
  Eigen::VectorXd beta_true = Eigen::VectorXd::Zero(10);
  beta_true.segment(0, 2) << 2.5, -2.0;
  beta_true.segment(2, 2) << 1.5, 1.0;
  Eigen::VectorXd y = design.matrix() * beta_true +
                      testref::random_vector(60, 6402);

  std::vector<double> grid1 = default_lambda_grid(design, y, {}, 60);
  TwoStageResult ts = two_stage(design, y, grid1);

  CHECK_FALSE(ts.degenerate);
  CHECK(is_subset(ts.final.active_set, ts.initial.active_set));
  CHECK(ts.stage2_grid.size() == 50);

  // dropped groups are pinned in the final fit
  for (int k : ts.dropped_groups) {
    CHECK(ts.final.beta.group(k).isZero(0.0));
    CHECK(std::isinf(ts.weights[k]));
  }
  for (int k : ts.initial.active_set)
    CHECK(ts.weights[k] ==
          doctest::Approx(1.0 / ts.initial.beta.group_norm(k)));

  // bookkeeping lines up with the chosen fits
  CHECK(ts.stage1.records[ts.stage1.index].lambda ==
        doctest::Approx(ts.initial.penalty.lambda));
  CHECK(ts.stage2.records[ts.stage2.index].lambda ==
        doctest::Approx(ts.final.penalty.lambda));

  // both true groups found here
  CHECK(is_subset({0, 1}, ts.final.active_set));
}

TEST_CASE("two stage selects nothing on pure noise most of the time") {
  GroupStructure g({2, 2, 2, 2});
  int both_empty = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    GroupedDesign design = make_design(40, g, 7000 + rep);
    Eigen::VectorXd y = testref::random_vector(40, 7500 + rep);
    std::vector<double> grid = default_lambda_grid(design, y, {}, 50);
    TwoStageResult ts = two_stage(design, y, grid);
    if (ts.initial.active_set.empty() && ts.final.active_set.empty())
      ++both_empty;
  }
  CHECK(both_empty >= 95);
}

TEST_CASE("selection is invariant to a joint response and grid rescale") {
  GroupStructure g({2, 3, 2});
  GroupedDesign design = make_design(35, g, 6501);
  Eigen::VectorXd beta_true = Eigen::VectorXd::Zero(7);
  beta_true.segment(0, 2) << 2, 1;
  Eigen::VectorXd y = design.matrix() * beta_true +
                      0.7 * testref::random_vector(35, 6502);

  const double c = 4.0;
  std::vector<double> grid = default_lambda_grid(design, y, {}, 40);
  std::vector<double> scaled_grid = grid;
  for (double& v : scaled_grid) v *= c;

  TwoStageResult base = two_stage(design, y, grid);
  TwoStageResult scaled = two_stage(design, c * y, scaled_grid);

  CHECK(base.initial.active_set == scaled.initial.active_set);
  CHECK(base.final.active_set == scaled.final.active_set);
  CHECK((scaled.final.beta.values() - c * base.final.beta.values())
            .lpNorm<Eigen::Infinity>() < 1e-5 * c);
}

TEST_CASE("degenerate stage one is flagged") {
  GroupStructure g({2, 2});
  GroupedDesign design = make_design(25, g, 6601);
  Eigen::VectorXd y = testref::random_vector(25, 6602);

  // a grid pinned at lambda_max keeps stage one empty
  double top = lambda_max(design, y);
  TwoStageResult ts = two_stage(design, y, {2.0 * top, top});
  CHECK(ts.degenerate);
  CHECK(ts.initial.active_set.empty());
  CHECK(ts.final.beta.values().isZero(0.0));
  CHECK(ts.final.converged);
  CHECK(ts.dropped_groups.size() == 2);
  CHECK(ts.stage2.records.empty());
}
