#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "grpsel/adaptive.hpp"
#include "grpsel/selection.hpp"
#include "grpsel/simgen.hpp"

using namespace grpsel;

namespace {

ExampleSpec tiny_spec() {
  ExampleSpec spec;
  spec.example_id = 0;
  spec.n = 60;
  spec.rho = 0.6;
  spec.sigma = 1.0;
  spec.groups = GroupStructure({2, 2, 2, 2});
  spec.beta_true = GroupedCoefficients::zero(spec.groups);
  spec.beta_true.group(0) << 1.5, -1.0;
  spec.beta_true.group(1) << 1.0, 1.0;
  return spec;
}

double sample_covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  return ((a.array() - ma) * (b.array() - mb)).sum() / static_cast<double>(a.size() - 1);
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_distance(Eigen::VectorXd values) {
  std::sort(values.data(), values.data() + values.size());
  const auto n = static_cast<double>(values.size());
  double dist = 0.0;
  for (int i = 0; i < values.size(); ++i) {
    const double cdf = standard_normal_cdf(values[i]);
    dist = std::max(dist, std::abs(cdf - static_cast<double>(i + 1) / n));
    dist = std::max(dist, std::abs(cdf - static_cast<double>(i) / n));
  }
  return dist;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

TEST_CASE("benchmark specs encode the six scenarios") {
  SUBCASE("shared settings") {
    for (int id = 1; id <= 6; ++id) {
      const ExampleSpec spec = ExampleSpec::benchmark(id);
      CHECK(spec.example_id == id);
      CHECK(spec.n == 200);
      CHECK(spec.rho == 0.6);
      CHECK(spec.sigma == 3.0);
      CHECK(spec.beta_true.groups() == spec.groups);
    }
  }

  SUBCASE("first scenario") {
    const ExampleSpec spec = ExampleSpec::benchmark(1);
    REQUIRE(spec.groups.num_groups() == 10);
    CHECK(spec.groups.total_dim() == 50);
    for (int k = 0; k < 10; ++k) CHECK(spec.groups.size(k) == 5);
    CHECK(spec.beta_true.active_set() == std::vector<int>{0, 1});
    CHECK(to_vector(spec.beta_true.group(0)) == std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5});
    CHECK(to_vector(spec.beta_true.group(1)) == std::vector<double>{2.0, 2.0, 2.0, 2.0, 2.0});
    CHECK(spec.beta_true.values().squaredNorm() == doctest::Approx(33.75).epsilon(1e-12));
  }

  SUBCASE("second scenario") {
    const ExampleSpec spec = ExampleSpec::benchmark(2);
    CHECK(spec.groups.total_dim() == 50);
    CHECK(spec.beta_true.active_set() == std::vector<int>{0, 1, 2, 3});
    CHECK(to_vector(spec.beta_true.group(0)) == std::vector<double>{0.5, 1.0, 1.5, 1.0, 0.5});
    CHECK(to_vector(spec.beta_true.group(2)) == std::vector<double>{-1.0, 0.0, 1.0, 2.0, 1.5});
    CHECK(to_vector(spec.beta_true.group(3)) == std::vector<double>{-1.5, 1.0, 0.5, 0.5, 0.5});
  }

  SUBCASE("third scenario widens the second beyond n") {
    const ExampleSpec spec = ExampleSpec::benchmark(3);
    const ExampleSpec narrow = ExampleSpec::benchmark(2);
    REQUIRE(spec.groups.num_groups() == 210);
    CHECK(spec.groups.total_dim() == 1050);
    CHECK(spec.groups.total_dim() > spec.n);
    CHECK(spec.beta_true.active_set() == narrow.beta_true.active_set());
    CHECK(spec.beta_true.values().head(20) == narrow.beta_true.values().head(20));
    CHECK(spec.beta_true.values().tail(1030).norm() == 0.0);
  }

  SUBCASE("fourth scenario mixes group sizes") {
    const ExampleSpec spec = ExampleSpec::benchmark(4);
    REQUIRE(spec.groups.num_groups() == 10);
    CHECK(spec.groups.total_dim() == 40);
    for (int k = 0; k < 5; ++k) CHECK(spec.groups.size(k) == 5);
    for (int k = 5; k < 10; ++k) CHECK(spec.groups.size(k) == 3);
    CHECK(spec.beta_true.active_set() == std::vector<int>{0, 1, 5});
    CHECK(to_vector(spec.beta_true.group(1)) == std::vector<double>{2.0, 0.0, 0.0, 2.0, 2.0});
    CHECK(to_vector(spec.beta_true.group(5)) == std::vector<double>{-1.0, -2.0, -3.0});
  }

  SUBCASE("fifth scenario") {
    const ExampleSpec spec = ExampleSpec::benchmark(5);
    CHECK(spec.groups.total_dim() == 40);
    CHECK(spec.beta_true.active_set() == std::vector<int>{0, 1, 2, 3, 5, 6, 7, 8});
    CHECK(to_vector(spec.beta_true.group(2)) == std::vector<double>{-1.0, 0.0, 1.0, 2.0, 3.0});
    CHECK(to_vector(spec.beta_true.group(3)) == std::vector<double>{-1.5, 2.0, 0.0, 0.0, 0.0});
    CHECK(to_vector(spec.beta_true.group(6)) == std::vector<double>{0.0, -3.0, 1.5});
    CHECK(to_vector(spec.beta_true.group(8)) == std::vector<double>{-2.0, -2.0, -2.0});
    CHECK(spec.beta_true.group_norm(4) == 0.0);
    CHECK(spec.beta_true.group_norm(9) == 0.0);
  }

  SUBCASE("sixth scenario widens the fifth") {
    const ExampleSpec spec = ExampleSpec::benchmark(6);
    const ExampleSpec narrow = ExampleSpec::benchmark(5);
    REQUIRE(spec.groups.num_groups() == 210);
    CHECK(spec.groups.total_dim() == 830);
    CHECK(spec.groups.size(99) == 5);
    CHECK(spec.groups.size(100) == 3);
    CHECK(spec.beta_true.active_set() == std::vector<int>{0, 1, 2, 3, 100, 101, 102, 103});
    CHECK(spec.beta_true.values().head(20) == narrow.beta_true.values().head(20));
    CHECK(to_vector(spec.beta_true.group(100)) == to_vector(narrow.beta_true.group(5)));
    CHECK(to_vector(spec.beta_true.group(103)) == to_vector(narrow.beta_true.group(8)));
  }

  SUBCASE("ids outside the catalog") {
    CHECK_THROWS_AS((void)ExampleSpec::benchmark(0), std::invalid_argument);
    CHECK_THROWS_AS((void)ExampleSpec::benchmark(7), std::invalid_argument);
  }
}

TEST_CASE("generator matches its analytic covariance") {
  ExampleSpec spec = ExampleSpec::benchmark(1);
  spec.n = 100000;
  const SimulatedData data = generate(spec, 2024);
  const Eigen::MatrixXd& x = data.design.matrix();
  const Eigen::MatrixXd pop = population_covariance(spec);

  SUBCASE("moments of sampled column pairs") {
    CHECK(std::abs(x.col(0).mean()) <= 0.02);
    CHECK(std::abs(x.col(37).mean()) <= 0.02);
    const std::vector<std::pair<int, int>> pairs = {{0, 0},  {0, 1},  {3, 4},  {0, 5},
                                                    {2, 9},  {0, 10}, {0, 45}, {22, 23},
                                                    {20, 26}, {49, 49}};
    for (const auto& [a, b] : pairs) {
      CAPTURE(a);
      CAPTURE(b);
      CHECK(std::abs(sample_covariance(x.col(a), x.col(b)) - pop(a, b)) <= 0.02);
    }
  }

  SUBCASE("marginals are standard normal") {
    CHECK(ks_distance(x.col(0)) <= 0.02);
    CHECK(ks_distance(x.col(31)) <= 0.02);
    const Eigen::VectorXd noise = (data.y - x * data.beta_true.values()) / spec.sigma;
    CHECK(ks_distance(noise) <= 0.02);
  }
}

TEST_CASE("analytic covariance entries and shape") {
  const ExampleSpec spec = ExampleSpec::benchmark(4);
  const Eigen::MatrixXd pop = population_covariance(spec);
  REQUIRE(pop.rows() == 40);
  REQUIRE(pop.cols() == 40);
  CHECK(pop(7, 7) == 1.0);
  CHECK(pop(0, 4) == 0.5);
  CHECK(pop(25, 27) == 0.5);
  CHECK(pop(0, 5) == doctest::Approx(0.5 * 0.6).epsilon(1e-15));
  CHECK(pop(0, 25) == doctest::Approx(0.5 * std::pow(0.6, 5)).epsilon(1e-15));
  CHECK(pop == pop.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(pop);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("generation is deterministic and stream-separated") {
  const ExampleSpec spec = tiny_spec();

  SUBCASE("same seed and stream reproduce bytes") {
    const SimulatedData a = generate(spec, 99, 4);
    const SimulatedData b = generate(spec, 99, 4);
    CHECK(a.design.matrix() == b.design.matrix());
    CHECK(a.y == b.y);
  }

  SUBCASE("different streams decorrelate") {
    const SimulatedData a = generate(spec, 99, 4);
    const SimulatedData c = generate(spec, 99, 5);
    const SimulatedData d = generate(spec, 100, 4);
    CHECK((a.design.matrix() - c.design.matrix()).cwiseAbs().maxCoeff() > 1e-3);
    CHECK((a.design.matrix() - d.design.matrix()).cwiseAbs().maxCoeff() > 1e-3);
  }

  SUBCASE("noiseless responses sit on the regression surface") {
    ExampleSpec clean = spec;
    clean.sigma = 0.0;
    const SimulatedData data = generate(clean, 7);
    CHECK((data.y - data.design.matrix() * data.beta_true.values()).norm() == 0.0);
  }

  SUBCASE("invalid settings are rejected") {
    ExampleSpec bad = spec;
    bad.n = 0;
    CHECK_THROWS_AS((void)generate(bad, 1), std::invalid_argument);
    bad = spec;
    bad.rho = 1.0;
    CHECK_THROWS_AS((void)generate(bad, 1), std::invalid_argument);
    bad = spec;
    bad.sigma = -1.0;
    CHECK_THROWS_AS((void)generate(bad, 1), std::invalid_argument);
    bad = spec;
    bad.groups = GroupStructure({4, 4});
    CHECK_THROWS_AS((void)generate(bad, 1), std::invalid_argument);
  }
}

TEST_CASE("scenarios extending the factor list share leading columns") {
  const SimulatedData narrow = generate(ExampleSpec::benchmark(2), 314, 6);
  const SimulatedData wide = generate(ExampleSpec::benchmark(3), 314, 6);
  REQUIRE(narrow.design.matrix().cols() == 50);
  REQUIRE(wide.design.matrix().cols() == 1050);
  CHECK((wide.design.matrix().leftCols(20) - narrow.design.matrix().leftCols(20))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  // identical active coefficients and error stream, so the responses agree up
  // to summation order in the wider product
  CHECK((wide.y - narrow.y).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("model error is the covariance-weighted squared distance") {
  const ExampleSpec spec = tiny_spec();
  const Eigen::MatrixXd pop = population_covariance(spec);

  SUBCASE("zero at the truth") {
    CHECK(model_error(spec.beta_true, spec.beta_true, pop) == 0.0);
  }

  SUBCASE("identity covariance reduces to squared distance") {
    GroupedCoefficients hat = GroupedCoefficients::zero(spec.groups);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(8, 8);
    CHECK(model_error(hat, spec.beta_true, identity) ==
          doctest::Approx(spec.beta_true.values().squaredNorm()).epsilon(1e-12));
  }

  SUBCASE("hand-worked quadratic") {
    const GroupStructure groups({2});
    GroupedCoefficients truth = GroupedCoefficients::zero(groups);
    truth.values() << 1.0, -1.0;
    GroupedCoefficients hat = GroupedCoefficients::zero(groups);
    hat.values() << 2.0, 1.0;
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, 0.25, 0.25, 1.0;
    // diff = (1, 2): 1 + 4 + 2 * 0.25 * 2 = 6
    CHECK(model_error(hat, truth, cov) == doctest::Approx(6.0).epsilon(1e-12));
  }

  SUBCASE("dimension mismatches") {
    GroupedCoefficients other = GroupedCoefficients::zero(GroupStructure({2, 2}));
    CHECK_THROWS_AS((void)model_error(other, spec.beta_true, pop), std::invalid_argument);
    CHECK_THROWS_AS((void)model_error(spec.beta_true, spec.beta_true,
                                      Eigen::MatrixXd::Identity(3, 3)),
                    std::invalid_argument);
  }
}

TEST_CASE("interpolated quantiles") {
  const std::vector<double> sorted = {1.0, 2.0, 3.0, 4.0};
  CHECK(sample_quantile(sorted, 0.0) == 1.0);
  CHECK(sample_quantile(sorted, 0.25) == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(sample_quantile(sorted, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(sample_quantile(sorted, 0.75) == doctest::Approx(3.25).epsilon(1e-15));
  CHECK(sample_quantile(sorted, 1.0) == 4.0);
  CHECK(sample_quantile({5.0}, 0.5) == 5.0);
  CHECK(sample_quantile({1.0, 3.0}, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS((void)sample_quantile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_quantile(sorted, 1.5), std::invalid_argument);
}

TEST_CASE("replication harness") {
  const ExampleSpec spec = tiny_spec();

  SUBCASE("a single replication equals the hand-composed pipeline") {
    const std::uint64_t seed = 11;
    const SimulatedData data = generate(spec, seed, 0);
    const std::vector<double> grid = default_lambda_grid(data.design, data.y);
    const TwoStageResult two = two_stage(data.design, data.y, grid);
    const Eigen::MatrixXd pop = population_covariance(spec);

    const ReplicationReport report = run_replications(spec, 1, seed);
    REQUIRE(report.records.size() == 1);
    const ReplicationRecord& rec = report.records.front();
    CHECK(rec.converged);
    CHECK(rec.selected_initial == static_cast<int>(two.initial.active_set.size()));
    CHECK(rec.selected_final == static_cast<int>(two.final.active_set.size()));
    CHECK(rec.me_initial == model_error(two.initial.beta, data.beta_true, pop));
    CHECK(rec.me_final == model_error(two.final.beta, data.beta_true, pop));
    CHECK(rec.lambda_initial == two.initial.penalty.lambda);
    CHECK(rec.lambda_final == two.final.penalty.lambda);

    CHECK(report.group_lasso.mean_selected == static_cast<double>(rec.selected_initial));
    CHECK(report.group_lasso.median_selected == report.group_lasso.mean_selected);
    CHECK(report.group_lasso.q25 == report.group_lasso.mean_selected);
    CHECK(report.group_lasso.q75 == report.group_lasso.mean_selected);
    CHECK(report.group_lasso.se_selected == 0.0);
    CHECK(report.adaptive.mean_model_error == rec.me_final);
    CHECK(report.failures == 0);
  }

  SUBCASE("reports are reproducible") {
    const ReplicationReport a = run_replications(spec, 8, 21);
    const ReplicationReport b = run_replications(spec, 8, 21);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].selected_final == b.records[i].selected_final);
      CHECK(a.records[i].me_final == b.records[i].me_final);
      CHECK(a.records[i].lambda_final == b.records[i].lambda_final);
    }
    CHECK(a.group_lasso.mean_model_error == b.group_lasso.mean_model_error);
    CHECK(a.adaptive.pct_sel == b.adaptive.pct_sel);
  }

  SUBCASE("aggregate invariants") {
    const ReplicationReport report = run_replications(spec, 12, 3);
    for (const SimulationMetrics& m : {report.group_lasso, report.adaptive}) {
      CHECK(m.q25 <= m.median_selected);
      CHECK(m.median_selected <= m.q75);
      CHECK(m.pct_sel <= m.pct_incl);
      CHECK(m.pct_incl <= 100.0);
      CHECK(m.pct_sel >= 0.0);
      CHECK(m.mean_model_error >= 0.0);
      CHECK(m.se_incl <= 50.0);
    }
    CHECK(report.failures == 0);
    // strong signal at n = 60: the truth should be found most of the time
    CHECK(report.adaptive.pct_incl >= 75.0);
  }

  SUBCASE("first stage alone matches the first stage of the full run") {
    const ReplicationReport only = run_replications(spec, 6, 17, SimMethod::group_lasso);
    const ReplicationReport full = run_replications(spec, 6, 17, SimMethod::both);
    CHECK(only.group_lasso.mean_selected == full.group_lasso.mean_selected);
    CHECK(only.group_lasso.mean_model_error == full.group_lasso.mean_model_error);
    CHECK(only.group_lasso.pct_sel == full.group_lasso.pct_sel);
    for (std::size_t i = 0; i < only.records.size(); ++i) {
      CHECK(only.records[i].selected_initial == full.records[i].selected_initial);
      CHECK(only.records[i].lambda_initial == full.records[i].lambda_initial);
      CHECK(only.records[i].selected_final == 0);
      CHECK(only.records[i].lambda_final == 0.0);
    }
    CHECK(only.adaptive.mean_selected == 0.0);
    CHECK(only.adaptive.pct_incl == 0.0);
  }

  SUBCASE("at least one replication required") {
    CHECK_THROWS_AS((void)run_replications(spec, 0, 1), std::invalid_argument);
  }
}
