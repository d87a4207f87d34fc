#include <doctest.h>

#include <Eigen/Dense>
#include <stdexcept>

#include "grpsel/model.hpp"
#include "reference_solvers.hpp"

using namespace grpsel;

TEST_CASE("group structure indexing") {
  GroupStructure g({3, 1, 4});
  CHECK(g.num_groups() == 3);
  CHECK(g.total_dim() == 8);
  CHECK(g.offset(0) == 0);
  CHECK(g.offset(1) == 3);
  CHECK(g.offset(2) == 4);
  CHECK(g.size(2) == 4);
  CHECK(g.max_size() == 4);
  CHECK(g.min_size() == 1);
  CHECK(g.size_ratio() == doctest::Approx(4.0));
  CHECK(g == GroupStructure({3, 1, 4}));
  CHECK_FALSE(g == GroupStructure({3, 5}));
}

TEST_CASE("group structure rejects bad sizes") {
  CHECK_THROWS_AS(GroupStructure(std::vector<int>{}), std::invalid_argument);
  CHECK_THROWS_AS(GroupStructure({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(GroupStructure({-1}), std::invalid_argument);
}

TEST_CASE("design validates dimensions and exposes blocks") {
  Eigen::MatrixXd X = testref::random_matrix(6, 5, 11);
  GroupedDesign design(X, GroupStructure({2, 3}));
  CHECK(design.n() == 6);
  CHECK(design.group_block(1) == X.middleCols(2, 3));

  CHECK_THROWS_AS(GroupedDesign(X, GroupStructure({2, 2})),
                  std::invalid_argument);
  CHECK_THROWS_AS(GroupedDesign(Eigen::MatrixXd(0, 5), GroupStructure({2, 3})),
                  std::invalid_argument);
}

TEST_CASE("coefficients give block norms and active sets") {
  GroupStructure g({2, 2, 1});
  Eigen::VectorXd v(5);
  v << 3, 4, 0, 0, 1e-10;
  GroupedCoefficients beta(v, g);
  CHECK(beta.group_norm(0) == doctest::Approx(5.0));
  CHECK(beta.group_norm(1) == 0.0);
  CHECK(beta.active_set(0.0) == std::vector<int>{0, 2});
  CHECK(beta.active_set(1e-8) == std::vector<int>{0});

  Eigen::VectorXd norms = group_norms(beta);
  CHECK(norms.size() == 3);
  CHECK(norms[0] == doctest::Approx(5.0));
  CHECK(norms[2] == doctest::Approx(1e-10));

  CHECK(GroupedCoefficients::zero(g).values().isZero(0.0));
  CHECK_THROWS_AS(GroupedCoefficients(Eigen::VectorXd::Zero(4), g),
                  std::invalid_argument);
}

TEST_CASE("extract_submatrix keeps requested order") {
  Eigen::MatrixXd X = testref::random_matrix(5, 6, 17);
  GroupedDesign design(X, GroupStructure({2, 1, 3}));

  Eigen::MatrixXd sub = extract_submatrix(design, {2, 0});
  CHECK(sub.cols() == 5);
  CHECK(sub.leftCols(3) == X.middleCols(3, 3));
  CHECK(sub.rightCols(2) == X.leftCols(2));

  CHECK(extract_submatrix(design, {}).cols() == 0);
  CHECK(extract_submatrix(design, {}).rows() == 5);
  CHECK(extract_submatrix(design, {0, 1, 2}) == X);
  CHECK_THROWS_AS(extract_submatrix(design, {3}), std::invalid_argument);
  CHECK_THROWS_AS(extract_submatrix(design, {-1}), std::invalid_argument);
}

namespace {

GroupMetric random_spd_metric(const GroupStructure& g, std::uint64_t seed) {
  GroupMetric metric;
  for (int k = 0; k < g.num_groups(); ++k) {
    int d = g.size(k);
    Eigen::MatrixXd A = testref::random_matrix(d + 2, d, seed + k);
    metric.matrices.push_back(A.transpose() * A +
                              0.5 * Eigen::MatrixXd::Identity(d, d));
  }
  return metric;
}

}  // namespace

TEST_CASE("reparameterization turns the quadratic penalty into block norms") {
  GroupStructure g({2, 3, 1});
  GroupedDesign design(testref::random_matrix(12, 6, 23), g);
  GroupMetric metric = random_spd_metric(g, 31);

  Reparameterization rep = reparameterize(design, metric);

  for (int k = 0; k < g.num_groups(); ++k) {
    const Eigen::MatrixXd& Q = rep.factors[k];
    int d = g.size(k);
    // upper triangular and Q'Q = R/d
    for (int i = 1; i < d; ++i)
      for (int j = 0; j < i; ++j) CHECK(Q(i, j) == 0.0);
    CHECK((Q.transpose() * Q * double(d)).isApprox(metric.matrices[k], 1e-10));
    // X_k* Q_k = X_k
    CHECK((rep.design.group_block(k) * Q).isApprox(design.group_block(k), 1e-10));
  }

  // pointwise objective equality: X beta = X* beta* and the quadratic
  // penalty equals the plain sqrt(d_k)-weighted norm of beta*
  for (std::uint64_t s = 0; s < 5; ++s) {
    GroupedCoefficients beta(testref::random_vector(6, 100 + s), g);
    GroupedCoefficients beta_star = rep.to_transformed(beta);
    CHECK((design.matrix() * beta.values())
              .isApprox(rep.design.matrix() * beta_star.values(), 1e-10));
    double plain = 0.0;
    for (int k = 0; k < g.num_groups(); ++k)
      plain += std::sqrt(double(g.size(k))) * beta_star.group_norm(k);
    CHECK(general_penalty(beta, metric, 2.5) == doctest::Approx(2.5 * plain));
    // round trip
    CHECK(rep.to_original(beta_star).values().isApprox(beta.values(), 1e-10));
  }
}

TEST_CASE("reparameterization with R_k = d_k I is the identity") {
  GroupStructure g({2, 3});
  GroupedDesign design(testref::random_matrix(8, 5, 41), g);
  GroupMetric metric;
  metric.matrices.push_back(2.0 * Eigen::MatrixXd::Identity(2, 2));
  metric.matrices.push_back(3.0 * Eigen::MatrixXd::Identity(3, 3));

  Reparameterization rep = reparameterize(design, metric);
  CHECK(rep.design.matrix().isApprox(design.matrix(), 1e-12));
  for (const auto& Q : rep.factors)
    CHECK(Q.isApprox(Eigen::MatrixXd::Identity(Q.rows(), Q.cols()), 1e-12));
}

TEST_CASE("reparameterization rejects bad metrics") {
  GroupStructure g({2, 2});
  GroupedDesign design(testref::random_matrix(6, 4, 51), g);

  GroupMetric wrong_count;
  wrong_count.matrices.push_back(Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(reparameterize(design, wrong_count), std::invalid_argument);

  GroupMetric wrong_dim;
  wrong_dim.matrices.push_back(Eigen::MatrixXd::Identity(2, 2));
  wrong_dim.matrices.push_back(Eigen::MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(reparameterize(design, wrong_dim), std::invalid_argument);

  GroupMetric asym;
  Eigen::MatrixXd A(2, 2);
  A << 1, 2, 0, 1;
  asym.matrices.push_back(A);
  asym.matrices.push_back(Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(reparameterize(design, asym), std::invalid_argument);

  GroupMetric not_pd;
  not_pd.matrices.push_back(Eigen::MatrixXd::Identity(2, 2));
  not_pd.matrices.push_back(-Eigen::MatrixXd::Identity(2, 2));
  try {
    reparameterize(design, not_pd);
    CHECK(false);
  } catch (const std::invalid_argument& e) {
    // the offending group is named
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("zero tolerance scales with response magnitude") {
  Eigen::VectorXd small = Eigen::VectorXd::Constant(4, 0.01);
  CHECK(zero_tolerance(small) == doctest::Approx(1e-8));

  Eigen::VectorXd large = Eigen::VectorXd::Constant(4, 50.0);
  CHECK(zero_tolerance(large) == doctest::Approx(50.0 * 1e-8));
}

TEST_CASE("standardize centers and scales") {
  Eigen::MatrixXd X = testref::random_matrix(20, 4, 61);
  X.col(2).setConstant(7.0);  // degenerate column
  Eigen::VectorXd y = testref::random_vector(20, 62).array() + 3.0;
  GroupedDesign design(X, GroupStructure({2, 2}));

  Standardization std_out = standardize(design, y);
  const Eigen::MatrixXd& Z = std_out.design.matrix();
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(Z.col(j).mean()) < 1e-12);
    if (j != 2) {
      double sd = std::sqrt(Z.col(j).squaredNorm() / 19.0);
      CHECK(sd == doctest::Approx(1.0));
    }
  }
  CHECK(Z.col(2).isZero(1e-12));
  CHECK(std_out.column_scale[2] == 1.0);
  CHECK(std::abs(std_out.y.mean()) < 1e-12);
  CHECK(std_out.y_center == doctest::Approx(y.mean()));

  // reconstruction
  for (int j = 0; j < 4; ++j) {
    Eigen::VectorXd rebuilt =
        Z.col(j) * std_out.column_scale[j] +
        Eigen::VectorXd::Constant(20, std_out.column_center[j]);
    CHECK(rebuilt.isApprox(X.col(j), 1e-12));
  }
}
