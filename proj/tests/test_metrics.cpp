#include "doctest.h"

#include <cmath>
#include <vector>

#include "mgfactor/errors.hpp"
#include "mgfactor/metrics.hpp"
#include "support.hpp"

using namespace mgf;

TEST_CASE("RV coefficient examples") {
  Rng rng(71);
  const Eigen::MatrixXd x = rng.normal_matrix(7, 3);
  CHECK(rv_coefficient(x, x) == doctest::Approx(1.0));

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 1), b = Eigen::MatrixXd::Zero(4, 1);
  a(0, 0) = 1.0;
  a(1, 0) = 2.0;
  b(2, 0) = 1.0;
  b(3, 0) = -1.0;
  CHECK(rv_coefficient(a, b) == 0.0);

  Eigen::MatrixXd p(2, 1), q(2, 1);
  p << 1, 0;
  q << 1, 1;
  CHECK(rv_coefficient(p, q) == doctest::Approx(0.5));

  CHECK_THROWS_AS(rv_coefficient(p, Eigen::MatrixXd::Ones(3, 1)), InvalidDimension);
  CHECK_THROWS_AS(rv_coefficient(p, Eigen::MatrixXd::Zero(2, 1)), NumericalError);
  CHECK(rv_coefficient_gram(p * p.transpose(), q * q.transpose()) == doctest::Approx(0.5));
}

TEST_CASE("RV coefficient invariances") {
  Rng rng(72);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd x = rng.normal_matrix(9, 3);
    const Eigen::MatrixXd y = rng.normal_matrix(9, 2);
    const double rv = rv_coefficient(x, y);
    CHECK(rv >= 0.0);
    CHECK(rv <= 1.0);
    CHECK(std::abs(rv - rv_coefficient(y, x)) <= 1e-12);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.normal_matrix(3, 3));
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(3, 3);
    CHECK(std::abs(rv - rv_coefficient(x * Q, y)) <= 1e-12);
    CHECK(std::abs(rv - rv_coefficient(-3.5 * x, y)) <= 1e-12);
    // different column counts are fine
    CHECK(std::isfinite(rv_coefficient(x, y.leftCols(1))));
  }
}

TEST_CASE("MSE") {
  Rng rng(73);
  const Eigen::MatrixXd f = rng.normal_matrix(5, 7);
  CHECK(pointwise_mse(f, f).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd off = pointwise_mse(f, f.array() + 0.3);
  CHECK((off.array() - 0.09).abs().maxCoeff() < 1e-15);

  const Eigen::MatrixXd g = rng.normal_matrix(5, 7);
  const Eigen::VectorXd pw = pointwise_mse(f, g);
  double total = 0.0;
  for (int t = 0; t < 7; ++t) {
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += (f(i, t) - g(i, t)) * (f(i, t) - g(i, t));
    CHECK(std::abs(pw(t) - s / 5) <= 1e-12);
    total += s / 5;
  }
  CHECK(std::abs(total_mse(f, g) - total / 7) <= 1e-12);
  CHECK(total_mse(f, g) == pw.mean());
  CHECK_THROWS_AS(pointwise_mse(f, g.leftCols(6)), InvalidDimension);
}

TEST_CASE("Geweke diagnostic") {
  std::vector<double> flat(500, 1.0);
  CHECK_THROWS_AS(geweke_diagnostic(flat), NumericalError);
  std::vector<double> shortc(99, 0.0);
  CHECK_THROWS(geweke_diagnostic(shortc));

  // reversing the chain with equal windows swaps them
  Rng rng(74);
  std::vector<double> x(1000);
  for (double& v : x) v = rng.normal();
  const auto fwd = geweke_diagnostic(x, 0.3, 0.3);
  std::vector<double> rev(x.rbegin(), x.rend());
  const auto back = geweke_diagnostic(rev, 0.3, 0.3);
  CHECK(back.z == doctest::Approx(-fwd.z));

  // a shifted first window is flagged
  std::vector<double> drift = x;
  for (int i = 0; i < 100; ++i) drift[i] += 3.0;
  CHECK(geweke_diagnostic(drift).z > 1.96);

  int inside = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng r(1000 + trial);
    std::vector<double> c(10000);
    for (double& v : c) v = r.normal();
    inside += std::abs(geweke_diagnostic(c).z) < 1.96 ? 1 : 0;
  }
  CHECK(inside >= 180);
}
