#include "mgfactor/distributions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mgfactor/errors.hpp"

namespace mgf {

double InvGammaParams::log_density(double x) const {
  if (x <= 0) return -INFINITY;
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

double normal_log_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& precision, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::MatrixXd jittered = precision;
  jittered.diagonal().array() += 1e-10;
  llt.compute(jittered);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string("precision matrix not positive definite in ") + what);
  }
  return llt;
}

GaussianConditional GaussianConditional::from_canonical(Eigen::MatrixXd precision, const Eigen::VectorXd& linear) {
  GaussianConditional g;
  const auto llt = robust_cholesky(precision, "gaussian conditional");
  g.mean = llt.solve(linear);
  g.precision = std::move(precision);
  return g;
}

Eigen::MatrixXd GaussianConditional::covariance() const {
  const auto llt = robust_cholesky(precision, "gaussian covariance");
  return llt.solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
}

Eigen::VectorXd GaussianConditional::draw(Rng& rng) const {
  const auto llt = robust_cholesky(precision, "gaussian draw");
  // P = L L^T, x = mean + L^{-T} z has covariance P^{-1}.
  Eigen::VectorXd z = rng.normal_vector(mean.size());
  llt.matrixU().solveInPlace(z);
  return mean + z;
}

}  // namespace mgf
