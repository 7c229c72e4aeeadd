#pragma once

#include <Eigen/Dense>

#include "mgfactor/rng.hpp"

namespace mgf {

// Inv-Gamma(shape, rate): density prop. to x^{-shape-1} exp(-rate / x).
struct InvGammaParams {
  double shape = 1.0;
  double rate = 1.0;

  double mean() const { return rate / (shape - 1.0); }
  double variance() const { return rate * rate / ((shape - 1.0) * (shape - 1.0) * (shape - 2.0)); }
  double log_density(double x) const;
  double draw(Rng& rng) const { return rng.inv_gamma(shape, rate); }
};

// Gamma(shape, rate).
struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;

  double mean() const { return shape / rate; }
  double variance() const { return shape / (rate * rate); }
  double draw(Rng& rng) const { return rng.gamma(shape, rate); }
};

// Gaussian given by its precision matrix and mean. Draws go through the
// Cholesky factor of the precision; a failed factorization is retried once
// with a 1e-10 diagonal jitter before throwing NumericalError.
struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;

  Eigen::MatrixXd covariance() const;
  Eigen::VectorXd draw(Rng& rng) const;
  // Builds the conditional from precision and the linear term b (mean = P^{-1} b).
  static GaussianConditional from_canonical(Eigen::MatrixXd precision, const Eigen::VectorXd& linear);
};

// Lower Cholesky factor with the single-jitter retry.
Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& precision, const char* what);

double normal_log_density(double x, double mean, double variance);

}  // namespace mgf
