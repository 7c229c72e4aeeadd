#pragma once

#include <span>

#include <Eigen/Dense>

namespace mgf {

// RV coefficient tr(XX'YY') / sqrt(tr((XX')^2) tr((YY')^2)) between two
// matrices with the same number of rows. Throws InvalidDimension on a row
// mismatch and NumericalError when either Gram matrix is zero.
double rv_coefficient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// RV coefficient between two symmetric PSD matrices used directly as Gram matrices.
double rv_coefficient_gram(const Eigen::MatrixXd& e, const Eigen::MatrixXd& t);

// Per-time mean over rows of squared error, length T.
Eigen::VectorXd pointwise_mse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);
double total_mse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);

struct GewekeResult {
  double z = 0.0;
  double mean_first = 0.0;
  double mean_last = 0.0;
  double var_first = 0.0;  // variance of the window mean
  double var_last = 0.0;
};

// Geweke z-score comparing the first `frac_first` and last `frac_last`
// portions of a chain; window-mean variances come from batch means with 20
// batches per window. Requires at least 100 samples; throws NumericalError
// for a window with zero variance.
GewekeResult geweke_diagnostic(std::span<const double> chain, double frac_first = 0.1, double frac_last = 0.5);

}  // namespace mgf
