#include "mgfactor/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgfactor/errors.hpp"

namespace mgf {

double rv_coefficient_gram(const Eigen::MatrixXd& e, const Eigen::MatrixXd& t) {
  if (e.rows() != t.rows() || e.cols() != t.cols()) throw InvalidDimension("RV: Gram matrices differ in shape");
  const double ee = e.cwiseProduct(e).sum();
  const double tt = t.cwiseProduct(t).sum();
  if (!(ee > 0) || !(tt > 0)) throw NumericalError("RV coefficient undefined for a zero matrix");
  return e.cwiseProduct(t).sum() / std::sqrt(ee * tt);
}

double rv_coefficient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw InvalidDimension("RV: inputs must have the same number of rows");
  // tr(XX'YY') = ||X'Y||_F^2, tr((XX')^2) = ||X'X||_F^2; avoids the p x p Grams.
  const double xy = (x.transpose() * y).squaredNorm();
  const double xx = (x.transpose() * x).squaredNorm();
  const double yy = (y.transpose() * y).squaredNorm();
  if (!(xx > 0) || !(yy > 0)) throw NumericalError("RV coefficient undefined for a zero matrix");
  return xy / std::sqrt(xx * yy);
}

Eigen::VectorXd pointwise_mse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw InvalidDimension("MSE: shapes differ");
  }
  if (truth.rows() == 0) throw InvalidDimension("MSE: no rows");
  return (truth - estimate).array().square().colwise().mean().transpose();
}

double total_mse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  return pointwise_mse(truth, estimate).mean();
}

namespace {

struct WindowStats {
  double mean;
  double mean_variance;
};

WindowStats batch_means(std::span<const double> w) {
  const std::size_t n = w.size();
  const int kBatches = static_cast<int>(std::min<std::size_t>(20, n));
  double total = 0.0;
  for (double v : w) total += v;
  const double mean = total / static_cast<double>(n);
  const std::size_t size = n / kBatches;
  // Batches tile the window; the last one absorbs the remainder.
  double ss = 0.0;
  for (int b = 0; b < kBatches; ++b) {
    const std::size_t lo = b * size;
    const std::size_t hi = b == kBatches - 1 ? n : lo + size;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += w[i];
    const double bm = s / static_cast<double>(hi - lo);
    ss += (bm - mean) * (bm - mean);
  }
  const double var_bm = ss / (kBatches - 1);
  return {mean, var_bm / kBatches};
}

}  // namespace

GewekeResult geweke_diagnostic(std::span<const double> chain, double frac_first, double frac_last) {
  const std::size_t n = chain.size();
  if (n < 100) throw InvalidDimension("Geweke diagnostic needs at least 100 samples, got " + std::to_string(n));
  if (!(frac_first > 0 && frac_last > 0 && frac_first + frac_last <= 1.0)) {
    throw InvalidDimension("Geweke window fractions must be positive and sum to at most 1");
  }
  const auto na = static_cast<std::size_t>(std::floor(frac_first * n));
  const auto nb = static_cast<std::size_t>(std::floor(frac_last * n));
  const auto a = batch_means(chain.subspan(0, na));
  const auto b = batch_means(chain.subspan(n - nb, nb));
  if (!(a.mean_variance > 0) || !(b.mean_variance > 0)) {
    throw NumericalError("degenerate chain: zero variance in a Geweke window");
  }
  GewekeResult r;
  r.mean_first = a.mean;
  r.mean_last = b.mean;
  r.var_first = a.mean_variance;
  r.var_last = b.mean_variance;
  r.z = (a.mean - b.mean) / std::sqrt(a.mean_variance + b.mean_variance);
  return r;
}

}  // namespace mgf
