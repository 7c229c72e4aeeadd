#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mgf {

inline constexpr double kDefaultRidge = 1e-7;

// Common observation grid t_1 < ... < t_T shared by every curve.
struct TimeGrid {
  std::vector<double> points;

  int size() const { return static_cast<int>(points.size()); }
  double front() const { return points.front(); }
  double back() const { return points.back(); }
  // Throws InvalidDimension unless strictly increasing with at least 4 points.
  void validate() const;

  static TimeGrid uniform(int num_points, double lo = 0.0, double hi = 1.0);
};

// Cubic B-spline evaluation matrix (T x R) on `grid`. Knots are equally
// spaced over [t_1, t_T] with multiplicity 4 at both ends, so R counts every
// basis function (R - 4 interior knots).
Eigen::MatrixXd build_bspline_basis(const TimeGrid& grid, int num_basis);

// Knot vector used by build_bspline_basis (length R + 4).
std::vector<double> clamped_knots(double lo, double hi, int num_basis);

// Second-order difference penalty D2^T D2 + ridge * I (R x R).
Eigen::MatrixXd build_penalty(int num_basis, double ridge);

// (R-2) x R second-order difference operator.
Eigen::MatrixXd second_difference_operator(int num_basis);

// R closest to T/2, never below 4.
int default_num_basis(int num_points);

struct BasisSystem {
  Eigen::MatrixXd basis;    // B, T x R
  Eigen::MatrixXd penalty;  // Omega = Omega* + ridge I
  Eigen::MatrixXd gram;     // B^T B
  double ridge = kDefaultRidge;
  int degree = 3;

  int num_points() const { return static_cast<int>(basis.rows()); }
  int num_basis() const { return static_cast<int>(basis.cols()); }

  static BasisSystem make(const TimeGrid& grid, int num_basis, double ridge = kDefaultRidge);
};

}  // namespace mgf
