#include "mgfactor/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgfactor/errors.hpp"

namespace mgf {

namespace {

constexpr int kDegree = 3;

// Index of the knot span containing x, clamped so that x == hi falls in the
// last nondegenerate span.
int find_span(const std::vector<double>& knots, int num_basis, double x) {
  if (x >= knots[num_basis]) return num_basis - 1;
  if (x <= knots[kDegree]) return kDegree;
  const auto it = std::upper_bound(knots.begin() + kDegree, knots.begin() + num_basis + 1, x);
  return static_cast<int>(it - knots.begin()) - 1;
}

}  // namespace

void TimeGrid::validate() const {
  if (points.size() < 4) {
    throw InvalidDimension("time grid needs at least 4 points, got " + std::to_string(points.size()));
  }
  for (std::size_t j = 1; j < points.size(); ++j) {
    if (!(points[j] > points[j - 1])) {
      throw InvalidDimension("time grid must be strictly increasing (index " + std::to_string(j) + ")");
    }
  }
}

TimeGrid TimeGrid::uniform(int num_points, double lo, double hi) {
  TimeGrid g;
  g.points.resize(static_cast<std::size_t>(std::max(num_points, 0)));
  for (int j = 0; j < num_points; ++j) {
    g.points[j] = num_points == 1 ? lo : lo + (hi - lo) * j / (num_points - 1);
  }
  return g;
}

std::vector<double> clamped_knots(double lo, double hi, int num_basis) {
  const int interior = num_basis - kDegree - 1;
  std::vector<double> knots;
  knots.reserve(num_basis + kDegree + 1);
  for (int k = 0; k <= kDegree; ++k) knots.push_back(lo);
  for (int j = 1; j <= interior; ++j) knots.push_back(lo + (hi - lo) * j / (interior + 1));
  for (int k = 0; k <= kDegree; ++k) knots.push_back(hi);
  return knots;
}

Eigen::MatrixXd build_bspline_basis(const TimeGrid& grid, int num_basis) {
  grid.validate();
  const int T = grid.size();
  if (num_basis < 4 || num_basis > T) {
    throw InvalidDimension("number of basis functions must lie in [4, T=" + std::to_string(T) +
                           "], got " + std::to_string(num_basis));
  }
  const auto knots = clamped_knots(grid.front(), grid.back(), num_basis);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(T, num_basis);

  // Nonzero basis functions on a span via the triangular de Boor scheme.
  double left[kDegree + 1];
  double right[kDegree + 1];
  double values[kDegree + 1];
  for (int j = 0; j < T; ++j) {
    const double x = grid.points[j];
    const int span = find_span(knots, num_basis, x);
    values[0] = 1.0;
    for (int d = 1; d <= kDegree; ++d) {
      left[d] = x - knots[span + 1 - d];
      right[d] = knots[span + d] - x;
      double saved = 0.0;
      for (int r = 0; r < d; ++r) {
        const double tmp = values[r] / (right[r + 1] + left[d - r]);
        values[r] = saved + right[r + 1] * tmp;
        saved = left[d - r] * tmp;
      }
      values[d] = saved;
    }
    for (int r = 0; r <= kDegree; ++r) B(j, span - kDegree + r) = values[r];
  }
  return B;
}

Eigen::MatrixXd second_difference_operator(int num_basis) {
  if (num_basis < 3) {
    throw InvalidDimension("second-difference penalty needs R >= 3, got " + std::to_string(num_basis));
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(num_basis - 2, num_basis);
  for (int k = 0; k < num_basis - 2; ++k) {
    D(k, k) = 1.0;
    D(k, k + 1) = -2.0;
    D(k, k + 2) = 1.0;
  }
  return D;
}

Eigen::MatrixXd build_penalty(int num_basis, double ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
    throw InvalidDimension("penalty ridge must be nonnegative");
  }
  const Eigen::MatrixXd D = second_difference_operator(num_basis);
  Eigen::MatrixXd omega = D.transpose() * D;
  omega.diagonal().array() += ridge;
  return omega;
}

int default_num_basis(int num_points) {
  return std::max(4, static_cast<int>(std::lround(num_points / 2.0)));
}

BasisSystem BasisSystem::make(const TimeGrid& grid, int num_basis, double ridge) {
  if (!(ridge > 0.0)) throw InvalidDimension("penalty ridge must be positive");
  BasisSystem sys;
  sys.basis = build_bspline_basis(grid, num_basis);
  sys.penalty = build_penalty(num_basis, ridge);
  sys.gram = sys.basis.transpose() * sys.basis;
  sys.ridge = ridge;
  return sys;
}

}  // namespace mgf
