#include "mgfactor/rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "mgfactor/errors.hpp"

namespace mgf {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng::Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (tags.size() + 1));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

double Rng::uniform() { return uniform_(engine_); }

double Rng::normal() { return normal_(engine_); }

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw NumericalError("gamma draw with invalid shape/rate (" + std::to_string(shape) + ", " +
                         std::to_string(rate) + ")");
  }
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(engine_);
}

double Rng::inv_gamma(double shape, double rate) {
  const double g = gamma(shape, rate);
  if (g <= 0.0) return std::numeric_limits<double>::max();
  return 1.0 / g;
}

double Rng::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  if (x + y <= 0.0) return a >= b ? 1.0 : 0.0;  // both underflowed
  return x / (x + y);
}

int Rng::categorical_log(std::span<const double> log_weights) {
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) top = std::max(top, w);
  if (!std::isfinite(top)) throw NumericalError("categorical draw with no finite weight");
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - top);
  double u = uniform() * total;
  int last = -1;
  for (std::size_t h = 0; h < log_weights.size(); ++h) {
    if (!std::isfinite(log_weights[h])) continue;
    last = static_cast<int>(h);
    u -= std::exp(log_weights[h] - top);
    if (u < 0.0) return last;
  }
  return last;
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

Eigen::MatrixXd Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
  return m;
}

}  // namespace mgf
