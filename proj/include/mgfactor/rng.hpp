#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace mgf {

// Random stream used by every sampler. Gamma-family draws use the
// shape-rate convention throughout.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  // Independent stream derived from (seed, tags...). Used to give each
  // sampler block and each simulation replicate its own reproducible stream.
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double gamma(double shape, double rate);
  // X = 1/G with G ~ Gamma(shape, rate); density prop. to x^{-shape-1} e^{-rate/x}.
  double inv_gamma(double shape, double rate);
  double beta(double a, double b);
  bool bernoulli(double p) { return uniform() < p; }
  // Index drawn with probability proportional to exp(log_weights[h]).
  // Entries equal to -inf carry no mass.
  int categorical_log(std::span<const double> log_weights);

  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace mgf
