#include "mgfactor/cusp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "mgfactor/errors.hpp"

namespace mgf {

CuspState make_cusp_state(int num_columns, const CuspHyper& hyper) {
  if (num_columns < 1) throw InvalidDimension("shrinkage block needs at least one column");
  CuspState c;
  c.hyper = hyper;
  c.z.assign(num_columns, num_columns);
  c.nu = Eigen::VectorXd::Constant(num_columns, 0.5);
  c.sigma2_gamma = Eigen::VectorXd::Constant(num_columns, hyper.a2 / (hyper.a1 + 1.0));
  c.alpha = hyper.a_alpha / hyper.b_alpha;
  refresh_sticks(c);
  refresh_theta(c);
  return c;
}

void refresh_sticks(CuspState& cusp) {
  const int L = cusp.size();
  cusp.nu(L - 1) = 1.0;
  cusp.omega.resize(L);
  cusp.pi.resize(L);
  double remaining = 1.0;
  double cumulative = 0.0;
  for (int h = 0; h < L; ++h) {
    cusp.omega(h) = cusp.nu(h) * remaining;
    remaining *= 1.0 - cusp.nu(h);
    cumulative += cusp.omega(h);
    cusp.pi(h) = cumulative;
  }
}

void refresh_theta(CuspState& cusp) {
  const int L = cusp.size();
  cusp.theta.resize(L);
  for (int l = 0; l < L; ++l) cusp.theta(l) = cusp.z[l] <= l + 1 ? cusp.hyper.v0 : 1.0;
}

namespace {

void indicator_log_weights(double gamma_l, int l, const CuspState& cusp, std::vector<double>& out) {
  const int L = cusp.size();
  out.resize(L);
  const double s2 = cusp.sigma2_gamma(l - 1);
  const double spike = normal_log_density(gamma_l, 0.0, cusp.hyper.v0 * s2);
  const double slab = normal_log_density(gamma_l, 0.0, s2);
  for (int h = 1; h <= L; ++h) {
    const double w = cusp.omega(h - 1);
    const double lw = w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
    out[h - 1] = lw + (h <= l ? spike : slab);
  }
}

}  // namespace

Eigen::VectorXd indicator_probabilities(double gamma_l, int l, const CuspState& cusp) {
  std::vector<double> lw;
  indicator_log_weights(gamma_l, l, cusp, lw);
  double top = -std::numeric_limits<double>::infinity();
  for (double v : lw) top = std::max(top, v);
  if (!std::isfinite(top)) throw NumericalError("all indicator weights underflowed");
  Eigen::VectorXd p(cusp.size());
  for (int h = 0; h < cusp.size(); ++h) p(h) = std::exp(lw[h] - top);
  return p / p.sum();
}

void sample_indicators(const Eigen::VectorXd& gamma, CuspState& cusp, Rng& rng) {
  const int L = cusp.size();
  if (gamma.size() != L) throw InvalidDimension("gamma length differs from shrinkage block size");
  std::vector<double> lw;
  for (int l = 1; l <= L; ++l) {
    indicator_log_weights(gamma(l - 1), l, cusp, lw);
    cusp.z[l - 1] = rng.categorical_log(lw) + 1;
  }
  refresh_theta(cusp);
}

void sample_sticks(CuspState& cusp, Rng& rng) {
  const int L = cusp.size();
  std::vector<int> at(L + 1, 0);
  for (int zl : cusp.z) {
    if (zl < 1 || zl > L) throw InvalidState("indicator outside 1..L");
    ++at[zl];
  }
  int beyond = L;  // #{l : z_l > h}, updated as h advances
  const double iota = cusp.hyper.iota;
  for (int h = 1; h < L; ++h) {
    beyond -= at[h];
    cusp.nu(h - 1) = rng.beta(iota + at[h], iota * cusp.alpha + beyond);
  }
  refresh_sticks(cusp);
}

GammaParams alpha_conditional(const CuspState& cusp) {
  const int L = cusp.size();
  GammaParams g{cusp.hyper.a_alpha + (L - 1), cusp.hyper.b_alpha};
  for (int h = 0; h < L - 1; ++h) {
    const double nu = std::min(cusp.nu(h), kStickClamp);
    g.rate -= std::log1p(-nu);
  }
  return g;
}

void sample_alpha(CuspState& cusp, Rng& rng) { cusp.alpha = alpha_conditional(cusp).draw(rng); }

InvGammaParams gamma_scale_conditional(double gamma_l, double theta_l, const CuspHyper& hyper) {
  return {hyper.a1 + 0.5, hyper.a2 + gamma_l * gamma_l / (2.0 * theta_l)};
}

void sample_gamma_scales(const Eigen::VectorXd& gamma, CuspState& cusp, Rng& rng) {
  const int L = cusp.size();
  if (gamma.size() != L) throw InvalidDimension("gamma length differs from shrinkage block size");
  for (int l = 0; l < L; ++l) {
    cusp.sigma2_gamma(l) = gamma_scale_conditional(gamma(l), cusp.theta(l), cusp.hyper).draw(rng);
  }
}

int count_active(std::span<const int> z) {
  int active = 0;
  for (std::size_t l = 0; l < z.size(); ++l) active += z[l] > static_cast<int>(l) + 1 ? 1 : 0;
  return active;
}

Eigen::VectorXd sample_cusp_prior(CuspState& cusp, Rng& rng) {
  const int L = cusp.size();
  const auto& hp = cusp.hyper;
  cusp.alpha = rng.gamma(hp.a_alpha, hp.b_alpha);
  for (int h = 0; h < L - 1; ++h) cusp.nu(h) = rng.beta(hp.iota, hp.iota * cusp.alpha);
  refresh_sticks(cusp);
  std::vector<double> lw(L);
  for (int h = 0; h < L; ++h) {
    lw[h] = cusp.omega(h) > 0 ? std::log(cusp.omega(h)) : -std::numeric_limits<double>::infinity();
  }
  for (int l = 0; l < L; ++l) cusp.z[l] = rng.categorical_log(lw) + 1;
  refresh_theta(cusp);
  Eigen::VectorXd gamma(L);
  for (int l = 0; l < L; ++l) {
    cusp.sigma2_gamma(l) = rng.inv_gamma(hp.a1, hp.a2);
    gamma(l) = rng.normal(0.0, std::sqrt(cusp.theta(l) * cusp.sigma2_gamma(l)));
  }
  return gamma;
}

}  // namespace mgf
