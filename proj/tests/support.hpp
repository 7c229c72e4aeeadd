#pragma once
// Shared fixtures and small statistical oracles for the test programs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mgfactor/basis.hpp"
#include "mgfactor/cusp.hpp"
#include "mgfactor/gibbs.hpp"
#include "mgfactor/model.hpp"
#include "mgfactor/rng.hpp"

namespace testing {

struct SampleStats {
  double mean = 0.0;
  double var = 0.0;
  double se = 0.0;  // standard error of the mean
};

inline SampleStats iid_stats(const std::vector<double>& x) {
  SampleStats s;
  const double n = static_cast<double>(x.size());
  for (double v : x) s.mean += v;
  s.mean /= n;
  for (double v : x) s.var += (v - s.mean) * (v - s.mean);
  s.var /= n - 1.0;
  s.se = std::sqrt(s.var / n);
  return s;
}

// Standard error of the mean of a correlated series from non-overlapping batch means.
inline SampleStats batch_stats(const std::vector<double>& x, int batches = 50) {
  SampleStats s = iid_stats(x);
  const std::size_t size = x.size() / batches;
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double m = 0.0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i) m += x[i];
    means.push_back(m / size);
  }
  const SampleStats bs = iid_stats(means);
  s.se = std::max(s.se, bs.se);
  return s;
}

// Largest gap between the empirical CDF of x and cdf.
inline double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max({d, std::abs(F - i / n), std::abs((i + 1) / n - F)});
  }
  return d;
}

// Composite Simpson rule with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int k = 1; k < panels; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// A random but valid model state with data drawn around it.
struct TinyInstance {
  mgf::BasisSystem basis;
  mgf::FunctionalDataset data;
  mgf::ModelState state;
};

inline mgf::ExpansionBlock random_block(int R, int L, const mgf::CuspHyper& hyper, mgf::Rng& rng) {
  mgf::ExpansionBlock b;
  b.xi = rng.normal_matrix(R, L);
  b.gamma = rng.normal_vector(L);
  b.signs.resize(R, L);
  for (int l = 0; l < L; ++l)
    for (int r = 0; r < R; ++r) b.signs(r, l) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  b.cusp = mgf::make_cusp_state(L, hyper);
  for (int l = 0; l < L; ++l) {
    b.cusp.z[l] = 1 + static_cast<int>(rng.uniform() * L);
    b.cusp.sigma2_gamma(l) = 0.5 + rng.uniform();
  }
  for (int h = 0; h + 1 < L; ++h) b.cusp.nu(h) = 0.2 + 0.6 * rng.uniform();
  mgf::refresh_sticks(b.cusp);
  mgf::refresh_theta(b.cusp);
  return b;
}

inline TinyInstance tiny_instance(int T, int R, int L, int K, const std::vector<int>& n, std::uint64_t seed,
                                  double ridge = 1e-7) {
  mgf::Rng rng(seed);
  TinyInstance x;
  x.basis = mgf::BasisSystem::make(mgf::TimeGrid::uniform(T), R, ridge);
  x.data.grid = mgf::TimeGrid::uniform(T);
  const int S = static_cast<int>(n.size());
  auto& st = x.state;
  st.sigma2_eps.resize(S);
  st.sigma2_beta.resize(S);
  st.shared = random_block(R, L, {}, rng);
  for (int s = 0; s < S; ++s) {
    st.beta.push_back(rng.normal_vector(R));
    st.sigma2_eps(s) = 0.3 + rng.uniform();
    st.sigma2_beta(s) = 0.5 + rng.uniform();
    st.specific.push_back(random_block(R, K, {}, rng));
    st.eta.push_back(rng.normal_matrix(n[s], L));
    st.rho.push_back(rng.normal_matrix(n[s], K));
  }
  const auto f = mgf::reconstruct_curves(st, x.basis);
  for (int s = 0; s < S; ++s) {
    mgf::GroupData g;
    g.id = std::to_string(s + 1);
    for (int i = 0; i < n[s]; ++i) g.subject_ids.push_back("s" + std::to_string(i));
    g.y = f[s] + std::sqrt(st.sigma2_eps(s)) * rng.normal_matrix(n[s], T);
    x.data.groups.push_back(std::move(g));
  }
  return x;
}

}  // namespace testing
