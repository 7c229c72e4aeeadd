#include "mgfactor/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mgf {

namespace {

const ExpansionBlock& block_of(const ModelState& st, BlockId b) {
  return b.is_shared() ? st.shared : st.specific.at(b.group);
}
ExpansionBlock& block_of(ModelState& st, BlockId b) { return b.is_shared() ? st.shared : st.specific.at(b.group); }

const Eigen::MatrixXd& scores_of(const ModelState& st, BlockId b, int s) {
  return b.is_shared() ? st.eta[s] : st.rho[s];
}
Eigen::MatrixXd& scores_of(ModelState& st, BlockId b, int s) { return b.is_shared() ? st.eta[s] : st.rho[s]; }

std::vector<int> groups_of(BlockId b, int num_groups) {
  if (!b.is_shared()) return {b.group};
  std::vector<int> all(num_groups);
  for (int s = 0; s < num_groups; ++s) all[s] = s;
  return all;
}

// Y_s - F_s, n_s x T.
Eigen::MatrixXd full_residual(const ModelState& st, const FunctionalDataset& data, const BasisSystem& basis,
                              int s) {
  return data.groups[s].y - reconstruct_group(st, basis, s);
}

// Residual with the contribution of `b` added back, n_s x T.
Eigen::MatrixXd partial_residual(const ModelState& st, const FunctionalDataset& data, const BasisSystem& basis,
                                 BlockId b, int s, const Eigen::MatrixXd& loadings) {
  Eigen::MatrixXd e = full_residual(st, data, basis, s);
  e.noalias() += scores_of(st, b, s) * (basis.basis * loadings).transpose();
  return e;
}

void check_group(const ModelState& st, int s) {
  if (s < 0 || s >= st.num_groups()) throw InvalidDimension("group index out of range");
}

}  // namespace

// ---- configuration -------------------------------------------------------------

void SamplerConfig::validate() const {
  if (iterations < 1) throw ValidationError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ValidationError("burn_in must lie in [0, iterations)");
  if (thin < 1) throw ValidationError("thin must be >= 1");
  if (max_shared < 1 || max_specific < 1) throw ValidationError("L_max and K_max must be >= 1");
  if (num_basis != 0 && num_basis < 4) throw ValidationError("num_basis must be >= 4");
  if (!(ridge > 0)) throw ValidationError("ridge must be positive");
  shared_hyper.validate();
  specific_hyper.validate();
  if (!(priors.a_beta > 0 && priors.b_beta > 0)) throw ValidationError("a_beta and b_beta must be positive");
  if (!(priors.eps_rate >= 0)) throw ValidationError("noise prior rate must be nonnegative");
}

int SamplerConfig::resolved_num_basis(int num_points) const {
  return num_basis > 0 ? num_basis : default_num_basis(num_points);
}

int FactorConfiguration::total() const {
  int t = shared;
  for (int k : specific) t += k;
  return t;
}

std::string FactorConfiguration::label() const {
  std::string out = "(" + std::to_string(shared);
  for (int k : specific) out += "," + std::to_string(k);
  return out + ")";
}

FactorConfiguration configuration_of(const ModelState& state) {
  FactorConfiguration c;
  c.shared = count_active(state.shared.cusp.z);
  for (const auto& blk : state.specific) c.specific.push_back(count_active(blk.cusp.z));
  return c;
}

Draw Draw::capture(const ModelState& state, int iteration) {
  Draw d;
  d.iteration = iteration;
  d.beta = state.beta;
  d.sigma2_eps = state.sigma2_eps;
  d.sigma2_beta = state.sigma2_beta;
  d.shared_loadings = state.shared_loadings();
  for (int s = 0; s < state.num_groups(); ++s) {
    d.specific_loadings.push_back(state.specific_loadings(s));
    d.z_specific.push_back(state.specific[s].cusp.z);
  }
  d.eta = state.eta;
  d.rho = state.rho;
  d.z_shared = state.shared.cusp.z;
  return d;
}

ChainError::ChainError(int iteration, std::string parameter, const std::string& cause)
    : Error("iteration " + std::to_string(iteration) + ", parameter " + parameter + ": " + cause),
      iteration_(iteration),
      parameter_(std::move(parameter)) {}

// ---- full conditionals ---------------------------------------------------------

GaussianConditional beta_conditional(const ModelState& state, const FunctionalDataset& data,
                                     const BasisSystem& basis, int group) {
  check_group(state, group);
  const auto& B = basis.basis;
  const auto& Y = data.groups[group].y;
  const double var = state.sigma2_eps(group);
  Eigen::MatrixXd coef = state.eta[group] * state.shared_loadings().transpose() +
                         state.rho[group] * state.specific_loadings(group).transpose();
  const Eigen::VectorXd resid_sum = (Y - coef * B.transpose()).colwise().sum().transpose();
  const double n = static_cast<double>(Y.rows());
  Eigen::MatrixXd precision = (n / var) * basis.gram + basis.penalty / state.sigma2_beta(group);
  return GaussianConditional::from_canonical(std::move(precision), B.transpose() * resid_sum / var);
}

InvGammaParams sigma_eps_conditional(const ModelState& state, const FunctionalDataset& data,
                                     const BasisSystem& basis, int group, const VariancePriors& priors) {
  check_group(state, group);
  const double rss = full_residual(state, data, basis, group).squaredNorm();
  const double count = static_cast<double>(data.groups[group].y.size());
  InvGammaParams p{priors.eps_shape + 0.5 * count, priors.eps_rate + 0.5 * rss};
  if (!(p.shape > 0)) throw NumericalError("improper noise-variance posterior (too few observations)");
  if (!(p.rate > 0)) throw NumericalError("degenerate residual: zero residual sum of squares");
  return p;
}

InvGammaParams sigma_beta_conditional(const ModelState& state, const BasisSystem& basis, int group,
                                      const VariancePriors& priors) {
  check_group(state, group);
  const auto& b = state.beta[group];
  const double quad = b.dot(basis.penalty * b);
  return {priors.a_beta + 0.5 * basis.num_basis(), priors.b_beta + 0.5 * quad};
}

double sign_probability(double xi) { return 1.0 / (1.0 + std::exp(-2.0 * xi)); }

GaussianConditional xi_conditional(const ModelState& state, const FunctionalDataset& data,
                                   const BasisSystem& basis, BlockId block) {
  const ExpansionBlock& blk = block_of(state, block);
  const int R = basis.num_basis();
  const int L = blk.num_columns();
  const Eigen::MatrixXd loadings = blk.loadings();
  const auto gdiag = blk.gamma.asDiagonal();

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(L, L);
  Eigen::MatrixXd linear = blk.signs;  // R x L, prior mean contribution
  for (int s : groups_of(block, state.num_groups())) {
    const double var = state.sigma2_eps(s);
    const Eigen::MatrixXd g = scores_of(state, block, s) * gdiag;  // n x L, rows gamma .* scores
    G.noalias() += g.transpose() * g / var;
    const Eigen::MatrixXd e = partial_residual(state, data, basis, block, s, loadings);
    linear.noalias() += basis.basis.transpose() * (e.transpose() * g) / var;
  }
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(R * L, R * L);
  for (int l = 0; l < L; ++l)
    for (int m = 0; m < L; ++m) precision.block(l * R, m * R, R, R).noalias() += G(l, m) * basis.gram;
  return GaussianConditional::from_canonical(std::move(precision),
                                             Eigen::Map<const Eigen::VectorXd>(linear.data(), R * L));
}

ScalarGaussian gamma_conditional(const ModelState& state, const FunctionalDataset& data,
                                 const BasisSystem& basis, BlockId block, int column) {
  const ExpansionBlock& blk = block_of(state, block);
  if (column < 0 || column >= blk.num_columns()) throw InvalidDimension("gamma column out of range");
  const Eigen::VectorXd u = basis.basis * blk.xi.col(column);
  const double uu = u.squaredNorm();
  const double g = blk.gamma(column);
  double prec = 1.0 / (blk.cusp.theta(column) * blk.cusp.sigma2_gamma(column));
  double lin = 0.0;
  for (int s : groups_of(block, state.num_groups())) {
    const double var = state.sigma2_eps(s);
    const Eigen::VectorXd sc = scores_of(state, block, s).col(column);
    const Eigen::VectorXd eu = full_residual(state, data, basis, s) * u;
    prec += sc.squaredNorm() * uu / var;
    lin += (sc.dot(eu) + g * sc.squaredNorm() * uu) / var;
  }
  return {lin / prec, 1.0 / prec};
}

GaussianConditional factor_conditional(const ModelState& state, const FunctionalDataset& data,
                                       const BasisSystem& basis, BlockId block, int group, int subject) {
  check_group(state, group);
  if (!block.is_shared() && block.group != group) throw InvalidDimension("specific block of another group");
  const Eigen::MatrixXd loadings = block_of(state, block).loadings();
  const Eigen::MatrixXd A = basis.basis * loadings;
  const double var = state.sigma2_eps(group);
  const Eigen::MatrixXd e = partial_residual(state, data, basis, block, group, loadings);
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(A.cols(), A.cols()) + A.transpose() * A / var;
  return GaussianConditional::from_canonical(std::move(precision), A.transpose() * e.row(subject).transpose() / var);
}

// ---- samplers ------------------------------------------------------------------

void sample_beta(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis, Rng& rng) {
  for (int s = 0; s < state.num_groups(); ++s) state.beta[s] = beta_conditional(state, data, basis, s).draw(rng);
}

void sample_sigma_eps(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                      const VariancePriors& priors, Rng& rng) {
  for (int s = 0; s < state.num_groups(); ++s) {
    state.sigma2_eps(s) = sigma_eps_conditional(state, data, basis, s, priors).draw(rng);
  }
}

void sample_sigma_beta(ModelState& state, const BasisSystem& basis, const VariancePriors& priors, Rng& rng) {
  for (int s = 0; s < state.num_groups(); ++s) {
    state.sigma2_beta(s) = sigma_beta_conditional(state, basis, s, priors).draw(rng);
  }
}

void sample_signs(ExpansionBlock& block, Rng& rng) {
  for (Eigen::Index l = 0; l < block.xi.cols(); ++l)
    for (Eigen::Index r = 0; r < block.xi.rows(); ++r)
      block.signs(r, l) = rng.bernoulli(sign_probability(block.xi(r, l))) ? 1.0 : -1.0;
}

void sample_xi(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis, BlockId block,
               Rng& rng) {
  ExpansionBlock& blk = block_of(state, block);
  const Eigen::VectorXd v = xi_conditional(state, data, basis, block).draw(rng);
  blk.xi = Eigen::Map<const Eigen::MatrixXd>(v.data(), blk.xi.rows(), blk.xi.cols());
}

void sample_gamma_sequential(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                             BlockId block, Rng& rng) {
  ExpansionBlock& blk = block_of(state, block);
  const auto groups = groups_of(block, state.num_groups());
  std::vector<Eigen::MatrixXd> resid;
  resid.reserve(groups.size());
  for (int s : groups) resid.push_back(full_residual(state, data, basis, s));

  for (int l = 0; l < blk.num_columns(); ++l) {
    const Eigen::VectorXd u = basis.basis * blk.xi.col(l);
    const double uu = u.squaredNorm();
    const double g_old = blk.gamma(l);
    double prec = 1.0 / (blk.cusp.theta(l) * blk.cusp.sigma2_gamma(l));
    double lin = 0.0;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const int s = groups[k];
      const double var = state.sigma2_eps(s);
      const auto sc = scores_of(state, block, s).col(l);
      const double ss = sc.squaredNorm();
      prec += ss * uu / var;
      lin += (sc.dot(resid[k] * u) + g_old * ss * uu) / var;
    }
    const double g_new = rng.normal(lin / prec, std::sqrt(1.0 / prec));
    blk.gamma(l) = g_new;
    const double delta = g_new - g_old;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      resid[k].noalias() -= delta * scores_of(state, block, groups[k]).col(l) * u.transpose();
    }
  }
}

void rescale_expansion(ExpansionBlock& block) {
  for (Eigen::Index l = 0; l < block.xi.cols(); ++l) {
    const double d = block.xi.col(l).cwiseAbs().mean();
    if (!(d > 0) || !std::isfinite(d)) continue;
    block.xi.col(l) /= d;
    block.gamma(l) *= d;
  }
}

void sample_block_factors(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                          BlockId block, Rng& rng) {
  const Eigen::MatrixXd loadings = block_of(state, block).loadings();
  const Eigen::MatrixXd A = basis.basis * loadings;
  const Eigen::Index q = A.cols();
  for (int s : groups_of(block, state.num_groups())) {
    const double var = state.sigma2_eps(s);
    Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(q, q) + A.transpose() * A / var;
    const auto llt = robust_cholesky(precision, "factor scores");
    const Eigen::MatrixXd e = partial_residual(state, data, basis, block, s, loadings);
    Eigen::MatrixXd draw = llt.solve(A.transpose() * e.transpose() / var);  // q x n means
    Eigen::MatrixXd noise = rng.normal_matrix(q, e.rows());
    llt.matrixU().solveInPlace(noise);
    draw += noise;
    scores_of(state, block, s) = draw.transpose();
  }
}

void sample_factors(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis, Rng& rng) {
  sample_block_factors(state, data, basis, BlockId::shared(), rng);
  for (int s = 0; s < state.num_groups(); ++s) sample_block_factors(state, data, basis, BlockId::specific(s), rng);
}

void sample_shrinkage(ExpansionBlock& block, Rng& rng) {
  sample_gamma_scales(block.gamma, block.cusp, rng);
  sample_indicators(block.gamma, block.cusp, rng);
  sample_sticks(block.cusp, rng);
  sample_alpha(block.cusp, rng);
}

// ---- chain driver --------------------------------------------------------------

ChainStreams ChainStreams::make(std::uint64_t seed, int num_groups) {
  ChainStreams cs{Rng(seed, {0}), Rng(seed, {1}), {}};
  for (int s = 0; s < num_groups; ++s) cs.specific.emplace_back(seed, std::initializer_list<std::uint64_t>{2, std::uint64_t(s)});
  return cs;
}

namespace {

ExpansionBlock make_block(const Eigen::MatrixXd& loadings, const CuspHyper& hyper) {
  ExpansionBlock blk;
  const Eigen::Index R = loadings.rows();
  const Eigen::Index L = loadings.cols();
  blk.xi = loadings;
  blk.gamma = Eigen::VectorXd::Ones(L);
  rescale_expansion(blk);
  blk.signs.resize(R, L);
  for (Eigen::Index l = 0; l < L; ++l)
    for (Eigen::Index r = 0; r < R; ++r) blk.signs(r, l) = blk.xi(r, l) >= 0 ? 1.0 : -1.0;
  blk.cusp = make_cusp_state(static_cast<int>(L), hyper);
  return blk;
}

// Leading eigenpairs (descending) of a symmetric matrix.
void leading_eigen(const Eigen::MatrixXd& sym, int count, Eigen::MatrixXd& vectors, Eigen::VectorXd& values) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
  const Eigen::Index n = sym.rows();
  const int k = std::min<int>(count, static_cast<int>(n));
  vectors.resize(n, count);
  values = Eigen::VectorXd::Zero(count);
  vectors.setZero();
  for (int j = 0; j < k; ++j) {
    vectors.col(j) = es.eigenvectors().col(n - 1 - j);
    values(j) = std::max(0.0, es.eigenvalues()(n - 1 - j));
  }
}

}  // namespace

ModelState initialize_state(const FunctionalDataset& data, const BasisSystem& basis, const SamplerConfig& config,
                            Rng& rng) {
  const int S = data.num_groups();
  const int R = basis.num_basis();
  const int L = config.max_shared;
  const int K = config.max_specific;
  const auto& B = basis.basis;

  // Lightly penalized least-squares smoother from curves to coefficients.
  Eigen::MatrixXd smoother_lhs = basis.gram + 1e-3 * basis.penalty;
  const Eigen::LLT<Eigen::MatrixXd> smoother(smoother_lhs);

  ModelState st;
  st.sigma2_eps.resize(S);
  st.sigma2_beta = Eigen::VectorXd::Ones(S);
  for (int s = 0; s < S; ++s) {
    const auto& Y = data.groups[s].y;
    st.beta.push_back(smoother.solve(B.transpose() * Y.colwise().mean().transpose()));
    st.sigma2_eps(s) = std::max((Y.rowwise() - Y.colwise().mean()).squaredNorm() / Y.size(), 1e-8);
  }

  if (config.init == InitStrategy::kPrior) {
    auto random_block = [&](int cols, const CuspHyper& hyper) {
      Eigen::MatrixXd lo = rng.normal_matrix(R, cols) * 0.1;
      return make_block(lo, hyper);
    };
    st.shared = random_block(L, config.shared_hyper);
    for (int s = 0; s < S; ++s) {
      st.specific.push_back(random_block(K, config.specific_hyper));
      const int n = data.groups[s].num_subjects();
      st.eta.push_back(rng.normal_matrix(n, L));
      st.rho.push_back(rng.normal_matrix(n, K));
    }
    return st;
  }

  // Spectral start. Curves are projected onto an orthonormal basis Q of
  // span(B); per group, eigen-directions above the noise edge span that
  // group's signal space. Directions common to every group's signal space
  // (eigenvalue of the average projector near 1) seed the shared block; what
  // each group has left seeds its specific block. Seeded columns come first
  // and are marked active; the remaining columns start small and inactive.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(B.rows(), R);
  const Eigen::MatrixXd Rb = Q.transpose() * B;  // B = Q Rb, upper triangular
  const Eigen::Index T = B.rows();

  std::vector<Eigen::MatrixXd> cov(S);       // signal covariance in Q coordinates
  std::vector<Eigen::MatrixXd> signal(S);    // orthonormal signal directions
  std::vector<double> noise(S);
  Eigen::MatrixXd avg_projector = Eigen::MatrixXd::Zero(R, R);
  for (int s = 0; s < S; ++s) {
    const auto& Y = data.groups[s].y;
    const double n = static_cast<double>(Y.rows());
    Eigen::MatrixXd centered = Y;
    centered.rowwise() -= Y.colwise().mean();
    const Eigen::MatrixXd zc = centered * Q;  // n x R
    const double outside = (centered - zc * Q.transpose()).squaredNorm();
    noise[s] = T > R ? outside / (n * static_cast<double>(T - R)) : st.sigma2_eps(s);
    noise[s] = std::max(noise[s], 1e-8 * (1.0 + centered.squaredNorm() / centered.size()));
    st.sigma2_eps(s) = noise[s];
    cov[s] = zc.transpose() * zc / n;
    Eigen::MatrixXd vecs;
    Eigen::VectorXd vals;
    leading_eigen(cov[s], R, vecs, vals);
    const double edge = noise[s] * std::pow(1.0 + std::sqrt(R / n), 2.0);
    int rank = 0;
    while (rank < R && vals(rank) > edge) ++rank;
    signal[s] = vecs.leftCols(rank);
    avg_projector.noalias() += signal[s] * signal[s].transpose() / S;
    cov[s].diagonal().array() -= noise[s];
  }

  Eigen::MatrixXd common_vecs;
  Eigen::VectorXd common_vals;
  leading_eigen(avg_projector, R, common_vecs, common_vals);
  int num_common = 0;
  while (num_common < std::min(L, R) && common_vals(num_common) > 0.9) ++num_common;

  // Shared loadings (Q coordinates) from the pooled signal covariance on the common subspace.
  Eigen::MatrixXd shared_q = Eigen::MatrixXd::Zero(R, num_common);
  if (num_common > 0) {
    const Eigen::MatrixXd W = common_vecs.leftCols(num_common);
    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(num_common, num_common);
    int total = 0;
    for (int s = 0; s < S; ++s) {
      const int n = data.groups[s].num_subjects();
      pooled.noalias() += n * (W.transpose() * cov[s] * W);
      total += n;
    }
    Eigen::MatrixXd V;
    Eigen::VectorXd E;
    leading_eigen(pooled / total, num_common, V, E);
    shared_q = W * V * E.cwiseSqrt().asDiagonal();
  }
  const Eigen::MatrixXd shared_part = shared_q * shared_q.transpose();

  auto seeded_block = [&](const Eigen::MatrixXd& active_q, int cols, const CuspHyper& hyper) {
    const int active = static_cast<int>(active_q.cols());
    Eigen::MatrixXd lo = rng.normal_matrix(R, cols) * 1e-2;
    if (active > 0) lo.leftCols(active) = Rb.triangularView<Eigen::Upper>().solve(active_q);
    ExpansionBlock blk = make_block(lo, hyper);
    for (int l = 0; l < cols; ++l) blk.cusp.z[l] = l < active ? cols : 1;
    refresh_theta(blk.cusp);
    return blk;
  };
  st.shared = seeded_block(shared_q, L, config.shared_hyper);

  for (int s = 0; s < S; ++s) {
    const int rank = static_cast<int>(signal[s].cols());
    const int num_specific = std::clamp(rank - num_common, 0, std::min(K, R));
    Eigen::MatrixXd specific_q = Eigen::MatrixXd::Zero(R, num_specific);
    if (num_specific > 0) {
      Eigen::MatrixXd V;
      Eigen::VectorXd E;
      leading_eigen(cov[s] - shared_part, num_specific, V, E);
      specific_q = V * E.cwiseSqrt().asDiagonal();
    }
    st.specific.push_back(seeded_block(specific_q, K, config.specific_hyper));

    // Scores: posterior means given the seeded loadings, N(0, I) elsewhere.
    const auto& Y = data.groups[s].y;
    const int n = static_cast<int>(Y.rows());
    Eigen::MatrixXd centered = Y;
    centered.rowwise() -= (B * st.beta[s]).transpose();
    const Eigen::MatrixXd zc = centered * Q;
    Eigen::MatrixXd design(R, num_common + num_specific);
    design << shared_q, specific_q;
    Eigen::MatrixXd eta = rng.normal_matrix(n, L);
    Eigen::MatrixXd rho = rng.normal_matrix(n, K);
    if (design.cols() > 0) {
      Eigen::MatrixXd gram = design.transpose() * design;
      gram.diagonal().array() += noise[s];
      const Eigen::MatrixXd sc = gram.llt().solve(design.transpose() * zc.transpose()).transpose();
      eta.leftCols(num_common) = sc.leftCols(num_common);
      rho.leftCols(num_specific) = sc.rightCols(num_specific);
    }
    // Columns hold xi * gamma; scores pair with the seeded loadings directly.
    st.eta.push_back(std::move(eta));
    st.rho.push_back(std::move(rho));
  }
  return st;
}

namespace {

void sweep_impl(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                const SamplerConfig& config, ChainStreams& streams, std::string& step) {
  step = "beta";
  sample_beta(state, data, basis, streams.global);
  step = "sigma2_eps";
  sample_sigma_eps(state, data, basis, config.priors, streams.global);
  step = "sigma2_beta";
  sample_sigma_beta(state, basis, config.priors, streams.global);

  auto run_block = [&](BlockId id, Rng& rng, const std::string& tag) {
    ExpansionBlock& blk = block_of(state, id);
    step = "signs" + tag;
    sample_signs(blk, rng);
    step = "xi" + tag;
    sample_xi(state, data, basis, id, rng);
    step = "gamma" + tag;
    sample_gamma_sequential(state, data, basis, id, rng);
    if (config.rescale) rescale_expansion(blk);
    step = (id.is_shared() ? "eta" : "rho") + tag;
    sample_block_factors(state, data, basis, id, rng);
    step = "shrinkage" + tag;
    sample_shrinkage(blk, rng);
  };
  run_block(BlockId::shared(), streams.shared, "");
  for (int s = 0; s < state.num_groups(); ++s) {
    run_block(BlockId::specific(s), streams.specific[s], "[group " + std::to_string(s + 1) + "]");
  }
}

}  // namespace

void gibbs_sweep(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                 const SamplerConfig& config, ChainStreams& streams) {
  std::string step;
  try {
    sweep_impl(state, data, basis, config, streams, step);
  } catch (const ChainError&) {
    throw;
  } catch (const Error& e) {
    throw ChainError(0, step, e.what());
  }
}

PosteriorDraws run_chain(const FunctionalDataset& data, const SamplerConfig& config,
                         const ProgressCallback& progress) {
  data.validate();
  config.validate();
  const int T = data.num_points();
  const int R = config.resolved_num_basis(T);
  if (R > T) throw ValidationError("num_basis exceeds the number of grid points");
  const BasisSystem basis = BasisSystem::make(data.grid, R, config.ridge);

  PosteriorDraws out;
  out.grid = data.grid;
  out.num_basis = R;
  out.ridge = config.ridge;
  for (const auto& g : data.groups) out.group_ids.push_back(g.id);
  out.draws.reserve(config.retained());
  out.configs.reserve(config.retained());

  ChainStreams streams = ChainStreams::make(config.seed, data.num_groups());
  Rng init_rng(config.seed, {3});
  ModelState state = initialize_state(data, basis, config, init_rng);

  std::string step;
  for (int it = 1; it <= config.iterations; ++it) {
    try {
      sweep_impl(state, data, basis, config, streams, step);
    } catch (const Error& e) {
      throw ChainError(it, step, e.what());
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      out.draws.push_back(Draw::capture(state, it));
      out.configs.push_back(configuration_of(state));
    }
    if (progress) progress(it, state);
  }
  return out;
}

}  // namespace mgf
