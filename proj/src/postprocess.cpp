#include "mgfactor/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mgfactor/errors.hpp"

namespace mgf {

namespace {

bool config_before(const std::pair<FactorConfiguration, int>& a, const std::pair<FactorConfiguration, int>& b) {
  if (a.second != b.second) return a.second > b.second;
  if (a.first.total() != b.first.total()) return a.first.total() < b.first.total();
  return a.first < b.first;
}

std::vector<std::pair<FactorConfiguration, int>> count_configs(const std::vector<FactorConfiguration>& configs) {
  std::map<FactorConfiguration, int> counts;
  for (const auto& c : configs) ++counts[c];
  std::vector<std::pair<FactorConfiguration, int>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), config_before);
  return out;
}

// Minimum-cost assignment on a square matrix (Hungarian method, potentials
// form). Returns assignment[row] = column.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n);
  for (int j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
  return assignment;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  // Linear interpolation between order statistics (R type 7).
  const double h = (sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<int>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(k) = m.col(cols[k]);
  return out;
}

void put_columns(Eigen::MatrixXd& m, const std::vector<int>& cols, const Eigen::MatrixXd& values) {
  for (std::size_t k = 0; k < cols.size(); ++k) m.col(cols[k]) = values.col(k);
}

}  // namespace

ModalConfiguration modal_configuration(const std::vector<FactorConfiguration>& configs) {
  if (configs.empty()) throw InvalidDimension("no retained draws to select a configuration from");
  ModalConfiguration out;
  out.config = count_configs(configs).front().first;
  for (std::size_t m = 0; m < configs.size(); ++m)
    if (configs[m] == out.config) out.members.push_back(static_cast<int>(m));
  return out;
}

ModalConfiguration modal_configuration(const PosteriorDraws& draws) { return modal_configuration(draws.configs); }

std::vector<std::pair<FactorConfiguration, int>> configuration_histogram(
    const std::vector<FactorConfiguration>& configs, int limit) {
  auto out = count_configs(configs);
  if (limit >= 0 && static_cast<int>(out.size()) > limit) out.resize(limit);
  return out;
}

double varimax_criterion(const Eigen::MatrixXd& loadings) {
  const double p = static_cast<double>(loadings.rows());
  const Eigen::ArrayXXd sq = loadings.array().square();
  const Eigen::ArrayXd m2 = sq.colwise().sum().transpose() / p;
  const Eigen::ArrayXd m4 = sq.square().colwise().sum().transpose() / p;
  return (m4 - m2.square()).sum();
}

Eigen::MatrixXd varimax(const Eigen::MatrixXd& loadings) {
  const Eigen::Index q = loadings.cols();
  Eigen::MatrixXd rotation = Eigen::MatrixXd::Identity(q, q);
  if (q < 2) return rotation;
  const double p = static_cast<double>(loadings.rows());
  double best = varimax_criterion(loadings);
  for (int it = 0; it < 500; ++it) {
    const Eigen::MatrixXd z = loadings * rotation;
    const Eigen::RowVectorXd m2 = z.array().square().colwise().sum() / p;
    const Eigen::MatrixXd target = z.array().cube().matrix() - z * m2.asDiagonal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(loadings.transpose() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd next = svd.matrixU() * svd.matrixV().transpose();
    const double value = varimax_criterion(loadings * next);
    if (value < best) break;
    const double gain = value - best;
    rotation = next;
    best = value;
    if (gain < 1e-8) break;
  }
  return rotation;
}

Eigen::MatrixXd best_signed_permutation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& reference) {
  if (x.rows() != reference.rows() || x.cols() != reference.cols()) {
    throw InvalidDimension("signed permutation: shapes differ");
  }
  const Eigen::Index q = x.cols();
  const Eigen::MatrixXd cross = x.transpose() * reference;  // (j, k) = x_j . ref_k
  const Eigen::VectorXd xn = x.colwise().squaredNorm().transpose();
  const Eigen::VectorXd rn = reference.colwise().squaredNorm().transpose();
  Eigen::MatrixXd cost(q, q);
  for (Eigen::Index j = 0; j < q; ++j)
    for (Eigen::Index k = 0; k < q; ++k) cost(j, k) = xn(j) + rn(k) - 2.0 * std::abs(cross(j, k));
  const auto assignment = solve_assignment(cost);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(q, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const int k = assignment[j];
    P(j, k) = cross(j, k) < 0 ? -1.0 : 1.0;
  }
  return P;
}

RspResult rsp_align(const std::vector<FactorDraw>& draws) {
  RspResult out;
  if (draws.empty()) return out;
  const Eigen::Index q = draws.front().loadings.cols();
  const Eigen::Index R = draws.front().loadings.rows();
  for (const auto& d : draws) {
    if (d.loadings.cols() != q || d.loadings.rows() != R) throw InvalidDimension("RSP: draws differ in shape");
    for (const auto& sc : d.scores)
      if (sc.cols() != q) throw InvalidDimension("RSP: scores do not conform to loadings");
  }

  const std::size_t M = draws.size();
  std::vector<Eigen::MatrixXd> rotations(M);
  std::vector<Eigen::MatrixXd> rotated(M);
  for (std::size_t m = 0; m < M; ++m) {
    rotations[m] = varimax(draws[m].loadings);
    rotated[m] = draws[m].loadings * rotations[m];
  }

  std::vector<Eigen::MatrixXd> perms(M, Eigen::MatrixXd::Identity(q, q));
  Eigen::MatrixXd reference = rotated.front();
  double previous = std::numeric_limits<double>::infinity();
  double discrepancy = 0.0;
  int rounds = 0;
  while (rounds < 100) {
    ++rounds;
    discrepancy = 0.0;
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(R, q);
    for (std::size_t m = 0; m < M; ++m) {
      perms[m] = best_signed_permutation(rotated[m], reference);
      const Eigen::MatrixXd aligned = rotated[m] * perms[m];
      discrepancy += (aligned - reference).squaredNorm();
      next += aligned;
    }
    reference = next / static_cast<double>(M);
    if (std::abs(previous - discrepancy) < 1e-6) break;
    previous = discrepancy;
  }

  out.iterations = rounds;
  out.discrepancy = discrepancy;
  out.reference = reference;
  out.draws.resize(M);
  out.transforms.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    out.transforms[m] = rotations[m] * perms[m];
    out.draws[m].loadings = draws[m].loadings * out.transforms[m];
    for (const auto& sc : draws[m].scores) out.draws[m].scores.push_back(sc * out.transforms[m]);
  }
  return out;
}

std::vector<int> active_columns(const std::vector<int>& z) {
  std::vector<int> cols;
  for (std::size_t l = 0; l < z.size(); ++l)
    if (z[l] > static_cast<int>(l) + 1) cols.push_back(static_cast<int>(l));
  return cols;
}

AlignedPosterior align_posterior(const PosteriorDraws& posterior, const std::vector<int>& members) {
  AlignedPosterior out;
  if (members.empty()) throw InvalidDimension("no member draws to align");
  for (int m : members) out.draws.push_back(posterior.draws.at(m));
  const int S = static_cast<int>(posterior.group_ids.size());

  // Shared block: scores of every group move together.
  {
    std::vector<FactorDraw> fd;
    std::vector<std::vector<int>> cols;
    for (const auto& d : out.draws) {
      cols.push_back(active_columns(d.z_shared));
      FactorDraw f{select_columns(d.shared_loadings, cols.back()), {}};
      for (const auto& e : d.eta) f.scores.push_back(select_columns(e, cols.back()));
      fd.push_back(std::move(f));
    }
    if (!cols.empty() && !cols.front().empty()) {
      const auto rsp = rsp_align(fd);
      for (std::size_t m = 0; m < out.draws.size(); ++m) {
        put_columns(out.draws[m].shared_loadings, cols[m], rsp.draws[m].loadings);
        for (int s = 0; s < S; ++s) put_columns(out.draws[m].eta[s], cols[m], rsp.draws[m].scores[s]);
      }
      out.shared_mean = rsp.reference;
    } else {
      out.shared_mean = Eigen::MatrixXd::Zero(posterior.num_basis, 0);
    }
  }

  for (int s = 0; s < S; ++s) {
    std::vector<FactorDraw> fd;
    std::vector<std::vector<int>> cols;
    for (const auto& d : out.draws) {
      cols.push_back(active_columns(d.z_specific[s]));
      fd.push_back({select_columns(d.specific_loadings[s], cols.back()), {select_columns(d.rho[s], cols.back())}});
    }
    if (!cols.empty() && !cols.front().empty()) {
      const auto rsp = rsp_align(fd);
      for (std::size_t m = 0; m < out.draws.size(); ++m) {
        put_columns(out.draws[m].specific_loadings[s], cols[m], rsp.draws[m].loadings);
        put_columns(out.draws[m].rho[s], cols[m], rsp.draws[m].scores[0]);
      }
      out.specific_mean.push_back(rsp.reference);
    } else {
      out.specific_mean.push_back(Eigen::MatrixXd::Zero(posterior.num_basis, 0));
    }
  }
  return out;
}

CurveSummary posterior_mean_curves(const std::vector<Draw>& draws, const BasisSystem& basis) {
  if (draws.empty()) throw InvalidDimension("no draws for curve summaries");
  const auto& B = basis.basis;
  const Eigen::Index T = B.rows();
  const std::size_t M = draws.size();
  const int S = static_cast<int>(draws.front().beta.size());
  CurveSummary out;
  // Subjects are processed in chunks so that the per-point sample buffer
  // stays bounded for long chains.
  const Eigen::Index budget = 8'000'000;
  for (int s = 0; s < S; ++s) {
    const Eigen::Index n = draws.front().eta[s].rows();
    out.mean.push_back(Eigen::MatrixXd::Zero(n, T));
    out.lower.push_back(Eigen::MatrixXd::Zero(n, T));
    out.upper.push_back(Eigen::MatrixXd::Zero(n, T));
    const Eigen::Index chunk = std::max<Eigen::Index>(1, budget / (static_cast<Eigen::Index>(M) * T));
    std::vector<double> buffer;
    for (Eigen::Index first = 0; first < n; first += chunk) {
      const Eigen::Index count = std::min(chunk, n - first);
      buffer.assign(static_cast<std::size_t>(count * T) * M, 0.0);
      for (std::size_t m = 0; m < M; ++m) {
        const Draw& d = draws[m];
        Eigen::MatrixXd coef = d.eta[s].middleRows(first, count) * d.shared_loadings.transpose() +
                               d.rho[s].middleRows(first, count) * d.specific_loadings[s].transpose();
        coef.rowwise() += d.beta[s].transpose();
        const Eigen::MatrixXd f = coef * B.transpose();
        out.mean[s].middleRows(first, count) += f;
        for (Eigen::Index i = 0; i < count; ++i)
          for (Eigen::Index t = 0; t < T; ++t) buffer[static_cast<std::size_t>(i * T + t) * M + m] = f(i, t);
      }
      std::vector<double> sample(M);
      for (Eigen::Index i = 0; i < count; ++i) {
        for (Eigen::Index t = 0; t < T; ++t) {
          const auto offset = static_cast<std::size_t>(i * T + t) * M;
          std::copy(buffer.begin() + offset, buffer.begin() + offset + M, sample.begin());
          std::sort(sample.begin(), sample.end());
          out.lower[s](first + i, t) = quantile_sorted(sample, 0.025);
          out.upper[s](first + i, t) = quantile_sorted(sample, 0.975);
        }
      }
    }
    out.mean[s] /= static_cast<double>(M);
  }
  return out;
}

CurveSummary posterior_mean_curves(const PosteriorDraws& posterior, const std::vector<int>& members,
                                   const BasisSystem& basis) {
  std::vector<Draw> subset;
  for (int m : members) subset.push_back(posterior.draws.at(m));
  return posterior_mean_curves(subset, basis);
}

CovarianceSummaries covariance_summaries(const std::vector<Draw>& draws, const BasisSystem& basis) {
  if (draws.empty()) throw InvalidDimension("no draws for covariance summaries");
  const auto& B = basis.basis;
  const Eigen::Index R = B.cols();
  const int S = static_cast<int>(draws.front().beta.size());
  Eigen::MatrixXd shared = Eigen::MatrixXd::Zero(R, R);
  std::vector<Eigen::MatrixXd> specific(S, Eigen::MatrixXd::Zero(R, R));
  for (const auto& d : draws) {
    shared.noalias() += d.shared_loadings * d.shared_loadings.transpose();
    for (int s = 0; s < S; ++s) specific[s].noalias() += d.specific_loadings[s] * d.specific_loadings[s].transpose();
  }
  const double M = static_cast<double>(draws.size());
  auto to_time = [&](const Eigen::MatrixXd& coef_cov) {
    Eigen::MatrixXd c = B * (coef_cov / M) * B.transpose();
    return Eigen::MatrixXd(0.5 * (c + c.transpose()));
  };
  CovarianceSummaries out;
  out.shared = to_time(shared);
  for (int s = 0; s < S; ++s) {
    out.specific.push_back(to_time(specific[s]));
    out.latent.push_back(out.shared + out.specific.back());
  }
  return out;
}

CovarianceSummaries covariance_summaries(const PosteriorDraws& posterior, const std::vector<int>& members,
                                         const BasisSystem& basis) {
  std::vector<Draw> subset;
  for (int m : members) subset.push_back(posterior.draws.at(m));
  return covariance_summaries(subset, basis);
}

void leading_eigenpairs(const Eigen::MatrixXd& sym, int count, Eigen::MatrixXd& vectors, Eigen::VectorXd& values) {
  const Eigen::Index n = sym.rows();
  if (count < 0 || count > n) throw InvalidDimension("requested more eigenpairs than the matrix dimension");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
  vectors.resize(n, count);
  values.resize(count);
  for (int j = 0; j < count; ++j) {
    Eigen::VectorXd v = es.eigenvectors().col(n - 1 - j);
    Eigen::Index at = 0;
    v.cwiseAbs().maxCoeff(&at);
    if (v(at) < 0) v = -v;
    vectors.col(j) = v;
    values(j) = std::max(0.0, es.eigenvalues()(n - 1 - j));
  }
}

IdentifiedLoadings covariance_derived_loadings(const CovarianceSummaries& summaries,
                                               const FactorConfiguration& config) {
  const Eigen::Index T = summaries.shared.rows();
  const int S = static_cast<int>(summaries.latent.size());
  if (static_cast<int>(config.specific.size()) != S) {
    throw InvalidDimension("configuration and covariance summaries disagree on group count");
  }
  if (config.shared > T) throw InvalidDimension("L* exceeds the grid length");
  IdentifiedLoadings out;
  out.covariances = summaries;
  Eigen::MatrixXd U;
  leading_eigenpairs(summaries.shared, config.shared, U, out.shared_eigenvalues);
  out.shared = U * out.shared_eigenvalues.cwiseSqrt().asDiagonal();
  const Eigen::MatrixXd shared_part = out.shared * out.shared.transpose();

  for (int s = 0; s < S; ++s) {
    const int K = config.specific[s];
    if (K > T) throw InvalidDimension("K*_s exceeds the grid length");
    const Eigen::MatrixXd residual = summaries.latent[s] - shared_part;
    Eigen::MatrixXd Us;
    Eigen::VectorXd Ds;
    leading_eigenpairs(residual, K, Us, Ds);
    // roundoff-level eigenvalues of a rank-deficient residual count as zero
    const double floor = K > 0 ? 1e-10 * Ds(0) : 0.0;
    int positive = 0;
    while (positive < K && Ds(positive) > floor) ++positive;
    if (positive < K) {
      out.warnings.push_back("group " + std::to_string(s + 1) + ": only " + std::to_string(positive) +
                             " positive residual eigenvalues for K* = " + std::to_string(K));
      Us.conservativeResize(Eigen::NoChange, positive);
      Ds.conservativeResize(positive);
    }
    out.specific.push_back(Us * Ds.cwiseSqrt().asDiagonal());
    out.specific_eigenvalues.push_back(Ds);
  }
  return out;
}

PosteriorSummary summarize_posterior(const PosteriorDraws& posterior) {
  PosteriorSummary out;
  out.modal = modal_configuration(posterior);
  out.histogram = configuration_histogram(posterior.configs, 15);
  const BasisSystem basis = posterior.basis();
  out.aligned = align_posterior(posterior, out.modal.members);
  out.curves = posterior_mean_curves(out.aligned.draws, basis);
  out.loadings = covariance_derived_loadings(covariance_summaries(out.aligned.draws, basis), out.modal.config);
  return out;
}

}  // namespace mgf
