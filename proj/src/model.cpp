#include "mgfactor/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mgfactor/errors.hpp"

namespace mgf {

namespace {

std::string group_label(int s) { return "group " + std::to_string(s); }

}  // namespace

int FunctionalDataset::total_subjects() const {
  int total = 0;
  for (const auto& g : groups) total += g.num_subjects();
  return total;
}

void FunctionalDataset::validate() const {
  try {
    grid.validate();
  } catch (const InvalidDimension& e) {
    throw ValidationError(e.what());
  }
  if (groups.empty()) throw ValidationError("dataset has no groups");
  for (const auto& g : groups) {
    if (g.y.rows() < 1) throw ValidationError("group '" + g.id + "' has no subjects");
    if (g.y.cols() != grid.size()) {
      throw ValidationError("group '" + g.id + "' has " + std::to_string(g.y.cols()) +
                            " columns, grid has " + std::to_string(grid.size()));
    }
    if (!g.y.allFinite()) throw ValidationError("group '" + g.id + "' contains missing or non-finite values");
    if (!g.subject_ids.empty() && static_cast<int>(g.subject_ids.size()) != g.num_subjects()) {
      throw ValidationError("group '" + g.id + "' subject id count mismatch");
    }
  }
}

void CuspHyper::validate() const {
  if (!(a1 > 0 && a2 > 0 && a_alpha > 0 && b_alpha > 0 && iota > 0)) {
    throw ValidationError("shrinkage hyperparameters must be positive");
  }
  if (!(v0 > 0 && v0 < 1)) throw ValidationError("v0 must lie in (0, 1)");
}

void ModelState::check(const BasisSystem& basis) const {
  const int R = basis.num_basis();
  const int S = num_groups();
  if (sigma2_eps.size() != S || sigma2_beta.size() != S || static_cast<int>(specific.size()) != S ||
      static_cast<int>(eta.size()) != S || static_cast<int>(rho.size()) != S) {
    throw InvalidDimension("model state has inconsistent group counts");
  }
  const int L = shared.num_columns();
  if (shared.xi.rows() != R || shared.xi.cols() != L) throw InvalidDimension("shared xi must be R x L");
  for (int s = 0; s < S; ++s) {
    if (beta[s].size() != R) throw InvalidDimension("beta of " + group_label(s) + " must have length R");
    const int K = specific[s].num_columns();
    if (specific[s].xi.rows() != R || specific[s].xi.cols() != K) {
      throw InvalidDimension("specific xi of " + group_label(s) + " must be R x K");
    }
    if (eta[s].cols() != L) throw InvalidDimension("eta of " + group_label(s) + " must have L columns");
    if (rho[s].cols() != K) throw InvalidDimension("rho of " + group_label(s) + " must have K columns");
    if (eta[s].rows() != rho[s].rows()) throw InvalidDimension("eta/rho row mismatch in " + group_label(s));
    if (!(sigma2_eps(s) > 0)) throw InvalidState("sigma2_eps of " + group_label(s) + " must be positive");
    if (!(sigma2_beta(s) > 0)) throw InvalidState("sigma2_beta of " + group_label(s) + " must be positive");
  }
}

void ModelState::check(const BasisSystem& basis, const FunctionalDataset& data) const {
  check(basis);
  if (data.num_groups() != num_groups()) throw InvalidDimension("state and data disagree on group count");
  if (data.num_points() != basis.num_points()) throw InvalidDimension("basis and data grid lengths differ");
  for (int s = 0; s < num_groups(); ++s) {
    if (eta[s].rows() != data.groups[s].num_subjects()) {
      throw InvalidDimension("factor rows of " + group_label(s) + " do not match subject count");
    }
  }
}

Eigen::MatrixXd reconstruct_group(const ModelState& state, const BasisSystem& basis, int group) {
  const auto& B = basis.basis;
  // Coefficients per subject as rows: beta^T + eta Lambda^T + rho Phi^T.
  Eigen::MatrixXd coef = state.eta[group] * state.shared_loadings().transpose() +
                         state.rho[group] * state.specific_loadings(group).transpose();
  coef.rowwise() += state.beta[group].transpose();
  return coef * B.transpose();
}

std::vector<Eigen::MatrixXd> reconstruct_curves(const ModelState& state, const BasisSystem& basis) {
  state.check(basis);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(state.num_groups());
  for (int s = 0; s < state.num_groups(); ++s) out.push_back(reconstruct_group(state, basis, s));
  return out;
}

double log_likelihood(const ModelState& state, const FunctionalDataset& data, const BasisSystem& basis) {
  state.check(basis, data);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (int s = 0; s < state.num_groups(); ++s) {
    const double var = state.sigma2_eps(s);
    const Eigen::MatrixXd resid = data.groups[s].y - reconstruct_group(state, basis, s);
    const double count = static_cast<double>(resid.size());
    total += -0.5 * count * (log2pi + std::log(var)) - 0.5 * resid.squaredNorm() / var;
  }
  return total;
}

MarginalCovariances marginal_covariances(const ModelState& state, const BasisSystem& basis, int group) {
  state.check(basis);
  if (group < 0 || group >= state.num_groups()) throw InvalidDimension("group index out of range");
  const Eigen::MatrixXd BL = basis.basis * state.shared_loadings();
  const Eigen::MatrixXd BP = basis.basis * state.specific_loadings(group);
  MarginalCovariances out;
  out.shared = BL * BL.transpose();
  out.specific = BP * BP.transpose();
  const int T = basis.num_points();
  out.noise = state.sigma2_eps(group) * Eigen::MatrixXd::Identity(T, T);
  return out;
}

}  // namespace mgf
