#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgfactor/basis.hpp"

namespace mgf {

// Curves of one group, one row per subject (n_s x T).
struct GroupData {
  std::string id;
  std::vector<std::string> subject_ids;
  Eigen::MatrixXd y;

  int num_subjects() const { return static_cast<int>(y.rows()); }
};

struct FunctionalDataset {
  TimeGrid grid;
  std::vector<GroupData> groups;

  int num_groups() const { return static_cast<int>(groups.size()); }
  int num_points() const { return grid.size(); }
  int total_subjects() const;
  // Throws ValidationError on empty groups, shape mismatch or non-finite values.
  void validate() const;
};

// Hyperparameters of one cumulative shrinkage block.
struct CuspHyper {
  double a1 = 10.0;  // Inv-Gamma shape for sigma2_gamma
  double a2 = 30.0;  // Inv-Gamma rate for sigma2_gamma
  double v0 = 1e-3;  // spike variance multiplier
  double a_alpha = 2.0;
  double b_alpha = 1.0;  // Gamma(a_alpha, b_alpha), shape-rate
  double iota = 1.0;

  void validate() const;
};

// Shrinkage machinery of one block. Indicators z are 1-based: z_l in 1..L.
struct CuspState {
  std::vector<int> z;
  Eigen::VectorXd nu;            // stick fractions, nu(L-1) == 1
  Eigen::VectorXd omega;         // stick weights, sum to 1
  Eigen::VectorXd pi;            // cumulative weights
  Eigen::VectorXd theta;         // v0 or 1
  Eigen::VectorXd sigma2_gamma;  // per-column scale
  double alpha = 1.0;
  CuspHyper hyper;

  int size() const { return static_cast<int>(z.size()); }
};

// Parameter-expanded loading block: loadings = xi * diag(gamma).
struct ExpansionBlock {
  Eigen::MatrixXd xi;     // R x L
  Eigen::VectorXd gamma;  // L
  Eigen::MatrixXd signs;  // R x L, entries +-1
  CuspState cusp;

  int num_columns() const { return static_cast<int>(gamma.size()); }
  Eigen::MatrixXd loadings() const { return xi * gamma.asDiagonal(); }
};

struct ModelState {
  std::vector<Eigen::VectorXd> beta;  // per group, length R
  Eigen::VectorXd sigma2_eps;         // per group
  Eigen::VectorXd sigma2_beta;        // per group
  ExpansionBlock shared;
  std::vector<ExpansionBlock> specific;  // per group
  std::vector<Eigen::MatrixXd> eta;      // per group, n_s x L
  std::vector<Eigen::MatrixXd> rho;      // per group, n_s x K

  int num_groups() const { return static_cast<int>(beta.size()); }
  Eigen::MatrixXd shared_loadings() const { return shared.loadings(); }
  Eigen::MatrixXd specific_loadings(int s) const { return specific[s].loadings(); }
  // Dimension agreement with the basis (and optionally the data) plus
  // positivity of variances. Throws InvalidDimension / InvalidState.
  void check(const BasisSystem& basis) const;
  void check(const BasisSystem& basis, const FunctionalDataset& data) const;
};

// Per-group fitted curves f_is = B(beta_s + Lambda eta_is + Phi_s rho_is), n_s x T.
std::vector<Eigen::MatrixXd> reconstruct_curves(const ModelState& state, const BasisSystem& basis);
Eigen::MatrixXd reconstruct_group(const ModelState& state, const BasisSystem& basis, int group);

// Gaussian log likelihood of all curves given the state.
double log_likelihood(const ModelState& state, const FunctionalDataset& data, const BasisSystem& basis);

struct MarginalCovariances {
  Eigen::MatrixXd shared;    // B Lambda Lambda^T B^T
  Eigen::MatrixXd specific;  // B Phi_s Phi_s^T B^T
  Eigen::MatrixXd noise;     // sigma2_eps_s I
  Eigen::MatrixXd total() const { return shared + specific + noise; }
};

MarginalCovariances marginal_covariances(const ModelState& state, const BasisSystem& basis, int group);

}  // namespace mgf
