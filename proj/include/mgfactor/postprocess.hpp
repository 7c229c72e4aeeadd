#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mgfactor/basis.hpp"
#include "mgfactor/gibbs.hpp"

namespace mgf {

struct ModalConfiguration {
  FactorConfiguration config;
  std::vector<int> members;  // indices into PosteriorDraws::draws
};

// Most frequent configuration; ties go to the smallest total dimension, then
// the lexicographically smallest tuple. Throws InvalidDimension when empty.
ModalConfiguration modal_configuration(const std::vector<FactorConfiguration>& configs);
ModalConfiguration modal_configuration(const PosteriorDraws& draws);

// Configurations sorted by count (descending), ties as in modal_configuration.
std::vector<std::pair<FactorConfiguration, int>> configuration_histogram(
    const std::vector<FactorConfiguration>& configs, int limit = 15);

// sum_j [ mean_i x_ij^4 - (mean_i x_ij^2)^2 ]
double varimax_criterion(const Eigen::MatrixXd& loadings);

// Orthogonal q x q rotation Q maximizing varimax_criterion(loadings * Q).
// Stops when the gain drops below 1e-8 or after 500 iterations.
Eigen::MatrixXd varimax(const Eigen::MatrixXd& loadings);

// Signed permutation P (q x q, one +-1 per row and column) minimizing
// ||x P - reference||_F^2, found by optimal assignment.
Eigen::MatrixXd best_signed_permutation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& reference);

// One posterior draw of a loading block and the score matrices it multiplies
// (one per group for the shared block, a single one for a specific block).
struct FactorDraw {
  Eigen::MatrixXd loadings;  // R x q
  std::vector<Eigen::MatrixXd> scores;  // each n x q
};

struct RspResult {
  std::vector<FactorDraw> draws;           // aligned
  std::vector<Eigen::MatrixXd> transforms;  // aligned loadings = input loadings * transform
  Eigen::MatrixXd reference;                // mean of the aligned loadings
  int iterations = 0;
  double discrepancy = 0.0;
};

// Rotation-sign-permutation alignment: varimax-rotate each draw, then
// repeatedly match every draw to the current reference by a signed column
// permutation and reset the reference to the mean, until the total squared
// discrepancy changes by less than 1e-6 (at most 100 rounds). The first
// draw's rotated loadings seed the reference. Scores receive the same
// transforms, so loadings * scores^T is unchanged per draw.
RspResult rsp_align(const std::vector<FactorDraw>& draws);

// Active column indices (z_l > l) of an indicator vector.
std::vector<int> active_columns(const std::vector<int>& z);

// Copies of the member draws with the active columns of every block replaced
// by their RSP-aligned versions. Members must share one configuration.
struct AlignedPosterior {
  std::vector<Draw> draws;
  Eigen::MatrixXd shared_mean;                 // R x L*, mean aligned shared loadings
  std::vector<Eigen::MatrixXd> specific_mean;  // R x K*_s
};
AlignedPosterior align_posterior(const PosteriorDraws& posterior, const std::vector<int>& members);

struct CurveSummary {
  std::vector<Eigen::MatrixXd> mean;   // per group n_s x T
  std::vector<Eigen::MatrixXd> lower;  // 2.5% pointwise quantile
  std::vector<Eigen::MatrixXd> upper;  // 97.5%
};

// Posterior mean curves and 95% pointwise bands over the given draws.
CurveSummary posterior_mean_curves(const std::vector<Draw>& draws, const BasisSystem& basis);
CurveSummary posterior_mean_curves(const PosteriorDraws& posterior, const std::vector<int>& members,
                                   const BasisSystem& basis);

struct CovarianceSummaries {
  Eigen::MatrixXd shared;                 // T x T
  std::vector<Eigen::MatrixXd> specific;  // per group
  std::vector<Eigen::MatrixXd> latent;    // shared + specific per group
};

CovarianceSummaries covariance_summaries(const std::vector<Draw>& draws, const BasisSystem& basis);
CovarianceSummaries covariance_summaries(const PosteriorDraws& posterior, const std::vector<int>& members,
                                         const BasisSystem& basis);

struct IdentifiedLoadings {
  Eigen::MatrixXd shared;                 // T x L*
  std::vector<Eigen::MatrixXd> specific;  // T x K*_s
  Eigen::VectorXd shared_eigenvalues;
  std::vector<Eigen::VectorXd> specific_eigenvalues;
  CovarianceSummaries covariances;
  std::vector<std::string> warnings;
};

// Scaled leading eigenvectors of the posterior-mean shared covariance and of
// each group's residual latent covariance. Columns follow descending
// eigenvalue with the largest-magnitude entry made positive.
IdentifiedLoadings covariance_derived_loadings(const CovarianceSummaries& summaries,
                                               const FactorConfiguration& config);

// Leading eigenpairs (descending) of the symmetrized matrix, sign-normalized.
// Negative eigenvalues are clipped to zero.
void leading_eigenpairs(const Eigen::MatrixXd& sym, int count, Eigen::MatrixXd& vectors, Eigen::VectorXd& values);

// Whole identification pipeline.
struct PosteriorSummary {
  ModalConfiguration modal;
  std::vector<std::pair<FactorConfiguration, int>> histogram;
  AlignedPosterior aligned;
  CurveSummary curves;
  IdentifiedLoadings loadings;
};
PosteriorSummary summarize_posterior(const PosteriorDraws& posterior);

}  // namespace mgf
