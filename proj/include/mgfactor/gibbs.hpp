#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgfactor/basis.hpp"
#include "mgfactor/cusp.hpp"
#include "mgfactor/distributions.hpp"
#include "mgfactor/errors.hpp"
#include "mgfactor/model.hpp"
#include "mgfactor/rng.hpp"

namespace mgf {

// Priors on the per-group variances. The default noise prior (shape -1,
// rate 0) is the flat prior p(sigma2_eps) prop. to 1; any proper
// Inv-Gamma(shape, rate) may be supplied instead.
struct VariancePriors {
  double a_beta = 1.0;
  double b_beta = 1.0;
  double eps_shape = -1.0;
  double eps_rate = 0.0;
};

enum class InitStrategy { kSpectral, kPrior };

struct SamplerConfig {
  int iterations = 20000;
  int burn_in = 10000;
  int thin = 1;
  int max_shared = 10;    // L_max
  int max_specific = 10;  // K_max, same for every group
  int num_basis = 0;      // 0 selects round(T / 2)
  double ridge = kDefaultRidge;
  CuspHyper shared_hyper;
  CuspHyper specific_hyper;
  VariancePriors priors;
  bool rescale = true;
  InitStrategy init = InitStrategy::kSpectral;
  std::uint64_t seed = 1;

  // Throws ValidationError.
  void validate() const;
  int retained() const { return (iterations - burn_in) / thin; }
  int resolved_num_basis(int num_points) const;
};

// Active factor counts of one iteration: (L*, K*_1, ..., K*_S).
struct FactorConfiguration {
  int shared = 0;
  std::vector<int> specific;

  int total() const;
  std::string label() const;  // "(3,2,2)"
  auto operator<=>(const FactorConfiguration&) const = default;
};

FactorConfiguration configuration_of(const ModelState& state);

// Stored subset of one retained state.
struct Draw {
  int iteration = 0;
  std::vector<Eigen::VectorXd> beta;
  Eigen::VectorXd sigma2_eps;
  Eigen::VectorXd sigma2_beta;
  Eigen::MatrixXd shared_loadings;                 // R x L_max
  std::vector<Eigen::MatrixXd> specific_loadings;  // R x K_max per group
  std::vector<Eigen::MatrixXd> eta;
  std::vector<Eigen::MatrixXd> rho;
  std::vector<int> z_shared;
  std::vector<std::vector<int>> z_specific;

  static Draw capture(const ModelState& state, int iteration);
};

struct PosteriorDraws {
  TimeGrid grid;
  int num_basis = 0;
  double ridge = kDefaultRidge;
  std::vector<std::string> group_ids;
  std::vector<Draw> draws;
  std::vector<FactorConfiguration> configs;  // one per retained draw

  int size() const { return static_cast<int>(draws.size()); }
  BasisSystem basis() const { return BasisSystem::make(grid, num_basis, ridge); }
};

// Thrown when any update fails during run_chain.
class ChainError : public Error {
 public:
  ChainError(int iteration, std::string parameter, const std::string& cause);
  int iteration() const { return iteration_; }
  const std::string& parameter() const { return parameter_; }

 private:
  int iteration_;
  std::string parameter_;
};

// Identifies an expansion block: the shared one or the specific one of a group.
struct BlockId {
  int group = -1;  // -1 for the shared block
  static BlockId shared() { return {}; }
  static BlockId specific(int s) { return {s}; }
  bool is_shared() const { return group < 0; }
};

// ---- Full conditionals (exposed for validation) ----------------------------

GaussianConditional beta_conditional(const ModelState& state, const FunctionalDataset& data,
                                     const BasisSystem& basis, int group);
InvGammaParams sigma_eps_conditional(const ModelState& state, const FunctionalDataset& data,
                                     const BasisSystem& basis, int group, const VariancePriors& priors);
InvGammaParams sigma_beta_conditional(const ModelState& state, const BasisSystem& basis, int group,
                                      const VariancePriors& priors);
// P(m = +1 | xi) for one sign entry.
double sign_probability(double xi);
// Conditional of vec(Xi) (column-major, R*L) for one block.
GaussianConditional xi_conditional(const ModelState& state, const FunctionalDataset& data,
                                   const BasisSystem& basis, BlockId block);

struct ScalarGaussian {
  double mean = 0.0;
  double variance = 1.0;
};
// Conditional of gamma_l (0-based column) given all other columns at their current values.
ScalarGaussian gamma_conditional(const ModelState& state, const FunctionalDataset& data,
                                 const BasisSystem& basis, BlockId block, int column);
// Conditional of the scores of subject `subject` in `group` for a block.
GaussianConditional factor_conditional(const ModelState& state, const FunctionalDataset& data,
                                       const BasisSystem& basis, BlockId block, int group, int subject);

// ---- Samplers ----------------------------------------------------------------

void sample_beta(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis, Rng& rng);
void sample_sigma_eps(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                      const VariancePriors& priors, Rng& rng);
void sample_sigma_beta(ModelState& state, const BasisSystem& basis, const VariancePriors& priors, Rng& rng);
void sample_signs(ExpansionBlock& block, Rng& rng);
void sample_xi(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis, BlockId block,
               Rng& rng);
void sample_gamma_sequential(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                             BlockId block, Rng& rng);
// Divides each xi column by its mean absolute entry and multiplies gamma by
// the same factor, leaving the loadings unchanged. All-zero columns are kept.
void rescale_expansion(ExpansionBlock& block);
// Scores of one block (eta for the shared block, rho_s for a specific block).
void sample_block_factors(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                          BlockId block, Rng& rng);
// Both eta and every rho_s, in that order.
void sample_factors(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis, Rng& rng);
// Shrinkage updates of one block: sigma2_gamma, indicators/theta, sticks, alpha.
void sample_shrinkage(ExpansionBlock& block, Rng& rng);

// ---- Chain driver --------------------------------------------------------------

// Independent random streams of one chain.
struct ChainStreams {
  Rng global;
  Rng shared;
  std::vector<Rng> specific;

  static ChainStreams make(std::uint64_t seed, int num_groups);
};

ModelState initialize_state(const FunctionalDataset& data, const BasisSystem& basis, const SamplerConfig& config,
                            Rng& rng);

// One full sweep in the fixed update order.
void gibbs_sweep(ModelState& state, const FunctionalDataset& data, const BasisSystem& basis,
                 const SamplerConfig& config, ChainStreams& streams);

using ProgressCallback = std::function<void(int iteration, const ModelState& state)>;

PosteriorDraws run_chain(const FunctionalDataset& data, const SamplerConfig& config,
                         const ProgressCallback& progress = {});

}  // namespace mgf
