#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mgfactor/basis.hpp"
#include "mgfactor/model.hpp"
#include "mgfactor/rng.hpp"

namespace mgf {

struct ScenarioConfig {
  std::string name = "custom";
  int shared_factors = 3;
  std::vector<int> specific_factors{2, 2};
  std::vector<int> sample_sizes{40, 80};
  int num_points = 60;
  int num_basis = 30;
  std::vector<double> sigma2_beta{0.2, 0.4};
  double snr = 2.0;
  int replicates = 1;
  std::uint64_t seed = 1;

  int num_groups() const { return static_cast<int>(sample_sizes.size()); }
  // Throws ValidationError.
  void validate() const;

  // Named presets "<A-322|A-320|B-300|C-022>-n<40-40|80-80|40-80>".
  static ScenarioConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();
  // Mean-coefficient variances 0.2, 0.4, 0.6, ... for S groups.
  static std::vector<double> default_sigma2_beta(int num_groups);
};

// Latent truth held fixed across replicates.
struct ScenarioTruth {
  ScenarioConfig config;
  TimeGrid grid;
  Eigen::MatrixXd basis;  // T x R
  std::vector<Eigen::VectorXd> beta;
  Eigen::MatrixXd shared_loadings;                 // R x L_true
  std::vector<Eigen::MatrixXd> specific_loadings;  // R x K_true,s
  std::vector<Eigen::MatrixXd> f;                  // n_s x T
  Eigen::VectorXd sigma2_eps;
  std::vector<Eigen::MatrixXd> sigma_f;  // T x T

  int num_groups() const { return static_cast<int>(f.size()); }
};

// Throws ValidationError when a group carries no latent signal (zero noise level).
ScenarioTruth generate_truth(const ScenarioConfig& config, Rng& rng);
// Truth drawn from the stream derived from config.seed.
ScenarioTruth generate_truth(const ScenarioConfig& config);

// y = f + noise. The 1-based replicate index selects an independent stream
// derived from the scenario seed.
FunctionalDataset generate_replicate(const ScenarioTruth& truth, int replicate_index);
FunctionalDataset generate_replicate(const ScenarioTruth& truth, Rng& rng);

// (a1, a2, v0) settings of the shrinkage-hyperparameter sensitivity grid.
struct ShrinkageSetting {
  double a1;
  double a2;
  double v0;
};
std::vector<ShrinkageSetting> sensitivity_grid();

}  // namespace mgf
