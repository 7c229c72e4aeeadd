#include "mgfactor/simulate.hpp"

#include <cmath>
#include <regex>

#include "mgfactor/errors.hpp"

namespace mgf {

std::vector<double> ScenarioConfig::default_sigma2_beta(int num_groups) {
  std::vector<double> v(num_groups);
  for (int s = 0; s < num_groups; ++s) v[s] = 0.2 + 0.2 * s;
  return v;
}

void ScenarioConfig::validate() const {
  const int S = num_groups();
  if (S < 1) throw ValidationError("scenario needs at least one group");
  if (static_cast<int>(specific_factors.size()) != S || static_cast<int>(sigma2_beta.size()) != S) {
    throw ValidationError("per-group scenario settings must all have S entries");
  }
  if (shared_factors < 0) throw ValidationError("shared factor count must be nonnegative");
  for (int s = 0; s < S; ++s) {
    if (specific_factors[s] < 0) throw ValidationError("group-specific factor counts must be nonnegative");
    if (sample_sizes[s] < 1) throw ValidationError("sample sizes must be positive");
    if (!(sigma2_beta[s] >= 0)) throw ValidationError("sigma2_beta must be nonnegative");
  }
  if (num_points < 4) throw ValidationError("T must be >= 4");
  if (num_basis < 4 || num_basis > num_points) throw ValidationError("R must lie in [4, T]");
  if (!(snr > 0)) throw ValidationError("snr must be positive");
  if (replicates < 1) throw ValidationError("replicates must be >= 1");
}

std::vector<std::string> ScenarioConfig::preset_names() {
  std::vector<std::string> out;
  for (const char* f : {"A-322", "A-320", "B-300", "C-022"})
    for (const char* n : {"n40-40", "n80-80", "n40-80"}) out.push_back(std::string(f) + "-" + n);
  return out;
}

ScenarioConfig ScenarioConfig::preset(const std::string& name) {
  static const std::regex pattern(R"(([ABC])-(\d)(\d)(\d)-n(\d+)-(\d+))");
  std::smatch m;
  if (!std::regex_match(name, m, pattern)) throw ValidationError("unknown scenario preset '" + name + "'");
  const std::string family = m[1].str();
  const int L = std::stoi(m[2].str());
  const int K1 = std::stoi(m[3].str());
  const int K2 = std::stoi(m[4].str());
  const bool known = (family == "A" && L == 3 && K1 == 2 && (K2 == 2 || K2 == 0)) ||
                     (family == "B" && L == 3 && K1 == 0 && K2 == 0) ||
                     (family == "C" && L == 0 && K1 == 2 && K2 == 2);
  const int n1 = std::stoi(m[5].str());
  const int n2 = std::stoi(m[6].str());
  const bool sizes = (n1 == 40 && n2 == 40) || (n1 == 80 && n2 == 80) || (n1 == 40 && n2 == 80);
  if (!known || !sizes) throw ValidationError("unknown scenario preset '" + name + "'");
  ScenarioConfig c;
  c.name = name;
  c.shared_factors = L;
  c.specific_factors = {K1, K2};
  c.sample_sizes = {n1, n2};
  c.sigma2_beta = default_sigma2_beta(2);
  return c;
}

ScenarioTruth generate_truth(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const int S = config.num_groups();
  const int T = config.num_points;
  const int R = config.num_basis;

  ScenarioTruth truth;
  truth.config = config;
  truth.grid = TimeGrid::uniform(T);
  truth.basis = build_bspline_basis(truth.grid, R);
  const auto& B = truth.basis;

  for (int s = 0; s < S; ++s) truth.beta.push_back(rng.normal_vector(R) * std::sqrt(config.sigma2_beta[s]));
  truth.shared_loadings = rng.normal_matrix(R, config.shared_factors);
  for (int s = 0; s < S; ++s) truth.specific_loadings.push_back(rng.normal_matrix(R, config.specific_factors[s]));

  truth.sigma2_eps.resize(S);
  const Eigen::MatrixXd BL = B * truth.shared_loadings;
  for (int s = 0; s < S; ++s) {
    const Eigen::MatrixXd BP = B * truth.specific_loadings[s];
    truth.sigma_f.push_back(BL * BL.transpose() + BP * BP.transpose());
    const double trace = truth.sigma_f[s].trace();
    if (!(trace > 0)) {
      throw ValidationError("scenario group " + std::to_string(s + 1) +
                            " has no latent signal; noise variance would be zero");
    }
    truth.sigma2_eps(s) = trace / (T * config.snr);

    // f ~ N(B beta, Sigma_f), drawn through its factor representation.
    const int n = config.sample_sizes[s];
    const Eigen::MatrixXd eta = rng.normal_matrix(n, config.shared_factors);
    const Eigen::MatrixXd rho = rng.normal_matrix(n, config.specific_factors[s]);
    Eigen::MatrixXd f = eta * BL.transpose() + rho * BP.transpose();
    f.rowwise() += (B * truth.beta[s]).transpose();
    truth.f.push_back(std::move(f));
  }
  return truth;
}

ScenarioTruth generate_truth(const ScenarioConfig& config) {
  Rng rng(config.seed, {0x7275746855ULL});
  return generate_truth(config, rng);
}

FunctionalDataset generate_replicate(const ScenarioTruth& truth, Rng& rng) {
  FunctionalDataset data;
  data.grid = truth.grid;
  for (int s = 0; s < truth.num_groups(); ++s) {
    GroupData g;
    g.id = std::to_string(s + 1);
    const Eigen::MatrixXd& f = truth.f[s];
    const double sd = std::sqrt(truth.sigma2_eps(s));
    g.y = f + sd * rng.normal_matrix(f.rows(), f.cols());
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      g.subject_ids.push_back("g" + g.id + "_s" + std::to_string(i + 1));
    }
    data.groups.push_back(std::move(g));
  }
  return data;
}

FunctionalDataset generate_replicate(const ScenarioTruth& truth, int replicate_index) {
  Rng rng(truth.config.seed, {0x6e6f697365ULL, static_cast<std::uint64_t>(replicate_index)});
  return generate_replicate(truth, rng);
}

std::vector<ShrinkageSetting> sensitivity_grid() {
  std::vector<ShrinkageSetting> out;
  for (auto [a1, a2] : {std::pair{5.0, 25.0}, std::pair{5.0, 50.0}, std::pair{10.0, 30.0}})
    for (double v0 : {0.00025, 0.001, 0.005, 0.01}) out.push_back({a1, a2, v0});
  return out;
}

}  // namespace mgf
