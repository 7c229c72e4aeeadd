#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "mgfactor/gibbs.hpp"
#include "mgfactor/metrics.hpp"
#include "mgfactor/model.hpp"
#include "mgfactor/postprocess.hpp"
#include "mgfactor/simulate.hpp"

namespace mgf::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";

// Shortest form is not used on purpose: 17 significant digits always
// round-trip a double and give identical bytes on every run.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& where);

// ---- datasets ------------------------------------------------------------

// Wide layout "subject_id,group_id,t_1,...,t_T", groups in order of first
// appearance.
void write_dataset(const fs::path& path, const FunctionalDataset& data);
// "index,time"
void write_grid(const fs::path& path, const TimeGrid& grid);
TimeGrid read_grid(const fs::path& path);
FunctionalDataset read_dataset(const fs::path& data_path, const fs::path& grid_path);

// ---- configuration ---------------------------------------------------------

// One JSON file may hold the sections "scenario", "sampler" and
// "postprocess"; unknown keys anywhere raise ValidationError.
struct RunConfig {
  ScenarioConfig scenario;
  SamplerConfig sampler;
  int histogram_limit = 15;
  bool has_scenario = false;
  bool has_sampler = false;
  json raw = json::object();
};

RunConfig parse_config(const json& doc);
RunConfig read_config(const fs::path& path);
ScenarioConfig scenario_from_json(const json& doc);
SamplerConfig sampler_from_json(const json& doc);
json scenario_to_json(const ScenarioConfig& config);
json sampler_to_json(const SamplerConfig& config);

// 64-bit FNV-1a of the bytes, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

// ---- manifest ---------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version = kVersion;
  json to_json() const;
};

std::string utc_timestamp();
// Writes to a temporary sibling and renames it into place.
void write_text_atomic(const fs::path& path, const std::string& text);
// dir/manifest_<command>.json
void write_manifest(const fs::path& dir, const RunManifest& manifest);

// ---- draws -------------------------------------------------------------------

// One CSV per parameter family, columns iteration,group,row,col,value. Group
// is the 1-based group index, or 0 for shared quantities. Vectors use col 0.
// model.json records grid, basis size, ridge and group ids.
std::vector<std::string> write_posterior(const fs::path& dir, const PosteriorDraws& posterior);
PosteriorDraws read_posterior(const fs::path& dir);

// ---- truth -------------------------------------------------------------------

// Loadings are written in the time domain (B times the coefficient loadings).
std::vector<std::string> write_truth(const fs::path& dir, const ScenarioTruth& truth);

struct TruthTables {
  std::string scenario;
  int replicates = 0;
  std::vector<std::string> group_ids;
  Eigen::MatrixXd shared_loadings;                 // T x L
  std::vector<Eigen::MatrixXd> specific_loadings;  // T x K_s
  std::vector<Eigen::MatrixXd> f;                  // n_s x T
  FactorConfiguration config;
};
TruthTables read_truth(const fs::path& dir);

// ---- postprocess / metrics tables ---------------------------------------------

std::vector<std::string> write_summary(const fs::path& dir, const PosteriorDraws& posterior,
                                       const PosteriorSummary& summary, int histogram_limit);

struct EstimateTables {
  FactorConfiguration config;
  Eigen::MatrixXd shared_loadings;
  std::vector<Eigen::MatrixXd> specific_loadings;
  std::vector<Eigen::MatrixXd> curve_mean;
};
EstimateTables read_estimates(const fs::path& dir, const std::vector<std::string>& group_ids, int num_points);

// Geweke rows for sigma2_eps_s, sigma2_beta_s and three beta components per
// group chosen from `seed`. Windows too short for the test produce "nan".
std::string geweke_table(const PosteriorDraws& posterior, std::uint64_t seed);

// (rows x cols) matrix as "row,col,value"
std::string matrix_table(const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_table(const fs::path& path);

// Reads a whole CSV into rows of fields. Quoted fields are supported.
std::vector<std::vector<std::string>> read_csv(const fs::path& path);

}  // namespace mgf::io
