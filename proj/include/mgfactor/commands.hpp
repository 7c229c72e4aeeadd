#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace mgf {

// Inputs of the four pipeline commands. Paths left empty take defaults
// described next to each command.
struct CommandOptions {
  std::string config;                 // JSON config; empty uses built-in defaults
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::string out;
  int threads = 1;
  std::string data;     // fit: dataset CSV, or a directory of dataset_r<k>.csv
  std::string grid;     // fit: grid CSV, default grid.csv beside the data
  std::string draws;    // postprocess: a draw directory, or one holding r<k>/ subdirectories
  std::string truth;    // metrics
  std::string results;  // metrics: directory holding r<k>/ postprocess outputs
  std::function<void(const std::string&)> log;
};

// Writes grid.csv, dataset_r<k>.csv for each replicate, truth files and a manifest.
void run_simulate(const CommandOptions& options);
// Runs the sampler and writes draw files, configurations.csv, geweke.csv and
// a manifest. Directory input fits every replicate into out/r<k>/, replicate
// k using seed + k - 1, with up to `threads` chains at once.
void run_fit(const CommandOptions& options);
// Writes the posterior summary tables next to a manifest.
void run_postprocess(const CommandOptions& options);
// Writes rv.csv, mse.csv and counts.csv comparing results/r<k>/ to the truth.
void run_metrics(const CommandOptions& options);

}  // namespace mgf
