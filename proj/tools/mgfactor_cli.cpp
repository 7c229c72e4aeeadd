// mgfactor: simulate | fit | postprocess | metrics
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "mgfactor/mgfactor.h"

namespace {

void log_line(const char* message, void*) { std::fprintf(stderr, "%s\n", message); }

struct Args {
  std::string config, out, data, grid, draws, truth, results;
  uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;
};

void common_flags(CLI::App* cmd, Args& a, CLI::Option*& seed_opt) {
  cmd->add_option("--config", a.config, "JSON configuration file")->check(CLI::ExistingFile);
  seed_opt = cmd->add_option("--seed", a.seed, "seed, overrides the config");
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--threads", a.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("-q,--quiet", a.quiet, "no progress messages");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian multi-group functional factor analysis"};
  app.set_version_flag("--version", std::string(mgf_version()));
  app.require_subcommand(1);

  Args a;
  CLI::Option* seed_opts[4] = {};
  auto* sim = app.add_subcommand("simulate", "generate scenario datasets and truth files");
  common_flags(sim, a, seed_opts[0]);

  auto* fit = app.add_subcommand("fit", "run the Gibbs sampler and store draws");
  common_flags(fit, a, seed_opts[1]);
  fit->add_option("--data", a.data, "dataset CSV, or a directory of dataset_r<k>.csv")->required();
  fit->add_option("--grid", a.grid, "grid CSV (default: grid.csv beside the data)");

  auto* post = app.add_subcommand("postprocess", "summarize stored draws");
  common_flags(post, a, seed_opts[2]);
  post->add_option("--draws", a.draws, "draw directory")->required();

  auto* met = app.add_subcommand("metrics", "compare postprocess output with the truth");
  common_flags(met, a, seed_opts[3]);
  met->add_option("--truth", a.truth, "simulate output directory")->required();
  met->add_option("--results", a.results, "directory holding r<k>/ postprocess output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  mgf_options o;
  mgf_options_init(&o);
  o.config = a.config.empty() ? nullptr : a.config.c_str();
  o.out = a.out.c_str();
  o.threads = a.threads;
  o.data = a.data.c_str();
  o.grid = a.grid.c_str();
  o.draws = a.draws.c_str();
  o.truth = a.truth.c_str();
  o.results = a.results.c_str();
  if (!a.quiet) o.log = log_line;
  for (auto* opt : seed_opts) {
    if (opt && opt->count() > 0) {
      o.has_seed = 1;
      o.seed = a.seed;
    }
  }

  mgf_status status = MGF_OK;
  if (sim->parsed()) {
    status = mgf_simulate(&o);
  } else if (fit->parsed()) {
    status = mgf_fit(&o);
  } else if (post->parsed()) {
    status = mgf_postprocess(&o);
  } else {
    status = mgf_metrics(&o);
  }
  if (status != MGF_OK) {
    std::fprintf(stderr, "error: %s\n", mgf_last_error());
  }
  return mgf_exit_code(status);
}
