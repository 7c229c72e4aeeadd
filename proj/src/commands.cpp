#include "mgfactor/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include "mgfactor/errors.hpp"
#include "mgfactor/io.hpp"
#include "mgfactor/metrics.hpp"

namespace mgf {

namespace fs = std::filesystem;
using io::json;

namespace {

void say(const CommandOptions& o, const std::string& msg) {
  if (o.log) o.log(msg);
}

io::RunConfig load_config(const CommandOptions& o) {
  if (o.config.empty()) return io::RunConfig{};
  if (!fs::exists(o.config)) throw ValidationError("config file not found: " + o.config);
  return io::read_config(o.config);
}

fs::path require_out(const CommandOptions& o) {
  if (o.out.empty()) throw ValidationError("--out is required");
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec || !fs::is_directory(o.out)) throw IoError("cannot create output directory " + o.out);
  return fs::path(o.out);
}

// Numbered entries "<prefix><k><suffix>" in a directory, sorted by k.
std::vector<std::pair<int, fs::path>> numbered(const fs::path& dir, const std::string& prefix,
                                               const std::string& suffix, bool directories) {
  std::vector<std::pair<int, fs::path>> out;
  const std::regex pattern(prefix + "([0-9]+)" + std::regex_replace(suffix, std::regex(R"(\.)"), R"(\.)"));
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() != directories) continue;
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) out.emplace_back(std::stoi(m[1]), entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> prefixed(const std::string& dir, const std::vector<std::string>& files) {
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back((fs::path(dir) / f).string());
  return out;
}

void fit_one(const fs::path& data_path, const fs::path& grid_path, const fs::path& out, const SamplerConfig& config,
             const std::string& digest, const CommandOptions& o, std::mutex& log_mutex) {
  io::RunManifest manifest;
  manifest.command = "fit";
  manifest.started = io::utc_timestamp();
  manifest.seed = config.seed;
  manifest.config_digest = digest;
  manifest.inputs = {data_path.string(), grid_path.string()};

  const FunctionalDataset data = io::read_dataset(data_path, grid_path);
  const int R = config.resolved_num_basis(data.num_points());
  if (R < 4 || R > data.num_points()) {
    throw ValidationError("num_basis " + std::to_string(R) + " must lie in [4, T] for T = " +
                          std::to_string(data.num_points()));
  }
  std::vector<std::vector<int>> log_rows;
  const int report = std::max(1, config.iterations / 10);
  const auto posterior = run_chain(data, config, [&](int it, const ModelState& state) {
    const auto c = configuration_of(state);
    std::vector<int> row{it, c.shared};
    row.insert(row.end(), c.specific.begin(), c.specific.end());
    log_rows.push_back(std::move(row));
    if (it % report == 0 && o.log) {
      std::lock_guard<std::mutex> lock(log_mutex);
      o.log(out.string() + ": iteration " + std::to_string(it) + "/" + std::to_string(config.iterations) + " " +
            c.label());
    }
  });

  fs::create_directories(out);
  auto files = io::write_posterior(out, posterior);
  {
    std::string s = "iteration,shared";
    for (int g = 0; g < data.num_groups(); ++g) s += ",specific_" + std::to_string(g + 1);
    s += ",retained\n";
    for (const auto& row : log_rows) {
      for (std::size_t k = 0; k < row.size(); ++k) s += (k ? "," : "") + std::to_string(row[k]);
      const bool kept = row[0] > config.burn_in && (row[0] - config.burn_in) % config.thin == 0;
      s += kept ? ",1\n" : ",0\n";
    }
    io::write_text_atomic(out / "configurations.csv", s);
    files.push_back("configurations.csv");
  }
  io::write_text_atomic(out / "geweke.csv", io::geweke_table(posterior, config.seed));
  files.push_back("geweke.csv");
  manifest.outputs = prefixed(out.string(), files);
  manifest.finished = io::utc_timestamp();
  io::write_manifest(out, manifest);
}

}  // namespace

void run_simulate(const CommandOptions& o) {
  io::RunConfig rc = load_config(o);
  ScenarioConfig sc = rc.scenario;
  if (o.seed) sc.seed = *o.seed;
  sc.validate();
  const fs::path out = require_out(o);
  io::RunManifest manifest;
  manifest.command = "simulate";
  manifest.started = io::utc_timestamp();
  manifest.seed = sc.seed;
  manifest.config_digest = io::fnv1a_hex(io::scenario_to_json(sc).dump());
  if (!o.config.empty()) manifest.inputs.push_back(o.config);

  say(o, "simulating scenario " + sc.name + " with " + std::to_string(sc.replicates) + " replicate(s)");
  const ScenarioTruth truth = generate_truth(sc);
  std::vector<std::string> files = io::write_truth(out, truth);
  io::write_grid(out / "grid.csv", truth.grid);
  files.push_back("grid.csv");
  for (int k = 1; k <= sc.replicates; ++k) {
    const std::string name = "dataset_r" + std::to_string(k) + ".csv";
    io::write_dataset(out / name, generate_replicate(truth, k));
    files.push_back(name);
  }
  manifest.outputs = prefixed(o.out, files);
  manifest.finished = io::utc_timestamp();
  io::write_manifest(out, manifest);
}

void run_fit(const CommandOptions& o) {
  io::RunConfig rc = load_config(o);
  SamplerConfig config = rc.sampler;
  if (o.seed) config.seed = *o.seed;
  config.validate();
  if (o.threads < 1) throw ValidationError("--threads must be >= 1");
  if (o.data.empty()) throw ValidationError("--data is required");
  const fs::path data(o.data);
  if (!fs::exists(data)) throw ValidationError("data path not found: " + o.data);
  const fs::path out = require_out(o);

  std::vector<std::pair<int, fs::path>> jobs;
  const bool many = fs::is_directory(data);
  if (many) {
    jobs = numbered(data, "dataset_r", ".csv", false);
    if (jobs.empty()) throw ValidationError("no dataset_r<k>.csv files in " + o.data);
  } else {
    jobs.emplace_back(1, data);
  }
  const fs::path grid = !o.grid.empty() ? fs::path(o.grid) : (many ? data : data.parent_path()) / "grid.csv";
  if (!fs::exists(grid)) throw ValidationError("grid file not found: " + grid.string());
  const std::string digest = io::fnv1a_hex(io::sampler_to_json(config).dump());

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  auto worker = [&]() {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      SamplerConfig c = config;
      c.seed = config.seed + static_cast<std::uint64_t>(jobs[j].first - 1);
      const fs::path dir = many ? out / ("r" + std::to_string(jobs[j].first)) : out;
      try {
        fit_one(jobs[j].second, grid, dir, c, digest, o, log_mutex);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const int workers = std::min<int>(o.threads, static_cast<int>(jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!errors[j]) continue;
    try {
      std::rethrow_exception(errors[j]);
    } catch (const ChainError& e) {
      throw Error(jobs[j].second.filename().string() + ": " + e.what());
    }
  }
}

void run_postprocess(const CommandOptions& o) {
  io::RunConfig rc = load_config(o);
  if (o.draws.empty()) throw ValidationError("--draws is required");
  const fs::path draws(o.draws);
  if (!fs::is_directory(draws)) throw ValidationError("draw directory not found: " + o.draws);
  const fs::path out = require_out(o);

  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::exists(draws / "model.json")) {
    jobs.emplace_back(draws, out);
  } else {
    for (const auto& [k, dir] : numbered(draws, "r", "", true)) jobs.emplace_back(dir, out / ("r" + std::to_string(k)));
    if (jobs.empty()) throw ValidationError("no draws (model.json or r<k>/) under " + o.draws);
  }
  for (const auto& [in, dst] : jobs) {
    io::RunManifest manifest;
    manifest.command = "postprocess";
    manifest.started = io::utc_timestamp();
    manifest.config_digest = io::fnv1a_hex(json{{"histogram_limit", rc.histogram_limit}}.dump());
    manifest.inputs = {in.string()};
    const PosteriorDraws posterior = io::read_posterior(in);
    if (posterior.size() == 0) throw ValidationError(in.string() + ": no retained draws");
    say(o, in.string() + ": summarizing " + std::to_string(posterior.size()) + " draws");
    const PosteriorSummary summary = summarize_posterior(posterior);
    for (const auto& w : summary.loadings.warnings) say(o, in.string() + ": " + w);
    fs::create_directories(dst);
    manifest.outputs = prefixed(dst.string(), io::write_summary(dst, posterior, summary, rc.histogram_limit));
    manifest.finished = io::utc_timestamp();
    io::write_manifest(dst, manifest);
  }
}

void run_metrics(const CommandOptions& o) {
  if (o.truth.empty()) throw ValidationError("--truth is required");
  if (o.results.empty()) throw ValidationError("--results is required");
  const io::TruthTables truth = io::read_truth(o.truth);
  const fs::path results(o.results);
  const fs::path out = require_out(o);
  const int S = static_cast<int>(truth.group_ids.size());
  const int T = static_cast<int>(truth.f.front().cols());

  std::vector<std::string> missing;
  for (int k = 1; k <= truth.replicates; ++k) {
    if (!fs::exists(results / ("r" + std::to_string(k)) / "summary.json")) missing.push_back("r" + std::to_string(k));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ValidationError("results missing for " + truth.scenario + " replicates: " + list);
  }

  std::string rv = "scenario,replicate,group,method,rv,correct_configuration\n";
  std::string mse = "scenario,replicate,group,method,mse\n";
  std::string counts = "scenario,replicate,method,shared";
  for (int g = 0; g < S; ++g) counts += ",specific_" + truth.group_ids[g];
  counts += "\n";
  auto rv_text = [](const Eigen::MatrixXd& est, const Eigen::MatrixXd& tru) {
    if (est.cols() == 0 || tru.cols() == 0) return std::string("nan");
    try {
      return io::format_double(rv_coefficient(est, tru));
    } catch (const Error&) {
      return std::string("nan");
    }
  };
  for (int k = 1; k <= truth.replicates; ++k) {
    const auto est = io::read_estimates(results / ("r" + std::to_string(k)), truth.group_ids, T);
    const std::string key = truth.scenario + "," + std::to_string(k) + ",";
    const std::string correct = est.config == truth.config ? "1" : "0";
    rv += key + "shared,self," + rv_text(est.shared_loadings, truth.shared_loadings) + "," + correct + "\n";
    counts += key + "self," + std::to_string(est.config.shared);
    for (int g = 0; g < S; ++g) {
      rv += key + truth.group_ids[g] + ",self," + rv_text(est.specific_loadings[g], truth.specific_loadings[g]) + "," +
            correct + "\n";
      if (est.curve_mean[g].rows() != truth.f[g].rows()) {
        throw ValidationError("replicate " + std::to_string(k) + " group " + truth.group_ids[g] +
                              ": curve count differs from the truth");
      }
      mse += key + truth.group_ids[g] + ",self," + io::format_double(total_mse(truth.f[g], est.curve_mean[g])) + "\n";
      counts += "," + std::to_string(est.config.specific[g]);
    }
    counts += "\n";
  }
  io::write_text_atomic(out / "rv.csv", rv);
  io::write_text_atomic(out / "mse.csv", mse);
  io::write_text_atomic(out / "counts.csv", counts);

  io::RunManifest manifest;
  manifest.command = "metrics";
  manifest.started = io::utc_timestamp();
  manifest.inputs = {o.truth, o.results};
  manifest.config_digest = io::fnv1a_hex(truth.scenario);
  manifest.outputs = prefixed(o.out, {"rv.csv", "mse.csv", "counts.csv"});
  manifest.finished = io::utc_timestamp();
  io::write_manifest(out, manifest);
}

}  // namespace mgf
