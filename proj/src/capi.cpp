#include "mgfactor/mgfactor.h"

#include <exception>
#include <new>
#include <string>

#include "mgfactor/commands.hpp"
#include "mgfactor/errors.hpp"
#include "mgfactor/io.hpp"
#include "mgfactor/postprocess.hpp"

struct mgf_dataset {
  mgf::FunctionalDataset data;
};

struct mgf_posterior {
  mgf::PosteriorDraws draws;
};

namespace {

thread_local std::string g_last_error;

mgf_status fail(mgf_status s, const char* what) {
  g_last_error = what;
  return s;
}

template <class Fn>
mgf_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MGF_OK;
  } catch (const mgf::ValidationError& e) {
    return fail(MGF_ERR_VALIDATION, e.what());
  } catch (const mgf::IoError& e) {
    return fail(MGF_ERR_IO, e.what());
  } catch (const mgf::InvalidDimension& e) {
    return fail(MGF_ERR_DIMENSION, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MGF_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(MGF_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(MGF_ERR_RUNTIME, "unknown error");
  }
}

std::string str(const char* s) { return s ? std::string(s) : std::string(); }

mgf::CommandOptions convert(const mgf_options* o) {
  mgf::CommandOptions c;
  c.config = str(o->config);
  if (o->has_seed) c.seed = o->seed;
  c.out = str(o->out);
  c.threads = o->threads;
  c.data = str(o->data);
  c.grid = str(o->grid);
  c.draws = str(o->draws);
  c.truth = str(o->truth);
  c.results = str(o->results);
  if (o->log) {
    const auto fn = o->log;
    void* user = o->log_user;
    c.log = [fn, user](const std::string& m) { fn(m.c_str(), user); };
  }
  return c;
}

template <class Cmd>
mgf_status run_command(const mgf_options* o, Cmd cmd) {
  if (!o) return fail(MGF_ERR_ARGUMENT, "options pointer is null");
  return guarded([&] { cmd(convert(o)); });
}

}  // namespace

extern "C" {

const char* mgf_last_error(void) { return g_last_error.c_str(); }

const char* mgf_version(void) { return mgf::io::kVersion; }

int mgf_exit_code(mgf_status status) {
  if (status == MGF_OK) return 0;
  if (status == MGF_ERR_VALIDATION || status == MGF_ERR_ARGUMENT) return 2;
  return 1;
}

void mgf_options_init(mgf_options* options) {
  if (!options) return;
  *options = mgf_options{};
  options->threads = 1;
}

mgf_status mgf_simulate(const mgf_options* options) { return run_command(options, mgf::run_simulate); }
mgf_status mgf_fit(const mgf_options* options) { return run_command(options, mgf::run_fit); }
mgf_status mgf_postprocess(const mgf_options* options) { return run_command(options, mgf::run_postprocess); }
mgf_status mgf_metrics(const mgf_options* options) { return run_command(options, mgf::run_metrics); }

mgf_status mgf_dataset_read(const char* data_csv, const char* grid_csv, mgf_dataset** out) {
  if (!data_csv || !grid_csv || !out) return fail(MGF_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new mgf_dataset{mgf::io::read_dataset(data_csv, grid_csv)}; });
}

void mgf_dataset_free(mgf_dataset* dataset) { delete dataset; }

mgf_status mgf_dataset_shape(const mgf_dataset* dataset, int* num_groups, int* num_points) {
  if (!dataset || !num_groups || !num_points) return fail(MGF_ERR_ARGUMENT, "null argument");
  *num_groups = dataset->data.num_groups();
  *num_points = dataset->data.num_points();
  return MGF_OK;
}

mgf_status mgf_dataset_group_size(const mgf_dataset* dataset, int group, int* num_subjects) {
  if (!dataset || !num_subjects) return fail(MGF_ERR_ARGUMENT, "null argument");
  if (group < 0 || group >= dataset->data.num_groups()) return fail(MGF_ERR_DIMENSION, "group index out of range");
  *num_subjects = dataset->data.groups[group].num_subjects();
  return MGF_OK;
}

mgf_status mgf_fit_dataset(const mgf_dataset* dataset, const char* config_json, mgf_posterior** out) {
  if (!dataset || !out) return fail(MGF_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    mgf::SamplerConfig config;
    if (config_json) {
      mgf::io::json doc;
      try {
        doc = mgf::io::json::parse(config_json);
      } catch (const mgf::io::json::exception& e) {
        throw mgf::ValidationError(std::string("invalid JSON: ") + e.what());
      }
      config = mgf::io::parse_config(doc).sampler;
    }
    *out = new mgf_posterior{mgf::run_chain(dataset->data, config)};
  });
}

mgf_status mgf_posterior_read(const char* draws_dir, mgf_posterior** out) {
  if (!draws_dir || !out) return fail(MGF_ERR_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new mgf_posterior{mgf::io::read_posterior(draws_dir)}; });
}

mgf_status mgf_posterior_write(const mgf_posterior* posterior, const char* draws_dir) {
  if (!posterior || !draws_dir) return fail(MGF_ERR_ARGUMENT, "null argument");
  return guarded([&] { mgf::io::write_posterior(draws_dir, posterior->draws); });
}

void mgf_posterior_free(mgf_posterior* posterior) { delete posterior; }

mgf_status mgf_posterior_size(const mgf_posterior* posterior, int* num_draws) {
  if (!posterior || !num_draws) return fail(MGF_ERR_ARGUMENT, "null argument");
  *num_draws = posterior->draws.size();
  return MGF_OK;
}

mgf_status mgf_posterior_modal(const mgf_posterior* posterior, int* shared, int* specific, int capacity) {
  if (!posterior || !shared || (capacity > 0 && !specific)) return fail(MGF_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    const auto modal = mgf::modal_configuration(posterior->draws);
    if (capacity < static_cast<int>(modal.config.specific.size())) {
      throw mgf::InvalidDimension("capacity is smaller than the number of groups");
    }
    *shared = modal.config.shared;
    for (std::size_t s = 0; s < modal.config.specific.size(); ++s) specific[s] = modal.config.specific[s];
  });
}

}  // extern "C"
