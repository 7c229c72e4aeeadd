/* C interface of the multi-group functional factor library. */
#ifndef MGFACTOR_MGFACTOR_H
#define MGFACTOR_MGFACTOR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MGF_API __declspec(dllexport)
#else
#define MGF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mgf_status {
  MGF_OK = 0,
  MGF_ERR_RUNTIME = 1,    /* numerical failure, chain abort, anything unexpected */
  MGF_ERR_VALIDATION = 2, /* bad config, bad input file contents */
  MGF_ERR_IO = 3,
  MGF_ERR_ARGUMENT = 4,   /* null handle or pointer */
  MGF_ERR_DIMENSION = 5
} mgf_status;

/* Message of the last failure on this thread ("" when none). */
MGF_API const char* mgf_last_error(void);
MGF_API const char* mgf_version(void);

/* Process exit code for a status: 0, 2 for validation errors, 1 otherwise. */
MGF_API int mgf_exit_code(mgf_status status);

typedef void (*mgf_log_fn)(const char* message, void* user);

typedef struct mgf_options {
  const char* config;  /* may be NULL */
  int has_seed;
  uint64_t seed;
  const char* out;
  int threads;
  const char* data;
  const char* grid;
  const char* draws;
  const char* truth;
  const char* results;
  mgf_log_fn log; /* may be NULL */
  void* log_user;
} mgf_options;

MGF_API void mgf_options_init(mgf_options* options);

MGF_API mgf_status mgf_simulate(const mgf_options* options);
MGF_API mgf_status mgf_fit(const mgf_options* options);
MGF_API mgf_status mgf_postprocess(const mgf_options* options);
MGF_API mgf_status mgf_metrics(const mgf_options* options);

/* ---- in-memory handles ---- */

typedef struct mgf_dataset mgf_dataset;
typedef struct mgf_posterior mgf_posterior;

MGF_API mgf_status mgf_dataset_read(const char* data_csv, const char* grid_csv, mgf_dataset** out);
MGF_API void mgf_dataset_free(mgf_dataset* dataset);
MGF_API mgf_status mgf_dataset_shape(const mgf_dataset* dataset, int* num_groups, int* num_points);
MGF_API mgf_status mgf_dataset_group_size(const mgf_dataset* dataset, int group, int* num_subjects);

/* config_json may be NULL (defaults) or a JSON document with a "sampler" section. */
MGF_API mgf_status mgf_fit_dataset(const mgf_dataset* dataset, const char* config_json, mgf_posterior** out);
MGF_API mgf_status mgf_posterior_read(const char* draws_dir, mgf_posterior** out);
MGF_API mgf_status mgf_posterior_write(const mgf_posterior* posterior, const char* draws_dir);
MGF_API void mgf_posterior_free(mgf_posterior* posterior);
MGF_API mgf_status mgf_posterior_size(const mgf_posterior* posterior, int* num_draws);
/* Modal configuration: shared count, then `capacity` group-specific counts. */
MGF_API mgf_status mgf_posterior_modal(const mgf_posterior* posterior, int* shared, int* specific, int capacity);

#ifdef __cplusplus
}
#endif

#endif
