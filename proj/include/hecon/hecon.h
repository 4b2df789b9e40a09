/*
 * hecon: longitudinal cost-effectiveness analysis with missing data.
 *
 * C interface over the analysis core. Every function returns a status code;
 * on failure hecon_last_error() describes the problem for the calling thread.
 * Strings handed out by the library are released with hecon_string_free().
 */
#ifndef HECON_HECON_H
#define HECON_HECON_H

#include <stddef.h>

#if defined(HECON_BUILDING_LIBRARY)
#define HECON_API __attribute__((visibility("default")))
#else
#define HECON_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hecon_status {
  HECON_OK = 0,
  HECON_E_INVALID_ARGUMENT = 1,
  HECON_E_PARSE = 2,
  HECON_E_SCHEMA = 3,
  HECON_E_VALIDATION = 4,
  HECON_E_IO = 5,
  HECON_E_NUMERIC = 6,
  HECON_E_CONFIG = 7,
  HECON_E_DEPENDENCY = 8,
  HECON_E_CONVERGENCE = 9,
  HECON_E_UNIT = 10,
  HECON_E_SHAPE = 11,
  HECON_E_INTERNAL = 12
} hecon_status;

HECON_API const char* hecon_version(void);
/* Message for the last failing call on this thread; "" when none. */
HECON_API const char* hecon_last_error(void);
HECON_API const char* hecon_status_name(hecon_status status);
HECON_API void hecon_string_free(char* s);

typedef struct hecon_dataset hecon_dataset;

/* J is the number of follow-ups; columns default to id, arm, u0..uJ, c0..cJ. */
HECON_API hecon_status hecon_dataset_load_csv(const char* path, int J, hecon_dataset** out);
HECON_API hecon_status hecon_dataset_from_csv_text(const char* text, int J, hecon_dataset** out);
HECON_API void hecon_dataset_free(hecon_dataset* data);
HECON_API hecon_status hecon_dataset_num_subjects(const hecon_dataset* data, size_t* out);
HECON_API hecon_status hecon_dataset_patterns_json(const hecon_dataset* data, char** out_json);
HECON_API hecon_status hecon_dataset_to_json(const hecon_dataset* data, char** out_json);

/*
 * Runs one pipeline command ("simulate", "fit", "evaluate", "assess").
 * config_path may be NULL (then overrides_json must hold the whole configuration);
 * overrides_json may be NULL. On success *report_json (may be NULL) receives a JSON
 * report. HECON_E_CONVERGENCE is returned after all outputs are written when some
 * R-hat exceeds 1.1; the report is still filled in.
 */
HECON_API hecon_status hecon_run_command(const char* command, const char* config_path, const char* overrides_json,
                                         char** report_json);

/* Trapezoid QALYs from n utilities and n-1 time-unit fractions. */
HECON_API hecon_status hecon_qaly(const double* u, size_t n, const double* fractions, double* out);
/* mean(delta_c) / mean(delta_e). */
HECON_API hecon_status hecon_icer(const double* delta_e, const double* delta_c, size_t n, double* out);
/* probability_out has n_k entries. */
HECON_API hecon_status hecon_ceac(const double* delta_e, const double* delta_c, size_t n, const double* k, size_t n_k,
                                  double* probability_out);
/* chains is n_chains consecutive blocks of n_draws values. */
HECON_API hecon_status hecon_rhat(const double* chains, size_t n_chains, size_t n_draws, double* out);
HECON_API hecon_status hecon_ess(const double* chains, size_t n_chains, size_t n_draws, double* out);

#ifdef __cplusplus
}
#endif

#endif
