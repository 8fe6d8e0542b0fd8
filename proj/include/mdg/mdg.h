// SPDX-License-Identifier: Apache-2.0
//
// mdgsim: mode-dependent loss/gain estimation for coupled SDM links
// Copyright (C) 2026 The mdgsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

/* C interface of the mdgsim library. All functions are reentrant; the
 * message of the last failed call is kept per thread. Strings handed out
 * through char ** parameters are owned by the caller and released with
 * mdg_string_free. */
#ifndef MDG_MDG_H
#define MDG_MDG_H

#include <stddef.h>
#include <stdint.h>

#if defined(MDG_BUILDING_LIBRARY)
#define MDG_API __attribute__((visibility("default")))
#else
#define MDG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mdg_status
{
    MDG_OK = 0,
    MDG_ERR_INVALID_ARGUMENT = 1,
    MDG_ERR_NUMERIC = 2,
    MDG_ERR_CONVERGENCE = 3,
    MDG_ERR_IO = 4,
    MDG_ERR_PARSE = 5,
    MDG_ERR_INTERNAL = 6
} mdg_status;

typedef struct mdg_experiment mdg_experiment;
typedef struct mdg_result mdg_result;
typedef struct mdg_taps mdg_taps;
typedef struct mdg_channel mdg_channel;

typedef void (*mdg_progress_fn)(size_t done, size_t total, void *user);

MDG_API const char *mdg_version(void);
MDG_API const char *mdg_status_name(mdg_status status);
/* Message of the most recent failure on the calling thread ("" if none). */
MDG_API const char *mdg_last_error(void);
MDG_API void mdg_string_free(char *s);

/* --- experiments ----------------------------------------------------------- */

/* kind may be NULL; otherwise one of "scatter", "surface", "sweep", "voa",
 * which the document's kind must match (or supplies when absent). */
MDG_API mdg_status mdg_experiment_from_json(const char *json, const char *kind, mdg_experiment **out);
MDG_API mdg_status mdg_experiment_load(const char *path, const char *kind, mdg_experiment **out);
/* preset: "desk" or "full" */
MDG_API mdg_status mdg_experiment_preset(const char *preset, const char *kind, mdg_experiment **out);
MDG_API void mdg_experiment_free(mdg_experiment *exp);
MDG_API const char *mdg_experiment_kind(const mdg_experiment *exp);
MDG_API mdg_status mdg_experiment_set_seed(mdg_experiment *exp, uint64_t seed);
MDG_API mdg_status mdg_experiment_set_parallelism(mdg_experiment *exp, int parallelism);
MDG_API mdg_status mdg_experiment_to_json(const mdg_experiment *exp, char **out);
/* progress may be NULL. */
MDG_API mdg_status mdg_experiment_run(const mdg_experiment *exp, mdg_progress_fn progress, void *user,
                                      mdg_result **out);

MDG_API void mdg_result_free(mdg_result *result);
MDG_API size_t mdg_result_trial_rows(const mdg_result *result);
MDG_API size_t mdg_result_aggregate_rows(const mdg_result *result);
MDG_API size_t mdg_result_skipped_trials(const mdg_result *result);
MDG_API mdg_status mdg_result_csv(const mdg_result *result, char **out);
MDG_API mdg_status mdg_result_json(const mdg_result *result, char **out);
/* results.csv, results.json, manifest.json (+ scatter_points.csv). */
MDG_API mdg_status mdg_result_write(const mdg_result *result, const mdg_experiment *exp, const char *directory);

/* --- equalizer tap dumps --------------------------------------------------- */

MDG_API mdg_status mdg_taps_load(const char *path, mdg_taps **out);
MDG_API void mdg_taps_free(mdg_taps *taps);
MDG_API mdg_status mdg_taps_dims(const mdg_taps *taps, int *n_outputs, int *n_inputs, int *taps_per_filter);
/* has_snr = 0 estimates without a known SNR (corrected must be 0);
 * snr_db may be INFINITY. Writes the MdgReport as JSON. */
MDG_API mdg_status mdg_taps_estimate(const mdg_taps *taps, int has_snr, double snr_db, int corrected, int n_points,
                                     char **report_json);

/* --- channels -------------------------------------------------------------- */

typedef struct mdg_link_config
{
    int spatial_modes;
    int spans;
    double span_length_km;
    double gd_coeff_ps_per_sqrt_km;
    double sigma_g_db;
    int n_bins;
    double bandwidth_ghz;
    uint64_t seed;
} mdg_link_config;

MDG_API void mdg_link_config_default(mdg_link_config *cfg);
/* Multisection realization, normalized to 0 dB mean log gain. */
MDG_API mdg_status mdg_channel_build(const mdg_link_config *cfg, mdg_channel **out);
MDG_API mdg_status mdg_channel_load(const char *path, mdg_channel **out);
MDG_API mdg_status mdg_channel_save(const mdg_channel *ch, const char *path);
MDG_API void mdg_channel_free(mdg_channel *ch);
MDG_API mdg_status mdg_channel_dims(const mdg_channel *ch, int *dim, int *n_bins, double *bandwidth_ghz);
/* sigma_mdg and mean peak-to-peak of H H^H over all bins, dB. */
MDG_API mdg_status mdg_channel_metrics(const mdg_channel *ch, double *sigma_mdg_db, double *peak_to_peak_db);
/* Analytic MMSE estimate at snr_db (INFINITY allowed when corrected = 0). */
MDG_API mdg_status mdg_channel_estimate(const mdg_channel *ch, double snr_db, int corrected, char **report_json);

/* --- scalar relations ---------------------------------------------------- */

MDG_API mdg_status mdg_observed_eigenvalue(double lambda2, double snr_db, double *out);
MDG_API mdg_status mdg_correct_eigenvalue(double lambda2_mmse, double snr_db, double *out);
MDG_API mdg_status mdg_osnr_to_snr(double osnr_db, double symbol_time_ps, double *snr_db);
MDG_API double mdg_estimation_error(double sigma_ref_db, double sigma_nl_db);

#ifdef __cplusplus
}
#endif

#endif
