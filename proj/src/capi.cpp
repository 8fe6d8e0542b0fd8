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

#include "mdg/mdg.h"

#include "mdg/channel.hpp"
#include "mdg/config.hpp"
#include "mdg/error.hpp"
#include "mdg/experiments.hpp"
#include "mdg/metrics.hpp"
#include "mdg/signal.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct mdg_experiment
{
    mdg::ExperimentConfig config;
};

struct mdg_result
{
    mdg::ResultTable table;
};

struct mdg_taps
{
    mdg::EqualizerState state;
};

struct mdg_channel
{
    mdg::ChannelRealization channel;
};

namespace
{

thread_local std::string last_error;

mdg_status status_of(mdg::ErrorCode code)
{
    switch (code)
    {
    case mdg::ErrorCode::invalid_argument:
        return MDG_ERR_INVALID_ARGUMENT;
    case mdg::ErrorCode::numeric_error:
        return MDG_ERR_NUMERIC;
    case mdg::ErrorCode::convergence_failure:
        return MDG_ERR_CONVERGENCE;
    case mdg::ErrorCode::io_error:
        return MDG_ERR_IO;
    case mdg::ErrorCode::parse_error:
        return MDG_ERR_PARSE;
    }
    return MDG_ERR_INTERNAL;
}

template <typename F>
mdg_status guarded(F &&f)
{
    try
    {
        f();
        last_error.clear();
        return MDG_OK;
    }
    catch (const mdg::Error &e)
    {
        last_error = e.what();
        return status_of(e.code());
    }
    catch (const std::bad_alloc &)
    {
        last_error = "out of memory";
        return MDG_ERR_INTERNAL;
    }
    catch (const std::exception &e)
    {
        last_error = e.what();
        return MDG_ERR_INTERNAL;
    }
    catch (...)
    {
        last_error = "unknown error";
        return MDG_ERR_INTERNAL;
    }
}

void require_ptr(const void *p, const char *name)
{
    mdg::require(p != nullptr, std::string(name) + " must not be NULL");
}

char *copy_string(const std::string &s)
{
    auto *out = static_cast<char *>(std::malloc(s.size() + 1));
    if (!out)
        throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::optional<mdg::ExperimentKind> optional_kind(const char *kind)
{
    if (!kind)
        return std::nullopt;
    return mdg::parse_experiment_kind(kind);
}

} // namespace

extern "C" {

const char *mdg_version(void)
{
    return MDG_VERSION;
}

const char *mdg_status_name(mdg_status status)
{
    switch (status)
    {
    case MDG_OK:
        return "ok";
    case MDG_ERR_INVALID_ARGUMENT:
        return "invalid_argument";
    case MDG_ERR_NUMERIC:
        return "numeric_error";
    case MDG_ERR_CONVERGENCE:
        return "convergence_failure";
    case MDG_ERR_IO:
        return "io_error";
    case MDG_ERR_PARSE:
        return "parse_error";
    case MDG_ERR_INTERNAL:
        return "internal_error";
    }
    return "unknown";
}

const char *mdg_last_error(void)
{
    return last_error.c_str();
}

void mdg_string_free(char *s)
{
    std::free(s);
}

// --- experiments ---------------------------------------------------------------

mdg_status mdg_experiment_from_json(const char *json, const char *kind, mdg_experiment **out)
{
    return guarded([&] {
        require_ptr(json, "json");
        require_ptr(out, "out");
        *out = new mdg_experiment{mdg::config_from_json(json, optional_kind(kind))};
    });
}

mdg_status mdg_experiment_load(const char *path, const char *kind, mdg_experiment **out)
{
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        *out = new mdg_experiment{mdg::load_config(path, optional_kind(kind))};
    });
}

mdg_status mdg_experiment_preset(const char *preset, const char *kind, mdg_experiment **out)
{
    return guarded([&] {
        require_ptr(preset, "preset");
        require_ptr(kind, "kind");
        require_ptr(out, "out");
        *out = new mdg_experiment{mdg::ExperimentConfig::preset(preset, mdg::parse_experiment_kind(kind))};
    });
}

void mdg_experiment_free(mdg_experiment *exp)
{
    delete exp;
}

const char *mdg_experiment_kind(const mdg_experiment *exp)
{
    return exp ? mdg::to_string(exp->config.kind) : "";
}

mdg_status mdg_experiment_set_seed(mdg_experiment *exp, uint64_t seed)
{
    return guarded([&] {
        require_ptr(exp, "exp");
        exp->config.seed = seed;
    });
}

mdg_status mdg_experiment_set_parallelism(mdg_experiment *exp, int parallelism)
{
    return guarded([&] {
        require_ptr(exp, "exp");
        mdg::require(parallelism >= 0, "parallelism must be >= 0");
        exp->config.parallelism = parallelism;
    });
}

mdg_status mdg_experiment_to_json(const mdg_experiment *exp, char **out)
{
    return guarded([&] {
        require_ptr(exp, "exp");
        require_ptr(out, "out");
        *out = copy_string(mdg::config_to_json(exp->config));
    });
}

mdg_status mdg_experiment_run(const mdg_experiment *exp, mdg_progress_fn progress, void *user, mdg_result **out)
{
    return guarded([&] {
        require_ptr(exp, "exp");
        require_ptr(out, "out");
        mdg::ProgressCallback cb;
        if (progress)
            cb = [progress, user](std::size_t done, std::size_t total) { progress(done, total, user); };
        *out = new mdg_result{mdg::run_experiment(exp->config, cb)};
    });
}

void mdg_result_free(mdg_result *result)
{
    delete result;
}

size_t mdg_result_trial_rows(const mdg_result *result)
{
    return result ? result->table.records.size() : 0;
}

size_t mdg_result_aggregate_rows(const mdg_result *result)
{
    return result ? result->table.aggregates.size() : 0;
}

size_t mdg_result_skipped_trials(const mdg_result *result)
{
    size_t n = 0;
    if (result)
        for (const auto &a : result->table.aggregates)
            n += static_cast<size_t>(a.n_skipped);
    return n;
}

mdg_status mdg_result_csv(const mdg_result *result, char **out)
{
    return guarded([&] {
        require_ptr(result, "result");
        require_ptr(out, "out");
        *out = copy_string(result->table.to_csv());
    });
}

mdg_status mdg_result_json(const mdg_result *result, char **out)
{
    return guarded([&] {
        require_ptr(result, "result");
        require_ptr(out, "out");
        *out = copy_string(result->table.to_json());
    });
}

mdg_status mdg_result_write(const mdg_result *result, const mdg_experiment *exp, const char *directory)
{
    return guarded([&] {
        require_ptr(result, "result");
        require_ptr(exp, "exp");
        require_ptr(directory, "directory");
        mdg::write_result_files(result->table, exp->config, directory);
    });
}

// --- taps ------------------------------------------------------------------------

mdg_status mdg_taps_load(const char *path, mdg_taps **out)
{
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        *out = new mdg_taps{mdg::load_taps(path)};
    });
}

void mdg_taps_free(mdg_taps *taps)
{
    delete taps;
}

mdg_status mdg_taps_dims(const mdg_taps *taps, int *n_outputs, int *n_inputs, int *taps_per_filter)
{
    return guarded([&] {
        require_ptr(taps, "taps");
        if (n_outputs)
            *n_outputs = taps->state.n_outputs;
        if (n_inputs)
            *n_inputs = taps->state.n_inputs;
        if (taps_per_filter)
            *taps_per_filter = taps->state.taps_per_filter;
    });
}

mdg_status mdg_taps_estimate(const mdg_taps *taps, int has_snr, double snr_db, int corrected, int n_points,
                             char **report_json)
{
    return guarded([&] {
        require_ptr(taps, "taps");
        require_ptr(report_json, "report_json");
        std::optional<mdg::Snr> snr;
        if (has_snr)
            snr = mdg::Snr::from_db(snr_db);
        const auto report = mdg::estimate_from_taps(taps->state, snr, corrected != 0, n_points);
        *report_json = copy_string(report.to_json());
    });
}

// --- channels ----------------------------------------------------------------------

void mdg_link_config_default(mdg_link_config *cfg)
{
    if (!cfg)
        return;
    const mdg::LinkConfig d;
    *cfg = {d.spatial_modes, d.spans, d.span_length_km, d.gd_coeff_ps_per_sqrt_km, d.sigma_g_db, d.n_bins,
            d.bandwidth_ghz, d.seed};
}

mdg_status mdg_channel_build(const mdg_link_config *cfg, mdg_channel **out)
{
    return guarded([&] {
        require_ptr(cfg, "cfg");
        require_ptr(out, "out");
        mdg::LinkConfig link;
        link.spatial_modes = cfg->spatial_modes;
        link.spans = cfg->spans;
        link.span_length_km = cfg->span_length_km;
        link.gd_coeff_ps_per_sqrt_km = cfg->gd_coeff_ps_per_sqrt_km;
        link.sigma_g_db = cfg->sigma_g_db;
        link.n_bins = cfg->n_bins;
        link.bandwidth_ghz = cfg->bandwidth_ghz;
        link.seed = cfg->seed;
        *out = new mdg_channel{mdg::normalize_channel(mdg::build_channel(link))};
    });
}

mdg_status mdg_channel_load(const char *path, mdg_channel **out)
{
    return guarded([&] {
        require_ptr(path, "path");
        require_ptr(out, "out");
        *out = new mdg_channel{mdg::load_channel(path)};
    });
}

mdg_status mdg_channel_save(const mdg_channel *ch, const char *path)
{
    return guarded([&] {
        require_ptr(ch, "ch");
        require_ptr(path, "path");
        mdg::save_channel(path, ch->channel);
    });
}

void mdg_channel_free(mdg_channel *ch)
{
    delete ch;
}

mdg_status mdg_channel_dims(const mdg_channel *ch, int *dim, int *n_bins, double *bandwidth_ghz)
{
    return guarded([&] {
        require_ptr(ch, "ch");
        if (dim)
            *dim = ch->channel.dim();
        if (n_bins)
            *n_bins = static_cast<int>(ch->channel.n_bins());
        if (bandwidth_ghz)
            *bandwidth_ghz = ch->channel.bandwidth_ghz();
    });
}

mdg_status mdg_channel_metrics(const mdg_channel *ch, double *sigma_mdg_db, double *peak_to_peak_db)
{
    return guarded([&] {
        require_ptr(ch, "ch");
        const auto r = mdg::channel_report(ch->channel);
        if (sigma_mdg_db)
            *sigma_mdg_db = r.sigma_mdg_db;
        if (peak_to_peak_db)
            *peak_to_peak_db = r.peak_to_peak_db;
    });
}

mdg_status mdg_channel_estimate(const mdg_channel *ch, double snr_db, int corrected, char **report_json)
{
    return guarded([&] {
        require_ptr(ch, "ch");
        require_ptr(report_json, "report_json");
        const auto r = mdg::analytic_estimate(ch->channel, mdg::Snr::from_db(snr_db), corrected != 0);
        *report_json = copy_string(r.to_json());
    });
}

// --- scalar relations ------------------------------------------------------------

mdg_status mdg_observed_eigenvalue(double lambda2, double snr_db, double *out)
{
    return guarded([&] {
        require_ptr(out, "out");
        *out = mdg::observed_spectrum_analytic(lambda2, mdg::Snr::from_db(snr_db));
    });
}

mdg_status mdg_correct_eigenvalue(double lambda2_mmse, double snr_db, double *out)
{
    return guarded([&] {
        require_ptr(out, "out");
        *out = mdg::correct_spectrum(lambda2_mmse, mdg::Snr::from_db(snr_db));
    });
}

mdg_status mdg_osnr_to_snr(double osnr_db, double symbol_time_ps, double *snr_db)
{
    return guarded([&] {
        require_ptr(snr_db, "snr_db");
        *snr_db = mdg::osnr_to_snr(osnr_db, symbol_time_ps);
    });
}

double mdg_estimation_error(double sigma_ref_db, double sigma_nl_db)
{
    return mdg::estimation_error(sigma_ref_db, sigma_nl_db);
}

} // extern "C"
