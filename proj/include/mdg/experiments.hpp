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

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mdg/channel.hpp"
#include "mdg/metrics.hpp"
#include "mdg/signal.hpp"

namespace mdg
{

enum class ExperimentKind
{
    scatter,
    surface,
    sweep,
    voa
};

enum class Correction
{
    off,
    on,
    both
};

const char *to_string(ExperimentKind kind);
const char *to_string(Correction c);
ExperimentKind parse_experiment_kind(const std::string &s);
Correction parse_correction(const std::string &s);

/// VOA emulation sweep. Mode order LP01, LP11a, LP11b.
struct VoaExperiment
{
    int case_id = 4;
    std::vector<double> baseline_launch_db{0.0, 0.0, 0.0};
    double coupling_kappa = 0.0;
    double sweep_span_db = 12.0;
    int steps = 13;
    double initial_attenuation_db = 5.0;
    /// Receiver SNR of the noise-free reference measurement; +inf for none.
    double intrinsic_snr_db = 38.5;
    /// Estimate through modulate/propagate/equalize instead of the analytic W.
    bool signal_chain = false;

    void validate() const;
};

struct ExperimentConfig
{
    ExperimentKind kind = ExperimentKind::surface;
    LinkConfig link;
    VoaExperiment voa;
    /// Exactly one of the two sigma grids is nonempty (voa uses neither).
    std::vector<double> sigma_g_db;
    std::vector<double> sigma_mdg_target_db;
    std::vector<Snr> snr;
    int trials = 5;
    Correction correction = Correction::both;
    Seed seed = 1;
    int parallelism = 0; // 0: hardware concurrency
    SignalConfig signal;
    EqConfig equalizer;
    int transfer_points = 256;

    void validate() const;

    /// "desk" (N_m = 3, N_f = 200, 1e5 symbols, 60 taps) or "full"
    /// (N_m = 6, N_f = 1000, 4e5 symbols, 100 taps, 100 spans).
    static ExperimentConfig preset(const std::string &name, ExperimentKind kind);
};

constexpr double not_available = std::numeric_limits<double>::quiet_NaN();

enum class TrialStatus
{
    ok,
    convergence_failure
};

/// One realization at one grid point. Values not produced by the experiment
/// (e.g. corrected columns with correction off) are NaN.
struct TrialRecord
{
    int grid_index = 0;
    int trial = 0;
    Seed seed = 0; // channel realization seed
    double sigma_g_db = not_available;
    double sigma_mdg_target_db = not_available;
    double snr_db = not_available;
    double voa_ratio_db = not_available;
    TrialStatus status = TrialStatus::ok;
    std::string message;

    double sigma_mdg_actual_db = not_available; // from H
    double sigma_mdg_ref_db = not_available;    // reference the errors are taken against
    double sigma_mdg_est_db = not_available;
    double sigma_mdg_est_corrected_db = not_available;
    double sigma_mdg_err_db = not_available; // estimation_error(ref, est)
    double sigma_mdg_err_corrected_db = not_available;
    double abs_err_db = not_available;
    double abs_err_corrected_db = not_available;
    double peak_to_peak_actual_db = not_available;
    double peak_to_peak_est_db = not_available;
    double peak_to_peak_est_corrected_db = not_available;
    int flagged_bins = 0;
    double lms_final_mse = not_available;
    double wall_time_s = 0.0;
};

struct Summary
{
    double mean = not_available;
    double std = not_available;
};

struct AggregateRow
{
    int grid_index = 0;
    double sigma_g_db = not_available;
    double sigma_mdg_target_db = not_available;
    double snr_db = not_available;
    double voa_ratio_db = not_available;
    int n_ok = 0;
    int n_skipped = 0;
    Summary sigma_mdg_actual_db, sigma_mdg_ref_db, sigma_mdg_est_db, sigma_mdg_est_corrected_db;
    Summary sigma_mdg_err_db, sigma_mdg_err_corrected_db, abs_err_db, abs_err_corrected_db;
    Summary peak_to_peak_actual_db, peak_to_peak_est_db, peak_to_peak_est_corrected_db;
};

/// True vs MMSE-observed eigenvalue of H H^H at one bin (scatter only).
struct EigenPair
{
    int grid_index = 0;
    int trial = 0;
    int bin = 0;
    int index = 0;
    double true_lambda2 = 0.0;
    double observed_lambda2 = 0.0;
    double shifted_lambda2 = 0.0; // true + 2 / SNR
};

struct ResultTable
{
    ExperimentKind kind = ExperimentKind::surface;
    std::vector<TrialRecord> records;  // sorted by (grid_index, trial)
    std::vector<AggregateRow> aggregates; // one per grid point
    std::vector<EigenPair> eigen_pairs;

    /// Trial rows then aggregate rows. Wall time is left out so that the
    /// file is reproducible.
    std::string to_csv() const;
    std::string eigen_pairs_csv() const;
    std::string to_json() const;
};

/// Column names of ResultTable::to_csv, in order.
const std::vector<std::string> &result_csv_header();

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

ResultTable run_scatter(const ExperimentConfig &cfg, const ProgressCallback &progress = {});
ResultTable run_error_surface(const ExperimentConfig &cfg, const ProgressCallback &progress = {});
ResultTable run_endtoend_sweep(const ExperimentConfig &cfg, const ProgressCallback &progress = {});
ResultTable run_voa_sweep(const ExperimentConfig &cfg, const ProgressCallback &progress = {});
/// Dispatches on cfg.kind.
ResultTable run_experiment(const ExperimentConfig &cfg, const ProgressCallback &progress = {});

/// Per-section sigma_g for which the normalized realization of `link`
/// (its seed fixed) has sigma_mdg = target over `frequencies_ghz`.
double calibrate_sigma_g(const LinkConfig &link, double target_sigma_mdg_db, const std::vector<double> &frequencies_ghz,
                         double tolerance_db = 1e-4);

/// Channel bins inside |f| <= (1 + rolloff) / 2 * Rs.
std::vector<std::size_t> signal_band_bins(const ChannelRealization &ch, const SignalConfig &signal);

/// Seeds used by the harness, exposed so the manifest can list them.
Seed channel_seed(Seed base, int trial);
Seed frame_seed(Seed base, int grid_index, int trial);
Seed noise_seed(Seed base, int grid_index, int trial);

/// results.csv, results.json, manifest.json (and scatter_points.csv for
/// scatter) into `directory`, created if missing.
void write_result_files(const ResultTable &table, const ExperimentConfig &cfg, const std::string &directory);

} // namespace mdg
