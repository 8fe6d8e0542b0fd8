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

#include "mdg/experiments.hpp"

#include "mdg/config.hpp"
#include "mdg/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace mdg
{

const char *to_string(ExperimentKind kind)
{
    switch (kind)
    {
    case ExperimentKind::scatter:
        return "scatter";
    case ExperimentKind::surface:
        return "surface";
    case ExperimentKind::sweep:
        return "sweep";
    case ExperimentKind::voa:
        return "voa";
    }
    return "unknown";
}

const char *to_string(Correction c)
{
    switch (c)
    {
    case Correction::off:
        return "off";
    case Correction::on:
        return "on";
    case Correction::both:
        return "both";
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string &s)
{
    for (auto k : {ExperimentKind::scatter, ExperimentKind::surface, ExperimentKind::sweep, ExperimentKind::voa})
        if (s == to_string(k))
            return k;
    fail(ErrorCode::invalid_argument, "unknown experiment kind '" + s + "'");
}

Correction parse_correction(const std::string &s)
{
    for (auto c : {Correction::off, Correction::on, Correction::both})
        if (s == to_string(c))
            return c;
    fail(ErrorCode::invalid_argument, "correction must be off, on or both (got '" + s + "')");
}

void VoaExperiment::validate() const
{
    require(case_id >= 1 && case_id <= 4, "voa.case must be 1, 2, 3 or 4");
    require(baseline_launch_db.size() == 3, "voa.baseline_launch_db must hold 3 values");
    for (double b : baseline_launch_db)
        require(std::isfinite(b), "voa.baseline_launch_db must be finite");
    require(coupling_kappa >= 0.0 && std::isfinite(coupling_kappa), "voa.coupling_kappa must be >= 0");
    require(sweep_span_db >= 0.0 && std::isfinite(sweep_span_db), "voa.sweep_span_db must be >= 0");
    require(steps >= 1, "voa.steps must be >= 1");
    require(initial_attenuation_db >= 0.0 && std::isfinite(initial_attenuation_db),
            "voa.initial_attenuation_db must be >= 0");
    require(!std::isnan(intrinsic_snr_db) && intrinsic_snr_db > -50.0, "voa.intrinsic_snr_db must be a valid SNR");
}

void ExperimentConfig::validate() const
{
    require(trials >= 1, "trials must be >= 1");
    require(parallelism >= 0, "parallelism must be >= 0");
    require(!snr.empty(), "grid.snr_db must not be empty");
    require(transfer_points >= 1, "equalizer.transfer_points must be >= 1");
    if (kind == ExperimentKind::voa)
    {
        voa.validate();
        require(sigma_g_db.empty() && sigma_mdg_target_db.empty(),
                "grid.sigma_g_db / grid.sigma_mdg_target_db are not used by voa experiments");
        if (voa.signal_chain)
        {
            signal.validate();
            equalizer.validate();
        }
        return;
    }
    link.validate();
    require(sigma_g_db.empty() != sigma_mdg_target_db.empty(),
            "exactly one of grid.sigma_g_db and grid.sigma_mdg_target_db must be given");
    for (double s : sigma_g_db)
        require(s >= 0.0 && std::isfinite(s), "grid.sigma_g_db values must be >= 0");
    for (double s : sigma_mdg_target_db)
        require(s >= 0.0 && std::isfinite(s), "grid.sigma_mdg_target_db values must be >= 0");
    if (kind == ExperimentKind::sweep)
    {
        signal.validate();
        equalizer.validate();
    }
}

ExperimentConfig ExperimentConfig::preset(const std::string &name, ExperimentKind kind)
{
    ExperimentConfig c;
    c.kind = kind;
    if (name == "desk")
    {
        c.link.spatial_modes = 3;
        c.link.n_bins = 200;
        // short modal memory so that 60 taps hold the impulse response
        c.link.gd_coeff_ps_per_sqrt_km = 0.3;
        c.signal.symbols_per_stream = 100000;
        c.equalizer.taps_per_filter = 60;
        c.equalizer.epochs = 3;
        c.equalizer.step_decay = 0.3;
    }
    else if (name == "full")
    {
        c.link.spatial_modes = 6;
        c.link.n_bins = 1000;
        c.link.spans = 100;
        c.signal.symbols_per_stream = 400000;
        c.equalizer.taps_per_filter = 100;
        c.equalizer.epochs = 3;
        c.equalizer.step_decay = 0.3;
    }
    else
        fail(ErrorCode::invalid_argument, "unknown preset '" + name + "' (expected desk or full)");

    switch (kind)
    {
    case ExperimentKind::scatter:
        c.sigma_mdg_target_db = {1.2, 5.5};
        c.snr = {Snr::from_db(5.0), Snr::from_db(15.0)};
        c.trials = 1;
        break;
    case ExperimentKind::surface:
        c.sigma_g_db = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
        for (double s = 2.0; s <= 24.0; s += 2.0)
            c.snr.push_back(Snr::from_db(s));
        break;
    case ExperimentKind::sweep:
        c.sigma_mdg_target_db = {2.0, 4.0, 6.0};
        c.snr = {Snr::from_db(10.0), Snr::from_db(15.0), Snr::infinite()};
        c.trials = 3;
        break;
    case ExperimentKind::voa:
        c.snr = {Snr::from_db(12.0), Snr::from_db(17.0)};
        c.trials = 1;
        c.equalizer.taps_per_filter = 15;
        c.signal.symbols_per_stream = 50000;
        break;
    }
    return c;
}

// --- seeds ---------------------------------------------------------------------

Seed channel_seed(Seed base, int trial)
{
    return derive_seed(base, 1, static_cast<std::uint64_t>(trial));
}

Seed frame_seed(Seed base, int grid_index, int trial)
{
    return derive_seed(derive_seed(base, 2, static_cast<std::uint64_t>(grid_index)), static_cast<std::uint64_t>(trial));
}

Seed noise_seed(Seed base, int grid_index, int trial)
{
    return derive_seed(derive_seed(base, 3, static_cast<std::uint64_t>(grid_index)), static_cast<std::uint64_t>(trial));
}

namespace
{

Seed reference_noise_seed(Seed base, int point, int trial)
{
    return derive_seed(derive_seed(base, 4, static_cast<std::uint64_t>(point)), static_cast<std::uint64_t>(trial));
}

// --- grid + worker pool ------------------------------------------------------------

struct GridPoint
{
    int index = 0;
    int sigma_index = 0; // or VOA schedule point
    int snr_index = 0;
    double sigma_g_db = not_available;
    double target_db = not_available;
    double voa_ratio_db = not_available;
    Snr snr = Snr::infinite();
};

std::size_t n_sigma(const ExperimentConfig &cfg)
{
    return cfg.sigma_g_db.empty() ? cfg.sigma_mdg_target_db.size() : cfg.sigma_g_db.size();
}

GridPoint grid_point(const ExperimentConfig &cfg, int sigma_index, int snr_index)
{
    GridPoint g;
    g.sigma_index = sigma_index;
    g.snr_index = snr_index;
    g.index = sigma_index * static_cast<int>(cfg.snr.size()) + snr_index;
    const auto si = static_cast<std::size_t>(sigma_index);
    if (!cfg.sigma_g_db.empty())
        g.sigma_g_db = cfg.sigma_g_db[si];
    else if (!cfg.sigma_mdg_target_db.empty())
        g.target_db = cfg.sigma_mdg_target_db[si];
    g.snr = cfg.snr[static_cast<std::size_t>(snr_index)];
    return g;
}

void parallel_for(std::size_t n_jobs, int parallelism, const std::function<void(std::size_t)> &job,
                  const ProgressCallback &progress)
{
    if (n_jobs == 0)
        return;
    unsigned workers = parallelism > 0 ? static_cast<unsigned>(parallelism) : std::thread::hardware_concurrency();
    workers = std::clamp(workers, 1u, static_cast<unsigned>(n_jobs));

    std::vector<std::exception_ptr> errors(n_jobs);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n_jobs; i = next++)
        {
            try
            {
                job(i);
            }
            catch (...)
            {
                errors[i] = std::current_exception();
            }
            const std::size_t d = ++done;
            if (progress)
            {
                std::lock_guard lock(progress_mutex);
                progress(d, n_jobs);
            }
        }
    };
    if (workers == 1)
        worker();
    else
    {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

bool wants_uncorrected(const ExperimentConfig &cfg)
{
    return cfg.correction != Correction::on;
}

bool wants_corrected(const ExperimentConfig &cfg)
{
    return cfg.correction != Correction::off;
}

void fill_errors(TrialRecord &r)
{
    if (!std::isnan(r.sigma_mdg_ref_db) && !std::isnan(r.sigma_mdg_est_db))
    {
        r.sigma_mdg_err_db = estimation_error(r.sigma_mdg_ref_db, r.sigma_mdg_est_db);
        r.abs_err_db = std::abs(r.sigma_mdg_err_db);
    }
    if (!std::isnan(r.sigma_mdg_ref_db) && !std::isnan(r.sigma_mdg_est_corrected_db))
    {
        r.sigma_mdg_err_corrected_db = estimation_error(r.sigma_mdg_ref_db, r.sigma_mdg_est_corrected_db);
        r.abs_err_corrected_db = std::abs(r.sigma_mdg_err_corrected_db);
    }
}

void set_point(TrialRecord &r, const GridPoint &g, int trial, Seed seed)
{
    r.grid_index = g.index;
    r.trial = trial;
    r.seed = seed;
    r.sigma_g_db = g.sigma_g_db;
    r.sigma_mdg_target_db = g.target_db;
    r.snr_db = g.snr.db();
    r.voa_ratio_db = g.voa_ratio_db;
}

/// Noise-loaded estimate pair from an analytic MMSE equalizer or taps; the
/// corrected estimate at infinite SNR is the uncorrected one.
template <typename Estimate>
void record_estimates(TrialRecord &r, const ExperimentConfig &cfg, const Snr &snr, Estimate &&estimate)
{
    std::optional<MdgReport> unc;
    if (wants_uncorrected(cfg) || snr.is_infinite())
        unc = estimate(false);
    if (wants_uncorrected(cfg))
    {
        r.sigma_mdg_est_db = unc->sigma_mdg_db;
        r.peak_to_peak_est_db = unc->peak_to_peak_db;
        r.flagged_bins = unc->flagged_bins;
    }
    if (wants_corrected(cfg))
    {
        const MdgReport cor = snr.is_infinite() ? *unc : estimate(true);
        r.sigma_mdg_est_corrected_db = cor.sigma_mdg_db;
        r.peak_to_peak_est_corrected_db = cor.peak_to_peak_db;
        r.flagged_bins = std::max(r.flagged_bins, cor.flagged_bins);
    }
}

Summary summarize(const std::vector<const TrialRecord *> &rows, double TrialRecord::*field)
{
    std::vector<double> v;
    for (const auto *r : rows)
        if (!std::isnan(r->*field))
            v.push_back(r->*field);
    Summary s;
    if (v.empty())
        return s;
    double sum = 0.0;
    for (double x : v)
        sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v)
        ss += (x - s.mean) * (x - s.mean);
    s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return s;
}

ResultTable assemble(ExperimentKind kind, std::vector<TrialRecord> records, const std::vector<GridPoint> &grid)
{
    std::sort(records.begin(), records.end(), [](const TrialRecord &a, const TrialRecord &b) {
        return a.grid_index != b.grid_index ? a.grid_index < b.grid_index : a.trial < b.trial;
    });
    ResultTable t;
    t.kind = kind;
    std::map<int, std::vector<const TrialRecord *>> by_point;
    for (const auto &r : records)
        by_point[r.grid_index].push_back(&r);
    for (const auto &g : grid)
    {
        AggregateRow a;
        a.grid_index = g.index;
        a.sigma_g_db = g.sigma_g_db;
        a.sigma_mdg_target_db = g.target_db;
        a.snr_db = g.snr.db();
        a.voa_ratio_db = g.voa_ratio_db;
        std::vector<const TrialRecord *> ok;
        for (const auto *r : by_point[g.index])
        {
            if (r->status == TrialStatus::ok)
                ok.push_back(r);
            else
                ++a.n_skipped;
        }
        a.n_ok = static_cast<int>(ok.size());
        a.sigma_mdg_actual_db = summarize(ok, &TrialRecord::sigma_mdg_actual_db);
        a.sigma_mdg_ref_db = summarize(ok, &TrialRecord::sigma_mdg_ref_db);
        a.sigma_mdg_est_db = summarize(ok, &TrialRecord::sigma_mdg_est_db);
        a.sigma_mdg_est_corrected_db = summarize(ok, &TrialRecord::sigma_mdg_est_corrected_db);
        a.sigma_mdg_err_db = summarize(ok, &TrialRecord::sigma_mdg_err_db);
        a.sigma_mdg_err_corrected_db = summarize(ok, &TrialRecord::sigma_mdg_err_corrected_db);
        a.abs_err_db = summarize(ok, &TrialRecord::abs_err_db);
        a.abs_err_corrected_db = summarize(ok, &TrialRecord::abs_err_corrected_db);
        a.peak_to_peak_actual_db = summarize(ok, &TrialRecord::peak_to_peak_actual_db);
        a.peak_to_peak_est_db = summarize(ok, &TrialRecord::peak_to_peak_est_db);
        a.peak_to_peak_est_corrected_db = summarize(ok, &TrialRecord::peak_to_peak_est_corrected_db);
        t.aggregates.push_back(a);
    }
    t.records = std::move(records);
    return t;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Link of one realization with sigma_g resolved (calibrated when the grid
/// holds sigma_mdg targets).
LinkConfig realization_link(const ExperimentConfig &cfg, const GridPoint &g, int trial,
                            const std::vector<double> &calibration_freqs)
{
    LinkConfig link = cfg.link;
    link.seed = channel_seed(cfg.seed, trial);
    if (!std::isnan(g.sigma_g_db))
        link.sigma_g_db = g.sigma_g_db;
    else
        link.sigma_g_db = calibrate_sigma_g(link, g.target_db, calibration_freqs);
    return link;
}

void check_kind(const ExperimentConfig &cfg, ExperimentKind kind)
{
    require(cfg.kind == kind, std::string("experiment kind must be ") + to_string(kind));
    cfg.validate();
}

} // namespace

// --- calibration ---------------------------------------------------------------------

double calibrate_sigma_g(const LinkConfig &link, double target_sigma_mdg_db, const std::vector<double> &frequencies_ghz,
                         double tolerance_db)
{
    require(target_sigma_mdg_db >= 0.0, "calibrate_sigma_g: target must be >= 0");
    require(!frequencies_ghz.empty(), "calibrate_sigma_g: no frequencies");
    if (target_sigma_mdg_db == 0.0)
        return 0.0;
    auto realized = [&](double sigma_g) {
        LinkConfig l = link;
        l.sigma_g_db = sigma_g;
        EigenSpectrum spec;
        for (const auto &h : channel_response(l, frequencies_ghz))
            spec.per_bin.push_back(channel_spectrum(h));
        return sigma_mdg(spec);
    };
    double lo = 0.0;
    double hi = std::max(0.01, target_sigma_mdg_db / 10.0);
    for (int i = 0; realized(hi) < target_sigma_mdg_db; ++i)
    {
        if (i > 40)
            fail(ErrorCode::numeric_error, "calibrate_sigma_g: target sigma_mdg not reachable");
        lo = hi;
        hi *= 2.0;
    }
    double mid = 0.5 * (lo + hi);
    for (int i = 0; i < 100; ++i)
    {
        mid = 0.5 * (lo + hi);
        const double s = realized(mid);
        if (std::abs(s - target_sigma_mdg_db) < tolerance_db)
            break;
        (s < target_sigma_mdg_db ? lo : hi) = mid;
    }
    return mid;
}

std::vector<std::size_t> signal_band_bins(const ChannelRealization &ch, const SignalConfig &signal)
{
    const double edge = 0.5 * (1.0 + signal.rolloff) * signal.symbol_rate_gbd;
    std::vector<std::size_t> bins;
    for (std::size_t b = 0; b < ch.n_bins(); ++b)
        if (std::abs(ch.frequencies_ghz()[b]) <= edge)
            bins.push_back(b);
    require(!bins.empty(), "no channel bin inside the signal band; increase link.n_bins");
    return bins;
}

namespace
{

std::vector<double> band_frequencies(const LinkConfig &link, const SignalConfig &signal)
{
    const double edge = 0.5 * (1.0 + signal.rolloff) * signal.symbol_rate_gbd;
    std::vector<double> f;
    for (double x : frequency_grid(link.n_bins, link.bandwidth_ghz))
        if (std::abs(x) <= edge)
            f.push_back(x);
    require(!f.empty(), "no channel bin inside the signal band; increase link.n_bins");
    return f;
}

} // namespace

// --- scatter + surface ---------------------------------------------------------------

namespace
{

// Shared by scatter and surface: one job per (sigma point, trial) covering
// every SNR on one realization.
ResultTable run_analytic(const ExperimentConfig &cfg, bool scatter, const ProgressCallback &progress)
{
    const int n_snr = static_cast<int>(cfg.snr.size());
    const int n_sig = static_cast<int>(n_sigma(cfg));
    std::vector<GridPoint> grid;
    for (int i = 0; i < n_sig; ++i)
        for (int j = 0; j < n_snr; ++j)
            grid.push_back(grid_point(cfg, i, j));
    const auto full_band = frequency_grid(cfg.link.n_bins, cfg.link.bandwidth_ghz);

    const std::size_t n_jobs = static_cast<std::size_t>(n_sig) * static_cast<std::size_t>(cfg.trials);
    std::vector<std::vector<TrialRecord>> rows(n_jobs);
    std::vector<std::vector<EigenPair>> pairs(n_jobs);
    parallel_for(
        n_jobs, cfg.parallelism,
        [&](std::size_t job) {
            const auto t0 = std::chrono::steady_clock::now();
            const int sig = static_cast<int>(job) / cfg.trials;
            const int trial = static_cast<int>(job) % cfg.trials;
            const LinkConfig link = realization_link(cfg, grid_point(cfg, sig, 0), trial, full_band);
            const ChannelRealization ch = normalize_channel(build_channel(link));
            const MdgReport actual = channel_report(ch);
            const double setup_time = seconds_since(t0);

            for (int j = 0; j < n_snr; ++j)
            {
                const auto t1 = std::chrono::steady_clock::now();
                const GridPoint g = grid_point(cfg, sig, j);
                TrialRecord r;
                set_point(r, g, trial, link.seed);
                r.sigma_g_db = link.sigma_g_db;
                r.sigma_mdg_actual_db = actual.sigma_mdg_db;
                r.sigma_mdg_ref_db = actual.sigma_mdg_db;
                r.peak_to_peak_actual_db = actual.peak_to_peak_db;
                record_estimates(r, cfg, g.snr, [&](bool corrected) { return analytic_estimate(ch, g.snr, corrected); });
                fill_errors(r);
                if (scatter)
                {
                    for (std::size_t b = 0; b < ch.n_bins(); ++b)
                    {
                        // Pair through the eigenvectors shared by H H^H and W^-1 W^-H;
                        // sorting both spectra would swap pairs below 1/SNR.
                        const CMatrix &h = ch.at(b);
                        const SpectralDecomposition truth = hermitian_spectrum(h * h.adjoint());
                        const CMatrix wi = regularized_inverse(mmse_transfer(h, g.snr));
                        const CMatrix seen = truth.eigenvectors.adjoint() * (wi * wi.adjoint()) * truth.eigenvectors;
                        const double shift = g.snr.is_infinite() ? 0.0 : 2.0 / g.snr.linear();
                        for (Eigen::Index i = 0; i < truth.eigenvalues.size(); ++i)
                            pairs[job].push_back({g.index, trial, static_cast<int>(b), static_cast<int>(i),
                                                  truth.eigenvalues(i), seen(i, i).real(),
                                                  truth.eigenvalues(i) + shift});
                    }
                }
                r.wall_time_s = seconds_since(t1) + setup_time / n_snr;
                rows[job].push_back(std::move(r));
            }
        },
        progress);

    std::vector<TrialRecord> all;
    std::vector<EigenPair> all_pairs;
    for (std::size_t j = 0; j < n_jobs; ++j)
    {
        all.insert(all.end(), rows[j].begin(), rows[j].end());
        all_pairs.insert(all_pairs.end(), pairs[j].begin(), pairs[j].end());
    }
    ResultTable t = assemble(cfg.kind, std::move(all), grid);
    std::sort(all_pairs.begin(), all_pairs.end(), [](const EigenPair &a, const EigenPair &b) {
        return std::tie(a.grid_index, a.trial, a.bin, a.index) < std::tie(b.grid_index, b.trial, b.bin, b.index);
    });
    t.eigen_pairs = std::move(all_pairs);
    return t;
}

} // namespace

ResultTable run_scatter(const ExperimentConfig &cfg, const ProgressCallback &progress)
{
    check_kind(cfg, ExperimentKind::scatter);
    return run_analytic(cfg, true, progress);
}

ResultTable run_error_surface(const ExperimentConfig &cfg, const ProgressCallback &progress)
{
    check_kind(cfg, ExperimentKind::surface);
    return run_analytic(cfg, false, progress);
}

// --- end-to-end sweep -----------------------------------------------------------------

namespace
{

/// Transmit, propagate, load noise, receive and equalize one frame.
/// Noise is referenced to the transmitted power when `tx_referenced`.
EqualizerState run_chain(const ExperimentConfig &cfg, const ChannelRealization &ch, const Snr &snr, Seed frame,
                         Seed noise, bool tx_referenced)
{
    const SymbolFrame symbols = generate_frame(cfg.signal, ch.dim(), frame);
    const Waveform tx = modulate(symbols, cfg.signal);
    std::optional<double> reference;
    if (tx_referenced)
        reference = mean_power(tx);
    const Waveform line = load_awgn(propagate(tx, ch), snr, noise, reference);
    const Waveform rx = receive_filter(line, cfg.signal);
    return lms_equalize(rx, symbols, cfg.equalizer, cfg.signal.rolloff).first;
}

} // namespace

ResultTable run_endtoend_sweep(const ExperimentConfig &cfg, const ProgressCallback &progress)
{
    check_kind(cfg, ExperimentKind::sweep);
    const int n_snr = static_cast<int>(cfg.snr.size());
    const int n_sig = static_cast<int>(n_sigma(cfg));
    std::vector<GridPoint> grid;
    for (int i = 0; i < n_sig; ++i)
        for (int j = 0; j < n_snr; ++j)
            grid.push_back(grid_point(cfg, i, j));
    const auto band = band_frequencies(cfg.link, cfg.signal);

    const std::size_t n_jobs = grid.size() * static_cast<std::size_t>(cfg.trials);
    std::vector<TrialRecord> rows(n_jobs);
    parallel_for(
        n_jobs, cfg.parallelism,
        [&](std::size_t job) {
            const auto t0 = std::chrono::steady_clock::now();
            const GridPoint &g = grid[job / static_cast<std::size_t>(cfg.trials)];
            const int trial = static_cast<int>(job % static_cast<std::size_t>(cfg.trials));
            const LinkConfig link = realization_link(cfg, g, trial, band);
            const ChannelRealization ch = normalize_channel(build_channel(link));
            const MdgReport actual = channel_report(ch, signal_band_bins(ch, cfg.signal));

            TrialRecord &r = rows[job];
            set_point(r, g, trial, link.seed);
            r.sigma_g_db = link.sigma_g_db;
            r.sigma_mdg_actual_db = actual.sigma_mdg_db;
            r.sigma_mdg_ref_db = actual.sigma_mdg_db;
            r.peak_to_peak_actual_db = actual.peak_to_peak_db;
            try
            {
                const EqualizerState st = run_chain(cfg, ch, g.snr, frame_seed(cfg.seed, g.index, trial),
                                                    noise_seed(cfg.seed, g.index, trial), true);
                r.lms_final_mse = st.mse_trace.empty() ? not_available : st.mse_trace.back();
                std::optional<Snr> snr;
                if (!g.snr.is_infinite())
                    snr = g.snr;
                record_estimates(r, cfg, g.snr, [&](bool corrected) {
                    return estimate_from_taps(st, snr, corrected, cfg.transfer_points);
                });
                fill_errors(r);
            }
            catch (const Error &e)
            {
                if (e.code() != ErrorCode::convergence_failure)
                    throw;
                r.status = TrialStatus::convergence_failure;
                r.message = e.what();
            }
            r.wall_time_s = seconds_since(t0);
        },
        progress);
    return assemble(cfg.kind, std::move(rows), grid);
}

// --- VOA sweep -----------------------------------------------------------------------

namespace
{

ChannelRealization power_normalized(const ChannelRealization &ch)
{
    return ch.scaled(1.0 / std::sqrt(mean_power_gain(ch)));
}

} // namespace

ResultTable run_voa_sweep(const ExperimentConfig &cfg, const ProgressCallback &progress)
{
    check_kind(cfg, ExperimentKind::voa);
    const auto schedule = voa_case_schedule(cfg.voa.case_id, cfg.voa.baseline_launch_db, cfg.voa.coupling_kappa,
                                            cfg.voa.sweep_span_db, cfg.voa.steps, cfg.voa.initial_attenuation_db);
    const int n_snr = static_cast<int>(cfg.snr.size());
    const int n_pts = static_cast<int>(schedule.size());
    std::vector<GridPoint> grid;
    for (int p = 0; p < n_pts; ++p)
        for (int j = 0; j < n_snr; ++j)
        {
            GridPoint g;
            g.index = p * n_snr + j;
            g.sigma_index = p;
            g.snr_index = j;
            g.voa_ratio_db = schedule[static_cast<std::size_t>(p)].ratio_db;
            g.snr = cfg.snr[static_cast<std::size_t>(j)];
            grid.push_back(g);
        }
    const Snr intrinsic = Snr::from_db(cfg.voa.intrinsic_snr_db);

    const std::size_t n_jobs = static_cast<std::size_t>(n_pts) * static_cast<std::size_t>(cfg.trials);
    std::vector<std::vector<TrialRecord>> rows(n_jobs);
    parallel_for(
        n_jobs, cfg.parallelism,
        [&](std::size_t job) {
            const auto t0 = std::chrono::steady_clock::now();
            const int p = static_cast<int>(job) / cfg.trials;
            const int trial = static_cast<int>(job) % cfg.trials;
            const Seed seed = channel_seed(cfg.seed, trial);
            const ChannelRealization ch =
                power_normalized(voa_channel(schedule[static_cast<std::size_t>(p)].config, seed));
            const MdgReport actual = channel_report(ch);

            // Reference: uncorrected estimate at the intrinsic SNR.
            double reference = 0.0;
            std::string failure;
            auto estimator = [&](const Snr &snr, Seed noise, int grid_index) -> std::function<MdgReport(bool)> {
                if (!cfg.voa.signal_chain)
                    return [&ch, snr](bool corrected) { return analytic_estimate(ch, snr, corrected); };
                auto st = std::make_shared<EqualizerState>(
                    run_chain(cfg, ch, snr, frame_seed(cfg.seed, grid_index, trial), noise, false));
                std::optional<Snr> known;
                if (!snr.is_infinite())
                    known = snr;
                return [st, known, &cfg](bool corrected) {
                    return estimate_from_taps(*st, known, corrected, cfg.transfer_points);
                };
            };
            try
            {
                reference = estimator(intrinsic, reference_noise_seed(cfg.seed, p, trial), p * n_snr)(false).sigma_mdg_db;
            }
            catch (const Error &e)
            {
                if (e.code() != ErrorCode::convergence_failure)
                    throw;
                failure = e.what();
            }
            const double setup_time = seconds_since(t0);

            for (int j = 0; j < n_snr; ++j)
            {
                const auto t1 = std::chrono::steady_clock::now();
                const GridPoint &g = grid[static_cast<std::size_t>(p * n_snr + j)];
                TrialRecord r;
                set_point(r, g, trial, seed);
                r.sigma_mdg_actual_db = actual.sigma_mdg_db;
                r.peak_to_peak_actual_db = actual.peak_to_peak_db;
                if (!failure.empty())
                {
                    r.status = TrialStatus::convergence_failure;
                    r.message = failure;
                }
                else
                {
                    r.sigma_mdg_ref_db = reference;
                    try
                    {
                        auto est = estimator(g.snr, noise_seed(cfg.seed, g.index, trial), g.index);
                        record_estimates(r, cfg, g.snr, est);
                        fill_errors(r);
                    }
                    catch (const Error &e)
                    {
                        if (e.code() != ErrorCode::convergence_failure)
                            throw;
                        r.status = TrialStatus::convergence_failure;
                        r.message = e.what();
                    }
                }
                r.wall_time_s = seconds_since(t1) + setup_time / n_snr;
                rows[job].push_back(std::move(r));
            }
        },
        progress);

    std::vector<TrialRecord> all;
    for (auto &v : rows)
        all.insert(all.end(), v.begin(), v.end());
    return assemble(cfg.kind, std::move(all), grid);
}

ResultTable run_experiment(const ExperimentConfig &cfg, const ProgressCallback &progress)
{
    switch (cfg.kind)
    {
    case ExperimentKind::scatter:
        return run_scatter(cfg, progress);
    case ExperimentKind::surface:
        return run_error_surface(cfg, progress);
    case ExperimentKind::sweep:
        return run_endtoend_sweep(cfg, progress);
    case ExperimentKind::voa:
        return run_voa_sweep(cfg, progress);
    }
    fail(ErrorCode::invalid_argument, "unknown experiment kind");
}

// --- output ------------------------------------------------------------------------

namespace
{

std::string fmt(double v)
{
    if (std::isnan(v))
        return "";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

nlohmann::ordered_json jnum(double v)
{
    if (std::isnan(v))
        return nullptr;
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    return v;
}

const char *status_name(TrialStatus s)
{
    return s == TrialStatus::ok ? "ok" : "convergence_failure";
}

template <typename... T>
std::string csv_line(const T &...fields)
{
    std::string line;
    bool first = true;
    ((line += (first ? "" : ","), line += fields, first = false), ...);
    line += '\n';
    return line;
}

} // namespace

const std::vector<std::string> &result_csv_header()
{
    static const std::vector<std::string> h = {
        "row_type",
        "grid_index",
        "trial",
        "seed",
        "sigma_g_db",
        "sigma_mdg_target_db",
        "snr_db",
        "voa_ratio_db",
        "status",
        "n_ok",
        "n_skipped",
        "sigma_mdg_actual_db",
        "sigma_mdg_ref_db",
        "sigma_mdg_est_db",
        "sigma_mdg_est_corrected_db",
        "sigma_mdg_err_db",
        "sigma_mdg_err_corrected_db",
        "abs_err_db",
        "abs_err_corrected_db",
        "peak_to_peak_actual_db",
        "peak_to_peak_est_db",
        "peak_to_peak_est_corrected_db",
        "flagged_bins",
        "lms_final_mse",
        "std_sigma_mdg_actual_db",
        "std_sigma_mdg_est_db",
        "std_sigma_mdg_est_corrected_db",
        "std_sigma_mdg_err_db",
        "std_sigma_mdg_err_corrected_db",
    };
    return h;
}

std::string ResultTable::to_csv() const
{
    std::string out;
    const auto &h = result_csv_header();
    for (std::size_t i = 0; i < h.size(); ++i)
        out += (i ? "," : "") + h[i];
    out += '\n';
    for (const auto &r : records)
        out += csv_line(std::string("trial"), std::to_string(r.grid_index), std::to_string(r.trial),
                        std::to_string(r.seed), fmt(r.sigma_g_db), fmt(r.sigma_mdg_target_db), fmt(r.snr_db),
                        fmt(r.voa_ratio_db), std::string(status_name(r.status)), std::string(), std::string(),
                        fmt(r.sigma_mdg_actual_db), fmt(r.sigma_mdg_ref_db), fmt(r.sigma_mdg_est_db),
                        fmt(r.sigma_mdg_est_corrected_db), fmt(r.sigma_mdg_err_db), fmt(r.sigma_mdg_err_corrected_db),
                        fmt(r.abs_err_db), fmt(r.abs_err_corrected_db), fmt(r.peak_to_peak_actual_db),
                        fmt(r.peak_to_peak_est_db), fmt(r.peak_to_peak_est_corrected_db),
                        std::to_string(r.flagged_bins), fmt(r.lms_final_mse), std::string(), std::string(),
                        std::string(), std::string(), std::string());
    for (const auto &a : aggregates)
        out += csv_line(std::string("aggregate"), std::to_string(a.grid_index), std::string(), std::string(),
                        fmt(a.sigma_g_db), fmt(a.sigma_mdg_target_db), fmt(a.snr_db), fmt(a.voa_ratio_db),
                        std::string(a.n_ok > 0 ? "ok" : "all_skipped"), std::to_string(a.n_ok),
                        std::to_string(a.n_skipped), fmt(a.sigma_mdg_actual_db.mean), fmt(a.sigma_mdg_ref_db.mean),
                        fmt(a.sigma_mdg_est_db.mean), fmt(a.sigma_mdg_est_corrected_db.mean),
                        fmt(a.sigma_mdg_err_db.mean), fmt(a.sigma_mdg_err_corrected_db.mean), fmt(a.abs_err_db.mean),
                        fmt(a.abs_err_corrected_db.mean), fmt(a.peak_to_peak_actual_db.mean),
                        fmt(a.peak_to_peak_est_db.mean), fmt(a.peak_to_peak_est_corrected_db.mean), std::string(),
                        std::string(), fmt(a.sigma_mdg_actual_db.std), fmt(a.sigma_mdg_est_db.std),
                        fmt(a.sigma_mdg_est_corrected_db.std), fmt(a.sigma_mdg_err_db.std),
                        fmt(a.sigma_mdg_err_corrected_db.std));
    return out;
}

std::string ResultTable::eigen_pairs_csv() const
{
    std::string out = "grid_index,trial,bin,index,true_lambda2,observed_lambda2,shifted_lambda2\n";
    for (const auto &p : eigen_pairs)
        out += csv_line(std::to_string(p.grid_index), std::to_string(p.trial), std::to_string(p.bin),
                        std::to_string(p.index), fmt(p.true_lambda2), fmt(p.observed_lambda2), fmt(p.shifted_lambda2));
    return out;
}

std::string ResultTable::to_json() const
{
    using nlohmann::ordered_json;
    ordered_json j;
    j["kind"] = to_string(kind);
    j["records"] = ordered_json::array();
    for (const auto &r : records)
    {
        ordered_json o;
        o["grid_index"] = r.grid_index;
        o["trial"] = r.trial;
        o["seed"] = r.seed;
        o["sigma_g_db"] = jnum(r.sigma_g_db);
        o["sigma_mdg_target_db"] = jnum(r.sigma_mdg_target_db);
        o["snr_db"] = jnum(r.snr_db);
        o["voa_ratio_db"] = jnum(r.voa_ratio_db);
        o["status"] = status_name(r.status);
        if (!r.message.empty())
            o["message"] = r.message;
        o["sigma_mdg_actual_db"] = jnum(r.sigma_mdg_actual_db);
        o["sigma_mdg_ref_db"] = jnum(r.sigma_mdg_ref_db);
        o["sigma_mdg_est_db"] = jnum(r.sigma_mdg_est_db);
        o["sigma_mdg_est_corrected_db"] = jnum(r.sigma_mdg_est_corrected_db);
        o["sigma_mdg_err_db"] = jnum(r.sigma_mdg_err_db);
        o["sigma_mdg_err_corrected_db"] = jnum(r.sigma_mdg_err_corrected_db);
        o["abs_err_db"] = jnum(r.abs_err_db);
        o["abs_err_corrected_db"] = jnum(r.abs_err_corrected_db);
        o["peak_to_peak_actual_db"] = jnum(r.peak_to_peak_actual_db);
        o["peak_to_peak_est_db"] = jnum(r.peak_to_peak_est_db);
        o["peak_to_peak_est_corrected_db"] = jnum(r.peak_to_peak_est_corrected_db);
        o["flagged_bins"] = r.flagged_bins;
        o["lms_final_mse"] = jnum(r.lms_final_mse);
        o["wall_time_s"] = r.wall_time_s;
        j["records"].push_back(std::move(o));
    }
    j["aggregates"] = ordered_json::array();
    auto summary = [](const Summary &s) { return ordered_json{{"mean", jnum(s.mean)}, {"std", jnum(s.std)}}; };
    for (const auto &a : aggregates)
    {
        ordered_json o;
        o["grid_index"] = a.grid_index;
        o["sigma_g_db"] = jnum(a.sigma_g_db);
        o["sigma_mdg_target_db"] = jnum(a.sigma_mdg_target_db);
        o["snr_db"] = jnum(a.snr_db);
        o["voa_ratio_db"] = jnum(a.voa_ratio_db);
        o["n_ok"] = a.n_ok;
        o["n_skipped"] = a.n_skipped;
        o["sigma_mdg_actual_db"] = summary(a.sigma_mdg_actual_db);
        o["sigma_mdg_ref_db"] = summary(a.sigma_mdg_ref_db);
        o["sigma_mdg_est_db"] = summary(a.sigma_mdg_est_db);
        o["sigma_mdg_est_corrected_db"] = summary(a.sigma_mdg_est_corrected_db);
        o["sigma_mdg_err_db"] = summary(a.sigma_mdg_err_db);
        o["sigma_mdg_err_corrected_db"] = summary(a.sigma_mdg_err_corrected_db);
        o["abs_err_db"] = summary(a.abs_err_db);
        o["abs_err_corrected_db"] = summary(a.abs_err_corrected_db);
        o["peak_to_peak_actual_db"] = summary(a.peak_to_peak_actual_db);
        o["peak_to_peak_est_db"] = summary(a.peak_to_peak_est_db);
        o["peak_to_peak_est_corrected_db"] = summary(a.peak_to_peak_est_corrected_db);
        j["aggregates"].push_back(std::move(o));
    }
    return j.dump(2);
}

void write_result_files(const ResultTable &table, const ExperimentConfig &cfg, const std::string &directory)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec)
        fail(ErrorCode::io_error, "cannot create output directory " + directory + ": " + ec.message());
    auto write = [&](const std::string &name, const std::string &text) {
        const auto path = (fs::path(directory) / name).string();
        std::ofstream os(path, std::ios::binary);
        os << text;
        if (!os)
            fail(ErrorCode::io_error, "failed writing " + path);
    };

    std::vector<std::string> outputs = {"results.csv", "results.json", "manifest.json"};
    write("results.csv", table.to_csv());
    write("results.json", table.to_json());
    if (table.kind == ExperimentKind::scatter)
    {
        write("scatter_points.csv", table.eigen_pairs_csv());
        outputs.push_back("scatter_points.csv");
    }

    using nlohmann::ordered_json;
    ordered_json m;
    m["tool"] = "mdgsim";
    m["version"] = MDG_VERSION;
    m["kind"] = to_string(cfg.kind);
    m["config"] = ordered_json::parse(config_to_json(cfg));
    ordered_json seeds;
    seeds["base"] = cfg.seed;
    seeds["derivation"] = "splitmix64: channel = derive(base, 1, trial); frame = derive(derive(base, 2, grid_index), trial); "
                          "noise = derive(derive(base, 3, grid_index), trial); voa reference noise = "
                          "derive(derive(base, 4, point), trial)";
    ordered_json channel = ordered_json::array();
    for (int t = 0; t < cfg.trials; ++t)
        channel.push_back(channel_seed(cfg.seed, t));
    seeds["channel"] = channel;
    m["seeds"] = seeds;
    if (cfg.kind == ExperimentKind::voa)
    {
        ordered_json sched = ordered_json::array();
        for (const auto &p : voa_case_schedule(cfg.voa.case_id, cfg.voa.baseline_launch_db, cfg.voa.coupling_kappa,
                                               cfg.voa.sweep_span_db, cfg.voa.steps, cfg.voa.initial_attenuation_db))
            sched.push_back({{"ratio_db", p.ratio_db},
                             {"attenuations_db", p.config.attenuations_db},
                             {"power_constraint_met", p.power_constraint_met}});
        m["voa_schedule"] = sched;
    }
    m["rows"] = {{"trial", table.records.size()}, {"aggregate", table.aggregates.size()}};
    m["outputs"] = outputs;
    write("manifest.json", m.dump(2));
}

} // namespace mdg
