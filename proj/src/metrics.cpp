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

#include "mdg/metrics.hpp"

#include "mdg/channel.hpp"
#include "mdg/error.hpp"

#include "json.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace mdg
{

Snr Snr::from_linear(double ratio)
{
    require(ratio > 0.0 && !std::isnan(ratio), "SNR must be positive");
    if (std::isinf(ratio))
        return infinite();
    return Snr(ratio, 10.0 * std::log10(ratio));
}

Snr Snr::from_db(double db)
{
    require(!std::isnan(db), "SNR in dB must not be NaN");
    if (std::isinf(db))
    {
        require(db > 0.0, "SNR of -inf dB is not allowed");
        return infinite();
    }
    return Snr(std::pow(10.0, db / 10.0), db);
}

double Snr::linear() const
{
    require(!is_infinite(), "SNR is infinite; no linear value");
    return *linear_;
}

double Snr::db() const
{
    return is_infinite() ? std::numeric_limits<double>::infinity() : db_;
}

const char *to_string(EstimateSource s)
{
    switch (s)
    {
    case EstimateSource::analytic_h:
        return "analytic-H";
    case EstimateSource::analytic_w:
        return "analytic-W";
    case EstimateSource::equalizer_taps:
        return "equalizer-taps";
    }
    return "unknown";
}

std::string MdgReport::to_json() const
{
    nlohmann::ordered_json j;
    j["sigma_mdg_db"] = sigma_mdg_db;
    j["peak_to_peak_db"] = peak_to_peak_db;
    j["corrected"] = corrected;
    if (snr_used)
        j["snr_used_db"] = snr_used->is_infinite() ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(snr_used->db());
    else
        j["snr_used_db"] = nullptr;
    j["source"] = to_string(source);
    j["n_bins"] = n_bins;
    j["flagged_bins"] = flagged_bins;
    return j.dump(2);
}

CMatrix mmse_transfer(const CMatrix &h, const Snr &snr)
{
    require(h.rows() == h.cols() && h.rows() > 0, "mmse_transfer: H must be square");
    if (snr.is_infinite())
        return regularized_inverse(h);
    const auto d = h.rows();
    const CMatrix a = CMatrix::Identity(d, d) / snr.linear() + h.adjoint() * h;
    return a.llt().solve(h.adjoint());
}

double observed_spectrum_analytic(double lambda2, const Snr &snr)
{
    require(lambda2 > 0.0, "observed_spectrum_analytic: lambda2 must be positive");
    if (snr.is_infinite())
        return lambda2;
    const double s = snr.linear();
    return 1.0 / (lambda2 * s * s) + 2.0 / s + lambda2;
}

double correct_spectrum(double lambda2_mmse, const Snr &snr)
{
    require(!snr.is_infinite(), "correct_spectrum: SNR must be finite");
    require(lambda2_mmse > 0.0, "correct_spectrum: eigenvalue must be positive");
    const double s = snr.linear();
    const double b = s * s * lambda2_mmse - 2.0 * s;
    // (b - 2S)(b + 2S) keeps precision near the double root
    const double disc = s * (s * lambda2_mmse - 4.0) * (b + 2.0 * s);
    if (disc < 0.0 || b < 0.0)
        return 1.0 / s;
    return (b + std::sqrt(disc)) / (2.0 * s * s);
}

RVector channel_spectrum(const CMatrix &h)
{
    return hermitian_spectrum(h * h.adjoint()).eigenvalues;
}

ObservedSpectrum observed_spectrum_from_equalizer(const CMatrix &w)
{
    require(w.rows() == w.cols() && w.rows() > 0, "observed_spectrum_from_equalizer: W must be square");
    const InverseResult inv = regularized_inverse_ex(w);
    return {channel_spectrum(inv.inverse), inv.regularized};
}

EigenSpectrum channel_eigen_spectrum(const ChannelRealization &ch)
{
    EigenSpectrum s;
    s.per_bin.reserve(ch.n_bins());
    for (const auto &h : ch.matrices())
        s.per_bin.push_back(channel_spectrum(h));
    return s;
}

namespace
{

void check_spectrum(const EigenSpectrum &spec)
{
    require(!spec.per_bin.empty(), "empty eigen spectrum");
    const auto n = spec.per_bin.front().size();
    require(n > 0, "empty eigen spectrum");
    for (const auto &v : spec.per_bin)
    {
        require(v.size() == n, "eigen spectrum bins differ in length");
        for (Eigen::Index i = 0; i < v.size(); ++i)
            require(v(i) > 0.0 && std::isfinite(v(i)), "eigen spectrum has a nonpositive eigenvalue");
    }
}

} // namespace

double sigma_mdg(const EigenSpectrum &spec)
{
    check_spectrum(spec);
    double acc = 0.0;
    for (const auto &v : spec.per_bin)
    {
        const RVector db = v.array().log10() * 10.0;
        const double mean = db.mean();
        const double var = (db.array() - mean).square().mean();
        acc += std::sqrt(var);
    }
    return acc / static_cast<double>(spec.per_bin.size());
}

double peak_to_peak(const EigenSpectrum &spec)
{
    check_spectrum(spec);
    double acc = 0.0;
    for (const auto &v : spec.per_bin)
        acc += 10.0 * std::log10(v.maxCoeff() / v.minCoeff());
    return acc / static_cast<double>(spec.per_bin.size());
}

double osnr_to_snr(double osnr_db, double symbol_time_ps)
{
    require(symbol_time_ps > 0.0, "osnr_to_snr: symbol time must be positive");
    // ps * GHz = 1e-3
    return osnr_db + 10.0 * std::log10(symbol_time_ps * 12.5 * 1e-3);
}

double estimation_error(double sigma_ref_db, double sigma_nl_db)
{
    return sigma_ref_db - sigma_nl_db;
}

namespace
{

std::vector<std::size_t> resolve_bins(const ChannelRealization &ch, const std::vector<std::size_t> &bins)
{
    if (!bins.empty())
    {
        for (auto b : bins)
            require(b < ch.n_bins(), "bin index out of range");
        return bins;
    }
    std::vector<std::size_t> all(ch.n_bins());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
}

} // namespace

MdgReport analytic_estimate(const ChannelRealization &ch, const Snr &snr, bool corrected,
                            const std::vector<std::size_t> &bins)
{
    require(!corrected || !snr.is_infinite(), "correction requires a finite SNR");
    EigenSpectrum spec;
    MdgReport r;
    for (auto b : resolve_bins(ch, bins))
    {
        const CMatrix w = mmse_transfer(ch.at(b), snr);
        ObservedSpectrum obs = observed_spectrum_from_equalizer(w);
        if (obs.regularized)
            ++r.flagged_bins;
        if (corrected)
            for (Eigen::Index i = 0; i < obs.eigenvalues.size(); ++i)
                obs.eigenvalues(i) = correct_spectrum(obs.eigenvalues(i), snr);
        spec.per_bin.push_back(std::move(obs.eigenvalues));
    }
    r.sigma_mdg_db = sigma_mdg(spec);
    r.peak_to_peak_db = peak_to_peak(spec);
    r.corrected = corrected;
    r.snr_used = snr;
    r.source = EstimateSource::analytic_w;
    r.n_bins = static_cast<int>(spec.per_bin.size());
    return r;
}

MdgReport channel_report(const ChannelRealization &ch, const std::vector<std::size_t> &bins)
{
    EigenSpectrum spec;
    for (auto b : resolve_bins(ch, bins))
        spec.per_bin.push_back(channel_spectrum(ch.at(b)));
    MdgReport r;
    r.sigma_mdg_db = sigma_mdg(spec);
    r.peak_to_peak_db = peak_to_peak(spec);
    r.source = EstimateSource::analytic_h;
    r.n_bins = static_cast<int>(spec.per_bin.size());
    return r;
}

} // namespace mdg
