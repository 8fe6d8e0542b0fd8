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

#include <optional>
#include <string>
#include <vector>

#include "mdg/linops.hpp"

namespace mdg
{

class ChannelRealization;

/// Electrical SNR before the equalizer, as a linear power ratio. The
/// infinite sentinel stands for a noiseless receiver.
class Snr
{
public:
    static Snr from_linear(double ratio);
    static Snr from_db(double db);
    static Snr infinite() { return Snr(); }

    bool is_infinite() const { return !linear_.has_value(); }
    double linear() const; // throws on the infinite sentinel
    double db() const;     // +inf for the sentinel
    double noise_variance() const { return is_infinite() ? 0.0 : 1.0 / *linear_; }

    bool operator==(const Snr &) const = default;

private:
    Snr() = default;
    Snr(double ratio, double db) : linear_(ratio), db_(db) {}
    std::optional<double> linear_;
    double db_ = 0.0; // as given, so configs echo exactly
};

/// Per-bin eigenvalues (linear power gains, descending).
struct EigenSpectrum
{
    std::vector<RVector> per_bin;
};

enum class EstimateSource
{
    analytic_h,
    analytic_w,
    equalizer_taps,
};

const char *to_string(EstimateSource s);

struct MdgReport
{
    double sigma_mdg_db = 0.0;
    double peak_to_peak_db = 0.0;
    bool corrected = false;
    std::optional<Snr> snr_used;
    EstimateSource source = EstimateSource::analytic_h;
    int n_bins = 0;
    int flagged_bins = 0; // bins that needed a regularized inverse

    std::string to_json() const;
};

/// W = (I/SNR + H^H H)^-1 H^H. At infinite SNR, the (regularized) inverse of H.
CMatrix mmse_transfer(const CMatrix &h, const Snr &snr);

/// Eigenvalue seen through an MMSE equalizer: 1/(lambda2 SNR^2) + 2/SNR + lambda2.
double observed_spectrum_analytic(double lambda2, const Snr &snr);

/// Larger root of the quadratic that inverts observed_spectrum_analytic.
/// Inputs below the 4/SNR floor clamp to the double root 1/SNR.
double correct_spectrum(double lambda2_mmse, const Snr &snr);

/// Descending eigenvalues of H H^H.
RVector channel_spectrum(const CMatrix &h);

struct ObservedSpectrum
{
    RVector eigenvalues; // descending eigenvalues of W^-1 (W^-1)^H
    bool regularized = false;
};

ObservedSpectrum observed_spectrum_from_equalizer(const CMatrix &w);

EigenSpectrum channel_eigen_spectrum(const ChannelRealization &ch);

/// Mean across bins of the population std of 10 log10(lambda^2) across modes.
double sigma_mdg(const EigenSpectrum &spec);

/// Mean across bins of 10 log10(max / min).
double peak_to_peak(const EigenSpectrum &spec);

/// SNR_dB = OSNR_dB + 10 log10(T_s * 12.5 GHz).
double osnr_to_snr(double osnr_db, double symbol_time_ps);

/// Signed error in dB: reference minus noise-loaded estimate.
double estimation_error(double sigma_ref_db, double sigma_nl_db);

/// Analytic estimate from the channel itself: through W = mmse_transfer(H)
/// per bin, optionally corrected. `bins` restricts the evaluation; empty
/// means every bin.
MdgReport analytic_estimate(const ChannelRealization &ch, const Snr &snr, bool corrected,
                            const std::vector<std::size_t> &bins = {});

/// sigma_mdg / peak-to-peak of H H^H over `bins` (empty = all).
MdgReport channel_report(const ChannelRealization &ch, const std::vector<std::size_t> &bins = {});

} // namespace mdg
