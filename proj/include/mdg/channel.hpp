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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mdg/linops.hpp"
#include "mdg/random.hpp"

namespace mdg
{

/// Strong-coupling multisection link. One section per span; each section
/// is V^H, a diagonal of modal group delays, U and a diagonal of modal gains.
struct LinkConfig
{
    int spatial_modes = 6;                  // N_m; matrix dimension is 2 N_m
    int spans = 100;                        // K
    double span_length_km = 50.0;
    double gd_coeff_ps_per_sqrt_km = 3.1;
    double sigma_g_db = 0.0;                // per-section MDG standard deviation
    int n_bins = 1000;                      // N_f
    double bandwidth_ghz = 240.0;           // B
    Seed seed = 1;

    int dim() const { return 2 * spatial_modes; }
    double section_gd_std_ps() const;
    void validate() const;
};

struct SectionRealization
{
    CMatrix input_coupling;  // V
    CMatrix output_coupling; // U
    RVector group_delays_ps; // tau, zero mean
    RVector log_gains_db;    // g, zero mean
};

/// Frequency-resolved channel H(f) on a uniform grid centered at 0 GHz.
/// Immutable once constructed.
class ChannelRealization
{
public:
    ChannelRealization(double bandwidth_ghz, std::vector<CMatrix> matrices,
                       std::optional<LinkConfig> link = std::nullopt);

    int dim() const { return static_cast<int>(matrices_.front().rows()); }
    std::size_t n_bins() const { return matrices_.size(); }
    double bandwidth_ghz() const { return bandwidth_ghz_; }
    double bin_spacing_ghz() const { return bandwidth_ghz_ / static_cast<double>(matrices_.size()); }
    const std::vector<double> &frequencies_ghz() const { return frequencies_; }
    const std::vector<CMatrix> &matrices() const { return matrices_; }
    const CMatrix &at(std::size_t bin) const { return matrices_.at(bin); }
    const std::optional<LinkConfig> &link() const { return link_; }

    /// Index of the bin whose center is nearest to f (clamped to the grid).
    std::size_t nearest_bin(double f_ghz) const;

    /// Same grid, every matrix multiplied by `factor`.
    ChannelRealization scaled(double factor) const;

private:
    double bandwidth_ghz_;
    std::vector<double> frequencies_;
    std::vector<CMatrix> matrices_;
    std::optional<LinkConfig> link_;
};

/// Bin centers: -B/2 + (i + 1/2) B / n.
std::vector<double> frequency_grid(int n_bins, double bandwidth_ghz);

SectionRealization sample_section(const LinkConfig &config, int section_index, Seed seed);

ChannelRealization build_channel(const LinkConfig &config);

/// H(f) of the multisection link at arbitrary frequencies (GHz). Uses the
/// same section draws as build_channel for the same config.
std::vector<CMatrix> channel_response(const LinkConfig &config, const std::vector<double> &frequencies_ghz);

/// Mean over bins and modes of 10 log10(lambda^2) of H H^H, in dB.
double mean_log_gain_db(const ChannelRealization &ch);

/// Mean over bins of tr(H H^H) / dim, linear.
double mean_power_gain(const ChannelRealization &ch);

/// Scales the channel so mean_log_gain_db is 0 dB.
ChannelRealization normalize_channel(const ChannelRealization &ch);

// --- weak-coupling VOA emulation -------------------------------------------

/// Per-mode attenuation state of the VOA emulation. Mode order for the
/// three-mode lantern is LP01, LP11a, LP11b.
struct VoaSweepConfig
{
    int case_id = 4;
    std::vector<double> attenuations_db{5.0, 5.0, 5.0};
    std::vector<double> baseline_launch_db{0.0, 0.0, 0.0}; // launch power offsets at 0 dB attenuation
    double coupling_kappa = 0.0;
    double total_power_db = 0.0; // relative launch power held across the sweep

    void validate() const;
};

/// H = U_out A U_in, frequency flat (a single bin).
ChannelRealization voa_channel(const VoaSweepConfig &cfg, Seed seed);

struct VoaPoint
{
    double ratio_db = 0.0; // max attenuation - min attenuation
    VoaSweepConfig config;
    bool power_constraint_met = true;
};

/// Attenuation schedule of one emulation case. The swept modes move from
/// their start value by 0..sweep_span_db in `steps` equal increments; the
/// compensating mode is solved so total launch power stays at its starting
/// value (clamped at 0 dB attenuation when that is impossible).
std::vector<VoaPoint> voa_case_schedule(int case_id, const std::vector<double> &baseline_launch_db,
                                        double coupling_kappa, double sweep_span_db = 12.0,
                                        int steps = 13, double initial_attenuation_db = 5.0);

// --- serialization ----------------------------------------------------------

void write_channel(std::ostream &os, const ChannelRealization &ch);
ChannelRealization read_channel(std::istream &is);
void save_channel(const std::string &path, const ChannelRealization &ch);
ChannelRealization load_channel(const std::string &path);

} // namespace mdg
