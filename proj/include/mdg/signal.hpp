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

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mdg/channel.hpp"
#include "mdg/linops.hpp"
#include "mdg/metrics.hpp"
#include "mdg/random.hpp"

namespace mdg
{

using Stream = std::vector<cdouble>;

struct SignalConfig
{
    long symbols_per_stream = 100000;
    double symbol_rate_gbd = 30.0;
    double rolloff = 0.01;
    int tx_oversampling = 8;
    int rx_oversampling = 2;
    int rrc_span = 256; // symbols

    double symbol_time_ps() const { return 1000.0 / symbol_rate_gbd; }
    void validate() const;
};

/// 2 N_m symbol streams of Gray-mapped 16-QAM, each scaled to unit mean power.
struct SymbolFrame
{
    std::vector<Stream> streams;
    std::vector<double> scale; // per-stream multiplier applied to the unit-grid alphabet
    Seed seed = 0;

    int n_streams() const { return static_cast<int>(streams.size()); }
    long length() const { return streams.empty() ? 0 : static_cast<long>(streams.front().size()); }
};

struct Waveform
{
    std::vector<Stream> streams;
    double sample_rate_gsa = 0.0;
    double symbol_rate_gbd = 0.0;

    int n_streams() const { return static_cast<int>(streams.size()); }
    long length() const { return streams.empty() ? 0 : static_cast<long>(streams.front().size()); }
    int samples_per_symbol() const;
};

struct EqConfig
{
    int taps_per_filter = 100;
    double step_size = 5e-4;
    int epochs = 1;
    double step_decay = 1.0;     // step multiplier applied after each epoch
    int mse_window = 1000;       // symbols per mse_trace entry
    bool supervised = true;

    void validate() const;
};

/// T/2-spaced MIMO FIR equalizer. Taps are stored [output][input][tap] and
/// the tap at index taps_per_filter / 2 is the zero-delay reference.
struct EqualizerState
{
    int n_outputs = 0;
    int n_inputs = 0;
    int taps_per_filter = 0;
    std::vector<cdouble> taps;
    double sample_rate_gsa = 0.0;
    double symbol_rate_gbd = 0.0;
    double rolloff = 0.0;
    std::vector<double> mse_trace;
    bool converged = false;

    int center() const { return taps_per_filter / 2; }
    cdouble &tap(int out, int in, int k) { return taps[index(out, in, k)]; }
    const cdouble &tap(int out, int in, int k) const { return taps[index(out, in, k)]; }

    static EqualizerState identity(int dim, int taps_per_filter, double sample_rate_gsa, double symbol_rate_gbd,
                                   double rolloff);

private:
    std::size_t index(int out, int in, int k) const
    {
        return (static_cast<std::size_t>(out) * static_cast<std::size_t>(n_inputs) + static_cast<std::size_t>(in)) *
                   static_cast<std::size_t>(taps_per_filter) +
               static_cast<std::size_t>(k);
    }
};

// --- 16-QAM -----------------------------------------------------------------

/// Gray-mapped 16-QAM on the {-3,-1,1,3}^2 grid, unnormalized. Bits 0-1
/// select the in-phase level, bits 2-3 the quadrature level.
cdouble qam16_point(unsigned symbol_index);
unsigned qam16_index(cdouble point);
/// Nearest alphabet point for a stream normalized by `scale`.
cdouble qam16_decide(cdouble sample, double scale);

SymbolFrame generate_frame(const SignalConfig &cfg, int n_streams, Seed seed);

// --- pulse shaping -----------------------------------------------------------

/// Unit-energy root-raised-cosine taps, 2 * (span * sps / 2) + 1 long,
/// centered on the middle tap.
std::vector<double> rrc_taps(int samples_per_symbol, int span_symbols, double rolloff);

Waveform modulate(const SymbolFrame &frame, const SignalConfig &cfg);

/// Matched RRC filtering followed by decimation to cfg.rx_oversampling.
Waveform receive_filter(const Waveform &wf, const SignalConfig &cfg);

// --- channel + noise ---------------------------------------------------------

/// Block frequency-domain channel: each simulation frequency uses the matrix
/// of the nearest channel bin. The frame is treated as one cyclic block.
Waveform propagate(const Waveform &wf, const ChannelRealization &ch);

/// Circular Gaussian noise of equal variance on every stream. The noise
/// density is set so that signal power over the noise power inside one
/// symbol-rate bandwidth equals `snr`. Signal power is measured from `wf`
/// unless `reference_power` (mean per-sample power per stream) is given.
Waveform load_awgn(const Waveform &wf, const Snr &snr, Seed seed, std::optional<double> reference_power = std::nullopt);

/// Mean per-sample power over all streams.
double mean_power(const Waveform &wf);

// --- equalization --------------------------------------------------------------

/// Supervised LMS. `rx` must be at 2 samples per symbol with sample 2k
/// aligned to reference symbol k. Returns the adapted state and the
/// equalized symbols of a final pass with frozen taps.
std::pair<EqualizerState, SymbolFrame> lms_equalize(const Waveform &rx, const SymbolFrame &reference,
                                                     const EqConfig &cfg, double rolloff = 0.01);

/// Equalized outputs with fixed taps.
SymbolFrame apply_equalizer(const EqualizerState &state, const Waveform &rx);

/// Uniform grid over the equalizer's Nyquist band [-fs/2, fs/2), GHz.
std::vector<double> transfer_frequencies(const EqualizerState &state, int n_points);

/// W(f) per grid point, W_oi(f) = sum_k w_oi[k] exp(-j 2 pi f (k - center) T_samp).
std::vector<CMatrix> taps_to_transfer(const EqualizerState &state, int n_points);

/// MDL/MDG from W^-1 over the signal band |f| <= (1 + rolloff) / 2 * Rs.
MdgReport estimate_from_taps(const EqualizerState &state, const std::optional<Snr> &snr, bool corrected,
                             int n_points = 256);

// --- tap dump ------------------------------------------------------------------

void write_taps(std::ostream &os, const EqualizerState &state);
EqualizerState read_taps(std::istream &is);
void save_taps(const std::string &path, const EqualizerState &state);
EqualizerState load_taps(const std::string &path);

} // namespace mdg
