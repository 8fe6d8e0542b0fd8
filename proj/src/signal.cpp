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

#include "mdg/signal.hpp"

#include "fft.hpp"
#include "mdg/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mdg
{

using std::numbers::pi;

void SignalConfig::validate() const
{
    require(symbols_per_stream >= 1, "signal.symbols_per_stream must be >= 1");
    require(symbol_rate_gbd > 0.0 && std::isfinite(symbol_rate_gbd), "signal.symbol_rate_gbd must be positive");
    require(rolloff > 0.0 && rolloff <= 1.0, "signal.rolloff must be in (0, 1]");
    require(tx_oversampling >= 1 && rx_oversampling >= 1, "signal oversampling factors must be >= 1");
    require(tx_oversampling % rx_oversampling == 0, "signal.tx_oversampling must be divisible by rx_oversampling");
    require(rrc_span >= 1, "signal.rrc_span must be >= 1");
}

void EqConfig::validate() const
{
    require(taps_per_filter >= 1, "equalizer.taps_per_filter must be >= 1");
    require(step_size > 0.0 && std::isfinite(step_size), "equalizer.step_size must be positive");
    require(epochs >= 1, "equalizer.epochs must be >= 1");
    require(step_decay > 0.0 && step_decay <= 1.0, "equalizer.step_decay must be in (0, 1]");
    require(mse_window >= 1, "equalizer.mse_window must be >= 1");
    require(supervised, "equalizer.supervised must be true; decision-directed adaptation is not provided");
}

int Waveform::samples_per_symbol() const
{
    return static_cast<int>(std::lround(sample_rate_gsa / symbol_rate_gbd));
}

EqualizerState EqualizerState::identity(int dim, int taps_per_filter, double sample_rate_gsa,
                                        double symbol_rate_gbd, double rolloff)
{
    require(dim >= 1 && taps_per_filter >= 1, "EqualizerState::identity: invalid dimensions");
    EqualizerState s;
    s.n_outputs = dim;
    s.n_inputs = dim;
    s.taps_per_filter = taps_per_filter;
    s.taps.assign(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim) *
                      static_cast<std::size_t>(taps_per_filter),
                  cdouble{});
    for (int i = 0; i < dim; ++i)
        s.tap(i, i, s.center()) = 1.0;
    s.sample_rate_gsa = sample_rate_gsa;
    s.symbol_rate_gbd = symbol_rate_gbd;
    s.rolloff = rolloff;
    return s;
}

// --- 16-QAM -----------------------------------------------------------------

namespace
{

constexpr double gray_level[4] = {-3.0, -1.0, 3.0, 1.0}; // bits 00, 01, 10, 11

unsigned level_bits(double level)
{
    for (unsigned b = 0; b < 4; ++b)
        if (gray_level[b] == level)
            return b;
    fail(ErrorCode::invalid_argument, "not a 16-QAM level");
}

double nearest_level(double x)
{
    if (x < -2.0)
        return -3.0;
    if (x < 0.0)
        return -1.0;
    if (x < 2.0)
        return 1.0;
    return 3.0;
}

} // namespace

cdouble qam16_point(unsigned symbol_index)
{
    require(symbol_index < 16, "16-QAM symbol index out of range");
    return {gray_level[symbol_index & 3u], gray_level[(symbol_index >> 2) & 3u]};
}

unsigned qam16_index(cdouble point)
{
    return level_bits(point.real()) | (level_bits(point.imag()) << 2);
}

cdouble qam16_decide(cdouble sample, double scale)
{
    const cdouble u = sample / scale;
    return cdouble(nearest_level(u.real()), nearest_level(u.imag())) * scale;
}

SymbolFrame generate_frame(const SignalConfig &cfg, int n_streams, Seed seed)
{
    cfg.validate();
    require(n_streams >= 1, "generate_frame: n_streams must be >= 1");
    SymbolFrame f;
    f.seed = seed;
    const auto n = static_cast<std::size_t>(cfg.symbols_per_stream);
    for (int s = 0; s < n_streams; ++s)
    {
        Engine rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
        std::uniform_int_distribution<unsigned> pick(0, 15);
        Stream st(n);
        double power = 0.0;
        for (auto &x : st)
        {
            x = qam16_point(pick(rng));
            power += std::norm(x);
        }
        const double scale = 1.0 / std::sqrt(power / static_cast<double>(n));
        for (auto &x : st)
            x *= scale;
        f.streams.push_back(std::move(st));
        f.scale.push_back(scale);
    }
    return f;
}

// --- pulse shaping -------------------------------------------------------------

std::vector<double> rrc_taps(int samples_per_symbol, int span_symbols, double rolloff)
{
    require(samples_per_symbol >= 1 && span_symbols >= 1, "rrc_taps: invalid length");
    require(rolloff > 0.0 && rolloff <= 1.0, "rrc_taps: rolloff must be in (0, 1]");
    const int half = span_symbols * samples_per_symbol / 2;
    std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
    const double b = rolloff;
    for (int n = -half; n <= half; ++n)
    {
        const double t = static_cast<double>(n) / samples_per_symbol;
        double v;
        if (n == 0)
            v = 1.0 - b + 4.0 * b / pi;
        else if (std::abs(std::abs(4.0 * b * t) - 1.0) < 1e-12)
            v = b / std::sqrt(2.0) *
                ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
        else
            v = (std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b))) /
                (pi * t * (1.0 - 16.0 * b * b * t * t));
        h[static_cast<std::size_t>(n + half)] = v;
    }
    double energy = 0.0;
    for (double v : h)
        energy += v * v;
    const double norm = 1.0 / std::sqrt(energy);
    for (double &v : h)
        v *= norm;
    return h;
}

namespace
{

// DFT of the zero-phase filter wrapped onto a cyclic block of length n.
std::vector<cdouble> cyclic_response(const std::vector<double> &taps, std::size_t n)
{
    std::vector<cdouble> buf(n);
    const long half = static_cast<long>(taps.size() / 2);
    const long ln = static_cast<long>(n);
    for (long k = -half; k <= half; ++k)
    {
        const long idx = ((k % ln) + ln) % ln;
        buf[static_cast<std::size_t>(idx)] += taps[static_cast<std::size_t>(k + half)];
    }
    detail::fft_inplace(buf, false);
    return buf;
}

void ifft_scaled(Stream &s)
{
    detail::fft_inplace(s, true);
    const double inv = 1.0 / static_cast<double>(s.size());
    for (auto &x : s)
        x *= inv;
}

void require_equal_lengths(const std::vector<Stream> &streams, const char *what)
{
    require(!streams.empty(), std::string(what) + ": no streams");
    for (const auto &s : streams)
        require(s.size() == streams.front().size(), std::string(what) + ": streams differ in length");
}

} // namespace

Waveform modulate(const SymbolFrame &frame, const SignalConfig &cfg)
{
    cfg.validate();
    require_equal_lengths(frame.streams, "modulate");
    const std::size_t n_sym = frame.streams.front().size();
    const auto os = static_cast<std::size_t>(cfg.tx_oversampling);
    const std::size_t n = n_sym * os;
    const auto shaping = cyclic_response(rrc_taps(cfg.tx_oversampling, cfg.rrc_span, cfg.rolloff), n);

    Waveform wf;
    wf.sample_rate_gsa = cfg.symbol_rate_gbd * cfg.tx_oversampling;
    wf.symbol_rate_gbd = cfg.symbol_rate_gbd;
    for (const auto &sym : frame.streams)
    {
        // The spectrum of the zero-stuffed sequence is the symbol spectrum repeated os times.
        Stream s = sym;
        detail::fft_inplace(s, false);
        Stream out(n);
        for (std::size_t q = 0; q < n; ++q)
            out[q] = s[q % n_sym] * shaping[q];
        ifft_scaled(out);
        wf.streams.push_back(std::move(out));
    }
    return wf;
}

Waveform receive_filter(const Waveform &wf, const SignalConfig &cfg)
{
    cfg.validate();
    require_equal_lengths(wf.streams, "receive_filter");
    require(wf.samples_per_symbol() == cfg.tx_oversampling, "receive_filter: waveform must be at tx_oversampling");
    const std::size_t n = wf.streams.front().size();
    const auto factor = static_cast<std::size_t>(cfg.tx_oversampling / cfg.rx_oversampling);
    require(n % factor == 0, "receive_filter: length not divisible by the decimation factor");
    const std::size_t m = n / factor;
    const auto matched = cyclic_response(rrc_taps(cfg.tx_oversampling, cfg.rrc_span, cfg.rolloff), n);

    Waveform out;
    out.sample_rate_gsa = wf.sample_rate_gsa / static_cast<double>(factor);
    out.symbol_rate_gbd = wf.symbol_rate_gbd;
    for (const auto &s : wf.streams)
    {
        Stream buf = s;
        detail::fft_inplace(buf, false);
        // Decimation in time folds the spectrum onto m bins.
        Stream folded(m);
        for (std::size_t q = 0; q < n; ++q)
            folded[q % m] += buf[q] * matched[q];
        detail::fft_inplace(folded, true);
        const double inv = 1.0 / static_cast<double>(n);
        for (auto &x : folded)
            x *= inv;
        out.streams.push_back(std::move(folded));
    }
    return out;
}

// --- channel + noise -------------------------------------------------------------

Waveform propagate(const Waveform &wf, const ChannelRealization &ch)
{
    require_equal_lengths(wf.streams, "propagate");
    require(wf.n_streams() == ch.dim(), "propagate: waveform stream count must equal channel dimension");
    const std::size_t n = wf.streams.front().size();
    const int d = ch.dim();

    std::vector<Stream> spec = wf.streams;
    for (auto &s : spec)
        detail::fft_inplace(s, false);

    const double df = wf.sample_rate_gsa / static_cast<double>(n);
    CVector x(d), y(d);
    for (std::size_t q = 0; q < n; ++q)
    {
        const double f = (q < (n + 1) / 2 ? static_cast<double>(q) : static_cast<double>(q) - static_cast<double>(n)) * df;
        const CMatrix &h = ch.at(ch.nearest_bin(f));
        for (int i = 0; i < d; ++i)
            x(i) = spec[static_cast<std::size_t>(i)][q];
        y.noalias() = h * x;
        for (int i = 0; i < d; ++i)
            spec[static_cast<std::size_t>(i)][q] = y(i);
    }
    Waveform out;
    out.sample_rate_gsa = wf.sample_rate_gsa;
    out.symbol_rate_gbd = wf.symbol_rate_gbd;
    for (auto &s : spec)
    {
        ifft_scaled(s);
        out.streams.push_back(std::move(s));
    }
    return out;
}

double mean_power(const Waveform &wf)
{
    require_equal_lengths(wf.streams, "mean_power");
    double acc = 0.0;
    for (const auto &s : wf.streams)
        for (const auto &x : s)
            acc += std::norm(x);
    return acc / (static_cast<double>(wf.n_streams()) * static_cast<double>(wf.length()));
}

Waveform load_awgn(const Waveform &wf, const Snr &snr, Seed seed, std::optional<double> reference_power)
{
    require_equal_lengths(wf.streams, "load_awgn");
    if (snr.is_infinite())
        return wf;
    require(wf.symbol_rate_gbd > 0.0 && wf.sample_rate_gsa > 0.0, "load_awgn: waveform rates must be set");
    const double p = reference_power ? *reference_power : mean_power(wf);
    require(p > 0.0, "load_awgn: signal power must be positive");
    // Noise inside Rs is variance * Rs / fs.
    const double variance = p * (wf.sample_rate_gsa / wf.symbol_rate_gbd) / snr.linear();

    Waveform out = wf;
    for (std::size_t s = 0; s < out.streams.size(); ++s)
    {
        Engine rng(derive_seed(seed, s));
        for (auto &x : out.streams[s])
            x += complex_normal(rng, variance);
    }
    return out;
}

// --- equalization ------------------------------------------------------------------

namespace
{

// Cyclically padded copies of the input streams so every tap window is a
// contiguous slice: padded[j] = x[(j - pad) mod n].
struct PaddedInputs
{
    std::vector<std::vector<double>> re, im;
    std::size_t pad = 0;

    PaddedInputs(const Waveform &rx, std::size_t pad_) : pad(pad_)
    {
        const std::size_t n = static_cast<std::size_t>(rx.length());
        for (const auto &s : rx.streams)
        {
            std::vector<double> r(n + 2 * pad), i(n + 2 * pad);
            for (std::size_t j = 0; j < r.size(); ++j)
            {
                const std::size_t src = (j + n * (pad / n + 1) - pad) % n;
                r[j] = s[src].real();
                i[j] = s[src].imag();
            }
            re.push_back(std::move(r));
            im.push_back(std::move(i));
        }
    }
};

// Reversed tap layout: rev[(o * n_in + i) * L + m] = w[o][i][L - 1 - m], so
// that output symbol k is a dot product with the slice starting at
// sample 2k + center - (L - 1).
struct ReversedTaps
{
    int n_out, n_in, len;
    std::vector<double> re, im;

    explicit ReversedTaps(const EqualizerState &s)
        : n_out(s.n_outputs), n_in(s.n_inputs), len(s.taps_per_filter),
          re(s.taps.size()), im(s.taps.size())
    {
        for (int o = 0; o < n_out; ++o)
            for (int i = 0; i < n_in; ++i)
                for (int m = 0; m < len; ++m)
                {
                    const auto &t = s.tap(o, i, len - 1 - m);
                    re[at(o, i, m)] = t.real();
                    im[at(o, i, m)] = t.imag();
                }
    }

    std::size_t at(int o, int i, int m) const
    {
        return (static_cast<std::size_t>(o) * static_cast<std::size_t>(n_in) + static_cast<std::size_t>(i)) *
                   static_cast<std::size_t>(len) +
               static_cast<std::size_t>(m);
    }

    void store(EqualizerState &s) const
    {
        for (int o = 0; o < n_out; ++o)
            for (int i = 0; i < n_in; ++i)
                for (int m = 0; m < len; ++m)
                    s.tap(o, i, len - 1 - m) = {re[at(o, i, m)], im[at(o, i, m)]};
    }
};

void check_equalizer_inputs(const Waveform &rx, int n_inputs)
{
    require_equal_lengths(rx.streams, "equalizer");
    require(rx.samples_per_symbol() == 2, "equalizer input must be at 2 samples per symbol");
    require(rx.n_streams() == n_inputs, "equalizer input stream count mismatch");
    require(rx.length() % 2 == 0, "equalizer input length must be even");
}

// y_o for symbol k; `base` indexes the padded buffers.
inline void filter_outputs(const ReversedTaps &w, const PaddedInputs &x, std::size_t base, double *yr, double *yi)
{
    const auto len = static_cast<std::size_t>(w.len);
    for (int o = 0; o < w.n_out; ++o)
    {
        double ar = 0.0, ai = 0.0;
        for (int i = 0; i < w.n_in; ++i)
        {
            const double *wr = &w.re[w.at(o, i, 0)];
            const double *wi = &w.im[w.at(o, i, 0)];
            const double *xr = &x.re[static_cast<std::size_t>(i)][base];
            const double *xi = &x.im[static_cast<std::size_t>(i)][base];
            for (std::size_t m = 0; m < len; ++m)
            {
                ar += wr[m] * xr[m] - wi[m] * xi[m];
                ai += wr[m] * xi[m] + wi[m] * xr[m];
            }
        }
        yr[o] = ar;
        yi[o] = ai;
    }
}

} // namespace

std::pair<EqualizerState, SymbolFrame> lms_equalize(const Waveform &rx, const SymbolFrame &reference,
                                                     const EqConfig &cfg, double rolloff)
{
    cfg.validate();
    require_equal_lengths(reference.streams, "lms_equalize reference");
    const int n_in = rx.n_streams();
    const int n_out = reference.n_streams();
    require(n_out == n_in, "lms_equalize: reference and input stream counts differ");
    check_equalizer_inputs(rx, n_in);
    const long n_sym = reference.length();
    require(rx.length() == 2 * n_sym, "lms_equalize: input must hold 2 samples per reference symbol");

    EqualizerState state =
        EqualizerState::identity(n_in, cfg.taps_per_filter, rx.sample_rate_gsa, rx.symbol_rate_gbd, rolloff);
    const int len = cfg.taps_per_filter;
    const auto pad = static_cast<std::size_t>(len);
    const PaddedInputs x(rx, pad);
    ReversedTaps w(state);

    std::vector<double> yr(static_cast<std::size_t>(n_out)), yi(static_cast<std::size_t>(n_out));
    std::vector<double> er(static_cast<std::size_t>(n_out)), ei(static_cast<std::size_t>(n_out));
    double mu = cfg.step_size;
    double window_acc = 0.0;
    long window_count = 0;
    double initial_mse = -1.0;
    std::size_t last_epoch_begin = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch)
    {
        last_epoch_begin = state.mse_trace.size();
        for (long k = 0; k < n_sym; ++k)
        {
            const std::size_t base =
                static_cast<std::size_t>(2 * k + state.center()) + pad - static_cast<std::size_t>(len - 1);
            filter_outputs(w, x, base, yr.data(), yi.data());
            double err2 = 0.0;
            for (int o = 0; o < n_out; ++o)
            {
                const cdouble d = reference.streams[static_cast<std::size_t>(o)][static_cast<std::size_t>(k)];
                er[static_cast<std::size_t>(o)] = d.real() - yr[static_cast<std::size_t>(o)];
                ei[static_cast<std::size_t>(o)] = d.imag() - yi[static_cast<std::size_t>(o)];
                err2 += er[static_cast<std::size_t>(o)] * er[static_cast<std::size_t>(o)] +
                        ei[static_cast<std::size_t>(o)] * ei[static_cast<std::size_t>(o)];
            }
            // w += mu e conj(x)
            for (int o = 0; o < n_out; ++o)
            {
                const double gr = mu * er[static_cast<std::size_t>(o)];
                const double gi = mu * ei[static_cast<std::size_t>(o)];
                for (int i = 0; i < n_in; ++i)
                {
                    double *wr = &w.re[w.at(o, i, 0)];
                    double *wi = &w.im[w.at(o, i, 0)];
                    const double *xr = &x.re[static_cast<std::size_t>(i)][base];
                    const double *xi = &x.im[static_cast<std::size_t>(i)][base];
                    for (int m = 0; m < len; ++m)
                    {
                        wr[m] += gr * xr[m] + gi * xi[m];
                        wi[m] += gi * xr[m] - gr * xi[m];
                    }
                }
            }

            window_acc += err2 / n_out;
            if (++window_count == cfg.mse_window)
            {
                const double mse = window_acc / static_cast<double>(window_count);
                state.mse_trace.push_back(mse);
                window_acc = 0.0;
                window_count = 0;
                if (initial_mse < 0.0)
                    initial_mse = mse;
                if (!std::isfinite(mse) || mse > 10.0 * std::max(initial_mse, 1e-12))
                {
                    std::ostringstream msg;
                    msg << "LMS diverged: windowed MSE " << mse << " vs initial " << initial_mse << " at epoch "
                        << epoch << ", symbol " << k << " (step " << mu << ")";
                    fail(ErrorCode::convergence_failure, msg.str());
                }
            }
        }
        mu *= cfg.step_decay;
    }
    if (window_count > 0)
    {
        state.mse_trace.push_back(window_acc / static_cast<double>(window_count));
    }

    // Plateau test over the last epoch: the final quarter is no worse than
    // 10% above the third quarter.
    const std::size_t n_last = state.mse_trace.size() - last_epoch_begin;
    if (n_last >= 4)
    {
        auto mean_of = [&](std::size_t a, std::size_t b) {
            double s = 0.0;
            for (std::size_t i = a; i < b; ++i)
                s += state.mse_trace[i];
            return s / static_cast<double>(b - a);
        };
        const std::size_t q = n_last / 4;
        const double third = mean_of(last_epoch_begin + 2 * q, last_epoch_begin + 3 * q);
        const double fourth = mean_of(last_epoch_begin + 3 * q, state.mse_trace.size());
        state.converged = fourth <= 1.1 * third;
    }
    else
    {
        state.converged = !state.mse_trace.empty() && state.mse_trace.back() <= state.mse_trace.front();
    }

    w.store(state);
    SymbolFrame out = apply_equalizer(state, rx);
    out.scale = reference.scale;
    out.seed = reference.seed;
    return {std::move(state), std::move(out)};
}

SymbolFrame apply_equalizer(const EqualizerState &state, const Waveform &rx)
{
    check_equalizer_inputs(rx, state.n_inputs);
    const long n_sym = rx.length() / 2;
    const int len = state.taps_per_filter;
    const auto pad = static_cast<std::size_t>(len);
    const PaddedInputs x(rx, pad);
    const ReversedTaps w(state);

    SymbolFrame out;
    out.streams.assign(static_cast<std::size_t>(state.n_outputs), Stream(static_cast<std::size_t>(n_sym)));
    out.scale.assign(static_cast<std::size_t>(state.n_outputs), 1.0);
    std::vector<double> yr(static_cast<std::size_t>(state.n_outputs)), yi(static_cast<std::size_t>(state.n_outputs));
    for (long k = 0; k < n_sym; ++k)
    {
        const std::size_t base = static_cast<std::size_t>(2 * k + state.center()) + pad - static_cast<std::size_t>(len - 1);
        filter_outputs(w, x, base, yr.data(), yi.data());
        for (int o = 0; o < state.n_outputs; ++o)
            out.streams[static_cast<std::size_t>(o)][static_cast<std::size_t>(k)] = {yr[static_cast<std::size_t>(o)],
                                                                                     yi[static_cast<std::size_t>(o)]};
    }
    return out;
}

std::vector<double> transfer_frequencies(const EqualizerState &state, int n_points)
{
    require(n_points >= 1, "n_points must be >= 1");
    require(state.sample_rate_gsa > 0.0, "equalizer sample rate must be positive");
    std::vector<double> f(static_cast<std::size_t>(n_points));
    const double fs = state.sample_rate_gsa;
    for (int p = 0; p < n_points; ++p)
        f[static_cast<std::size_t>(p)] = -0.5 * fs + (p + 0.5) * fs / n_points;
    return f;
}

std::vector<CMatrix> taps_to_transfer(const EqualizerState &state, int n_points)
{
    const auto freqs = transfer_frequencies(state, n_points);
    const int c = state.center();
    std::vector<CMatrix> out;
    out.reserve(freqs.size());
    for (double f : freqs)
    {
        const double phase_step = -2.0 * pi * f / state.sample_rate_gsa;
        CMatrix w = CMatrix::Zero(state.n_outputs, state.n_inputs);
        for (int k = 0; k < state.taps_per_filter; ++k)
        {
            const cdouble e = std::polar(1.0, phase_step * (k - c));
            for (int o = 0; o < state.n_outputs; ++o)
                for (int i = 0; i < state.n_inputs; ++i)
                    w(o, i) += state.tap(o, i, k) * e;
        }
        out.push_back(std::move(w));
    }
    return out;
}

MdgReport estimate_from_taps(const EqualizerState &state, const std::optional<Snr> &snr, bool corrected,
                             int n_points)
{
    require(state.n_outputs == state.n_inputs && state.n_inputs > 0, "estimate_from_taps: square equalizer required");
    require(!corrected || (snr && !snr->is_infinite()), "estimate_from_taps: correction requires a finite SNR");
    require(state.symbol_rate_gbd > 0.0, "estimate_from_taps: symbol rate must be set");
    const auto freqs = transfer_frequencies(state, n_points);
    const auto w = taps_to_transfer(state, n_points);
    const double edge = 0.5 * (1.0 + state.rolloff) * state.symbol_rate_gbd;

    EigenSpectrum spec;
    MdgReport r;
    for (std::size_t p = 0; p < freqs.size(); ++p)
    {
        if (std::abs(freqs[p]) > edge)
            continue;
        ObservedSpectrum obs = observed_spectrum_from_equalizer(w[p]);
        if (obs.regularized)
            ++r.flagged_bins;
        if (corrected)
            for (Eigen::Index i = 0; i < obs.eigenvalues.size(); ++i)
                obs.eigenvalues(i) = correct_spectrum(obs.eigenvalues(i), *snr);
        spec.per_bin.push_back(std::move(obs.eigenvalues));
    }
    require(!spec.per_bin.empty(), "estimate_from_taps: no grid point inside the signal band");
    r.sigma_mdg_db = sigma_mdg(spec);
    r.peak_to_peak_db = peak_to_peak(spec);
    r.corrected = corrected;
    r.snr_used = snr;
    r.source = EstimateSource::equalizer_taps;
    r.n_bins = static_cast<int>(spec.per_bin.size());
    return r;
}

// --- tap dump ------------------------------------------------------------------
//
// Little-endian container:
//   char[8] "MDGTAPS1"
//   u32     n_outputs, n_inputs, taps_per_filter, flags (bit 0: converged)
//   f64     sample_rate_gsa, symbol_rate_gbd, rolloff
//   taps    n_outputs x n_inputs x taps_per_filter complex (f64 re, f64 im),
//           output-major then input then tap; tap taps_per_filter/2 is zero delay
//   u32     mse_trace length, followed by that many f64

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace
{

constexpr char taps_magic[8] = {'M', 'D', 'G', 'T', 'A', 'P', 'S', '1'};

template <typename T>
void put(std::ostream &os, T v)
{
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T get(std::istream &is)
{
    T v{};
    is.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!is)
        fail(ErrorCode::parse_error, "tap dump truncated");
    return v;
}

} // namespace

void write_taps(std::ostream &os, const EqualizerState &s)
{
    os.write(taps_magic, sizeof(taps_magic));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.n_outputs));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.n_inputs));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.taps_per_filter));
    put<std::uint32_t>(os, s.converged ? 1u : 0u);
    put<double>(os, s.sample_rate_gsa);
    put<double>(os, s.symbol_rate_gbd);
    put<double>(os, s.rolloff);
    for (const auto &t : s.taps)
    {
        put<double>(os, t.real());
        put<double>(os, t.imag());
    }
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.mse_trace.size()));
    for (double v : s.mse_trace)
        put<double>(os, v);
    if (!os)
        fail(ErrorCode::io_error, "failed writing tap dump");
}

EqualizerState read_taps(std::istream &is)
{
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, taps_magic, sizeof(magic)) != 0)
        fail(ErrorCode::parse_error, "not a tap dump (bad magic)");
    EqualizerState s;
    s.n_outputs = static_cast<int>(get<std::uint32_t>(is));
    s.n_inputs = static_cast<int>(get<std::uint32_t>(is));
    s.taps_per_filter = static_cast<int>(get<std::uint32_t>(is));
    const auto flags = get<std::uint32_t>(is);
    s.converged = (flags & 1u) != 0;
    s.sample_rate_gsa = get<double>(is);
    s.symbol_rate_gbd = get<double>(is);
    s.rolloff = get<double>(is);
    if (s.n_outputs <= 0 || s.n_inputs <= 0 || s.taps_per_filter <= 0 || s.n_outputs > 1024 || s.n_inputs > 1024 ||
        s.taps_per_filter > 1 << 20)
        fail(ErrorCode::parse_error, "tap dump has invalid dimensions");
    if (!(s.sample_rate_gsa > 0.0) || !(s.symbol_rate_gbd > 0.0) || !(s.rolloff > 0.0 && s.rolloff <= 1.0))
        fail(ErrorCode::parse_error, "tap dump has invalid rates");
    s.taps.resize(static_cast<std::size_t>(s.n_outputs) * static_cast<std::size_t>(s.n_inputs) *
                  static_cast<std::size_t>(s.taps_per_filter));
    for (auto &t : s.taps)
    {
        const double re = get<double>(is);
        const double im = get<double>(is);
        t = {re, im};
    }
    const auto n_trace = get<std::uint32_t>(is);
    s.mse_trace.resize(n_trace);
    for (auto &v : s.mse_trace)
        v = get<double>(is);
    return s;
}

void save_taps(const std::string &path, const EqualizerState &state)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        fail(ErrorCode::io_error, "cannot open " + path + " for writing");
    write_taps(os, state);
}

EqualizerState load_taps(const std::string &path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        fail(ErrorCode::io_error, "cannot open " + path);
    return read_taps(is);
}

} // namespace mdg
