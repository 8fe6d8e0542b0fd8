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

#include "mdg/channel.hpp"

#include "mdg/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

namespace mdg
{

namespace
{

// Zero-mean Gaussian vector whose expected population std after mean
// removal equals `std_dev`.
RVector zero_mean_normal(int dim, double std_dev, Seed seed)
{
    RVector v = RVector::Zero(dim);
    if (dim < 2 || std_dev == 0.0)
        return v;
    Engine rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double inflate = std::sqrt(static_cast<double>(dim) / (dim - 1));
    for (int i = 0; i < dim; ++i)
        v(i) = normal(rng) * std_dev * inflate;
    v.array() -= v.mean();
    return v;
}

RVector hh_eigenvalues(const CMatrix &h)
{
    return hermitian_spectrum(h * h.adjoint()).eigenvalues;
}

} // namespace

double LinkConfig::section_gd_std_ps() const
{
    return gd_coeff_ps_per_sqrt_km * std::sqrt(span_length_km);
}

void LinkConfig::validate() const
{
    require(spatial_modes >= 1, "link.spatial_modes must be >= 1");
    require(spans >= 1, "link.spans must be >= 1");
    require(span_length_km > 0.0 && std::isfinite(span_length_km), "link.span_length_km must be positive");
    require(gd_coeff_ps_per_sqrt_km >= 0.0 && std::isfinite(gd_coeff_ps_per_sqrt_km),
            "link.gd_coeff_ps_per_sqrt_km must be >= 0");
    require(sigma_g_db >= 0.0 && std::isfinite(sigma_g_db), "link.sigma_g_db must be >= 0");
    require(n_bins >= 1, "link.n_bins must be >= 1");
    require(bandwidth_ghz > 0.0 && std::isfinite(bandwidth_ghz), "link.bandwidth_ghz must be positive");
}

std::vector<double> frequency_grid(int n_bins, double bandwidth_ghz)
{
    require(n_bins >= 1, "frequency_grid: n_bins must be >= 1");
    std::vector<double> f(static_cast<std::size_t>(n_bins));
    const double df = bandwidth_ghz / n_bins;
    for (int i = 0; i < n_bins; ++i)
        f[static_cast<std::size_t>(i)] = -0.5 * bandwidth_ghz + (i + 0.5) * df;
    return f;
}

ChannelRealization::ChannelRealization(double bandwidth_ghz, std::vector<CMatrix> matrices,
                                       std::optional<LinkConfig> link)
    : bandwidth_ghz_(bandwidth_ghz), matrices_(std::move(matrices)), link_(std::move(link))
{
    require(!matrices_.empty(), "ChannelRealization: at least one bin required");
    require(bandwidth_ghz_ > 0.0, "ChannelRealization: bandwidth must be positive");
    const auto d = matrices_.front().rows();
    require(d > 0, "ChannelRealization: empty matrix");
    for (const auto &m : matrices_)
        require(m.rows() == d && m.cols() == d, "ChannelRealization: all bins must share one square dimension");
    frequencies_ = frequency_grid(static_cast<int>(matrices_.size()), bandwidth_ghz_);
}

std::size_t ChannelRealization::nearest_bin(double f_ghz) const
{
    const double pos = (f_ghz - frequencies_.front()) / bin_spacing_ghz();
    const double idx = std::round(pos);
    if (idx <= 0.0)
        return 0;
    const auto last = matrices_.size() - 1;
    if (idx >= static_cast<double>(last))
        return last;
    return static_cast<std::size_t>(idx);
}

ChannelRealization ChannelRealization::scaled(double factor) const
{
    std::vector<CMatrix> m = matrices_;
    for (auto &x : m)
        x *= factor;
    return ChannelRealization(bandwidth_ghz_, std::move(m), link_);
}

SectionRealization sample_section(const LinkConfig &config, int section_index, Seed seed)
{
    config.validate();
    require(section_index >= 0 && section_index < config.spans, "sample_section: section_index out of range");
    const int d = config.dim();
    const auto k = static_cast<std::uint64_t>(section_index);
    SectionRealization s;
    s.input_coupling = haar_unitary(d, derive_seed(seed, k, 1));
    s.output_coupling = haar_unitary(d, derive_seed(seed, k, 2));
    s.group_delays_ps = zero_mean_normal(d, config.section_gd_std_ps(), derive_seed(seed, k, 3));
    s.log_gains_db = zero_mean_normal(d, config.sigma_g_db, derive_seed(seed, k, 4));
    return s;
}

std::vector<CMatrix> channel_response(const LinkConfig &config, const std::vector<double> &frequencies_ghz)
{
    config.validate();
    const int d = config.dim();

    // Per section: H <- (G U) D(w) (V^H H)
    std::vector<CMatrix> left(static_cast<std::size_t>(config.spans));
    std::vector<CMatrix> right(static_cast<std::size_t>(config.spans));
    std::vector<RVector> delays(static_cast<std::size_t>(config.spans));
    for (int k = 0; k < config.spans; ++k)
    {
        const SectionRealization s = sample_section(config, k, config.seed);
        RVector amp(d);
        for (int i = 0; i < d; ++i)
            amp(i) = std::pow(10.0, s.log_gains_db(i) / 20.0);
        const auto ku = static_cast<std::size_t>(k);
        left[ku] = amp.cast<cdouble>().asDiagonal() * s.output_coupling;
        right[ku] = s.input_coupling.adjoint();
        delays[ku] = s.group_delays_ps;
    }

    std::vector<CMatrix> out;
    out.reserve(frequencies_ghz.size());
    CMatrix tmp(d, d);
    for (double f : frequencies_ghz)
    {
        // GHz * ps = 1e-3 cycles
        const double omega = 2.0 * std::numbers::pi * f * 1e-3;
        CMatrix h = CMatrix::Identity(d, d);
        for (std::size_t k = 0; k < left.size(); ++k)
        {
            tmp.noalias() = right[k] * h;
            for (int i = 0; i < d; ++i)
                tmp.row(i) *= std::polar(1.0, -omega * delays[k](i));
            h.noalias() = left[k] * tmp;
        }
        out.push_back(std::move(h));
    }
    return out;
}

ChannelRealization build_channel(const LinkConfig &config)
{
    config.validate();
    auto grid = frequency_grid(config.n_bins, config.bandwidth_ghz);
    return ChannelRealization(config.bandwidth_ghz, channel_response(config, grid), config);
}

double mean_log_gain_db(const ChannelRealization &ch)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto &h : ch.matrices())
    {
        const RVector ev = hh_eigenvalues(h);
        for (Eigen::Index i = 0; i < ev.size(); ++i)
        {
            if (!(ev(i) > 0.0))
                fail(ErrorCode::invalid_argument, "channel has a singular bin; log gain undefined");
            sum += 10.0 * std::log10(ev(i));
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

double mean_power_gain(const ChannelRealization &ch)
{
    double sum = 0.0;
    for (const auto &h : ch.matrices())
        sum += h.squaredNorm() / static_cast<double>(h.rows());
    return sum / static_cast<double>(ch.n_bins());
}

ChannelRealization normalize_channel(const ChannelRealization &ch)
{
    bool all_zero = true;
    for (const auto &h : ch.matrices())
        if (h.cwiseAbs().maxCoeff() > 0.0)
            all_zero = false;
    require(!all_zero, "normalize_channel: all-zero channel");
    const double m = mean_log_gain_db(ch);
    return ch.scaled(std::pow(10.0, -m / 20.0));
}

// --- VOA -------------------------------------------------------------------

void VoaSweepConfig::validate() const
{
    require(case_id >= 1 && case_id <= 4, "voa.case must be one of 1, 2, 3, 4");
    require(!attenuations_db.empty(), "voa.attenuations_db must be non-empty");
    require(baseline_launch_db.size() == attenuations_db.size(),
            "voa.baseline_launch_db must have one entry per spatial mode");
    for (double a : attenuations_db)
        require(a >= 0.0 && std::isfinite(a), "voa attenuations must be finite and >= 0 dB");
    require(coupling_kappa >= 0.0 && std::isfinite(coupling_kappa), "voa.coupling_kappa must be >= 0");
}

ChannelRealization voa_channel(const VoaSweepConfig &cfg, Seed seed)
{
    cfg.validate();
    const int modes = static_cast<int>(cfg.attenuations_db.size());
    const int d = 2 * modes;
    CVector a(d);
    for (int m = 0; m < modes; ++m)
    {
        const auto mu = static_cast<std::size_t>(m);
        const double amp = std::pow(10.0, (cfg.baseline_launch_db[mu] - cfg.attenuations_db[mu]) / 20.0);
        a(2 * m) = amp;
        a(2 * m + 1) = amp;
    }
    const CMatrix u_in = weak_coupling_unitary(d, cfg.coupling_kappa, derive_seed(seed, 1));
    const CMatrix u_out = weak_coupling_unitary(d, cfg.coupling_kappa, derive_seed(seed, 2));
    std::vector<CMatrix> m{u_out * a.asDiagonal() * u_in};
    return ChannelRealization(1.0, std::move(m));
}

namespace
{

double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }

struct CaseRule
{
    int compensating;          // mode index solved for constant power
    std::vector<int> swept;    // modes attenuated along the sweep
    std::vector<double> start; // starting attenuation of each mode
};

CaseRule case_rule(int case_id, double a0)
{
    // LP01 = 0, LP11a = 1, LP11b = 2
    switch (case_id)
    {
    case 1:
        return {0, {2}, {a0, a0, a0}};
    case 2:
        return {2, {0}, {a0, a0, a0}};
    case 3:
        return {0, {1, 2}, {a0, a0, a0 + 1.0}};
    case 4:
        return {0, {1, 2}, {a0, a0, a0}};
    default:
        fail(ErrorCode::invalid_argument, "voa case must be one of 1, 2, 3, 4");
    }
}

} // namespace

std::vector<VoaPoint> voa_case_schedule(int case_id, const std::vector<double> &baseline_launch_db,
                                        double coupling_kappa, double sweep_span_db, int steps,
                                        double initial_attenuation_db)
{
    require(baseline_launch_db.size() == 3, "voa schedule: the emulation cases are defined for 3 spatial modes");
    require(steps >= 1, "voa schedule: steps must be >= 1");
    require(sweep_span_db >= 0.0, "voa schedule: sweep span must be >= 0");
    require(initial_attenuation_db >= 0.0, "voa schedule: initial attenuation must be >= 0");
    const CaseRule rule = case_rule(case_id, initial_attenuation_db);

    double total = 0.0;
    for (std::size_t m = 0; m < 3; ++m)
        total += db_to_lin(baseline_launch_db[m] - rule.start[m]);
    const double total_db = 10.0 * std::log10(total);

    std::vector<VoaPoint> out;
    for (int s = 0; s < steps; ++s)
    {
        const double x = steps == 1 ? 0.0 : sweep_span_db * s / (steps - 1);
        std::vector<double> att = rule.start;
        for (int m : rule.swept)
            att[static_cast<std::size_t>(m)] += x;

        const auto c = static_cast<std::size_t>(rule.compensating);
        double others = 0.0;
        for (std::size_t m = 0; m < 3; ++m)
            if (m != c)
                others += db_to_lin(baseline_launch_db[m] - att[m]);
        const double remaining = total - others;

        VoaPoint p;
        if (remaining > 0.0)
            att[c] = baseline_launch_db[c] - 10.0 * std::log10(remaining);
        if (remaining <= 0.0 || att[c] < 0.0)
        {
            att[c] = 0.0;
            p.power_constraint_met = false;
        }
        p.config.case_id = case_id;
        p.config.attenuations_db = att;
        p.config.baseline_launch_db = baseline_launch_db;
        p.config.coupling_kappa = coupling_kappa;
        p.config.total_power_db = total_db;
        const auto [lo, hi] = std::minmax_element(att.begin(), att.end());
        p.ratio_db = *hi - *lo;
        out.push_back(std::move(p));
    }
    return out;
}

// --- serialization ----------------------------------------------------------
//
// Little-endian container:
//   char[8]  "MDGCHAN1"
//   u32      dim, n_bins, has_link
//   f64      bandwidth_ghz
//   if has_link: i32 spatial_modes, spans, n_bins; f64 span_length_km,
//                gd_coeff_ps_per_sqrt_km, sigma_g_db, bandwidth_ghz; u64 seed
//   n_bins x dim x dim complex entries, row-major per bin, (f64 re, f64 im)

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace
{

constexpr char channel_magic[8] = {'M', 'D', 'G', 'C', 'H', 'A', 'N', '1'};

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
        fail(ErrorCode::parse_error, "channel container truncated");
    return v;
}

} // namespace

void write_channel(std::ostream &os, const ChannelRealization &ch)
{
    os.write(channel_magic, sizeof(channel_magic));
    const auto d = static_cast<std::uint32_t>(ch.dim());
    put<std::uint32_t>(os, d);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ch.n_bins()));
    put<std::uint32_t>(os, ch.link() ? 1u : 0u);
    put<double>(os, ch.bandwidth_ghz());
    if (const auto &l = ch.link())
    {
        put<std::int32_t>(os, l->spatial_modes);
        put<std::int32_t>(os, l->spans);
        put<std::int32_t>(os, l->n_bins);
        put<double>(os, l->span_length_km);
        put<double>(os, l->gd_coeff_ps_per_sqrt_km);
        put<double>(os, l->sigma_g_db);
        put<double>(os, l->bandwidth_ghz);
        put<std::uint64_t>(os, l->seed);
    }
    for (const auto &h : ch.matrices())
        for (std::uint32_t r = 0; r < d; ++r)
            for (std::uint32_t c = 0; c < d; ++c)
            {
                put<double>(os, h(r, c).real());
                put<double>(os, h(r, c).imag());
            }
    if (!os)
        fail(ErrorCode::io_error, "failed writing channel");
}

ChannelRealization read_channel(std::istream &is)
{
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, channel_magic, sizeof(magic)) != 0)
        fail(ErrorCode::parse_error, "not a channel container (bad magic)");
    const auto d = get<std::uint32_t>(is);
    const auto n = get<std::uint32_t>(is);
    const auto has_link = get<std::uint32_t>(is);
    const auto bw = get<double>(is);
    if (d == 0 || n == 0 || d > 4096 || n > (1u << 24))
        fail(ErrorCode::parse_error, "channel container has invalid dimensions");

    std::optional<LinkConfig> link;
    if (has_link)
    {
        LinkConfig l;
        l.spatial_modes = get<std::int32_t>(is);
        l.spans = get<std::int32_t>(is);
        l.n_bins = get<std::int32_t>(is);
        l.span_length_km = get<double>(is);
        l.gd_coeff_ps_per_sqrt_km = get<double>(is);
        l.sigma_g_db = get<double>(is);
        l.bandwidth_ghz = get<double>(is);
        l.seed = get<std::uint64_t>(is);
        link = l;
    }
    std::vector<CMatrix> m(n, CMatrix(d, d));
    for (auto &h : m)
        for (std::uint32_t r = 0; r < d; ++r)
            for (std::uint32_t c = 0; c < d; ++c)
            {
                const double re = get<double>(is);
                const double im = get<double>(is);
                h(r, c) = {re, im};
            }
    return ChannelRealization(bw, std::move(m), link);
}

void save_channel(const std::string &path, const ChannelRealization &ch)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        fail(ErrorCode::io_error, "cannot open " + path + " for writing");
    write_channel(os, ch);
}

ChannelRealization load_channel(const std::string &path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        fail(ErrorCode::io_error, "cannot open " + path);
    return read_channel(is);
}

} // namespace mdg
