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

#include "mdg/config.hpp"

#include "mdg/error.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace mdg
{

using nlohmann::json;

namespace
{

std::string join(const std::string &path, const std::string &key)
{
    return path.empty() ? key : path + "." + key;
}

[[noreturn]] void schema_error(const std::string &path, const std::string &what)
{
    fail(ErrorCode::invalid_argument, "config field '" + path + "': " + what);
}

void check_keys(const json &obj, const std::string &path, const std::set<std::string> &allowed)
{
    if (!obj.is_object())
        schema_error(path.empty() ? "<root>" : path, "expected an object");
    for (const auto &[key, value] : obj.items())
        if (!allowed.contains(key))
            schema_error(join(path, key), "unknown field");
}

double read_number(const json &v, const std::string &path)
{
    if (!v.is_number())
        schema_error(path, "expected a number");
    return v.get<double>();
}

long read_integer(const json &v, const std::string &path)
{
    if (!v.is_number_integer())
        schema_error(path, "expected an integer");
    return v.get<long>();
}

int read_int(const json &v, const std::string &path)
{
    const long x = read_integer(v, path);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        schema_error(path, "integer out of range");
    return static_cast<int>(x);
}

bool read_bool(const json &v, const std::string &path)
{
    if (!v.is_boolean())
        schema_error(path, "expected true or false");
    return v.get<bool>();
}

std::string read_string(const json &v, const std::string &path)
{
    if (!v.is_string())
        schema_error(path, "expected a string");
    return v.get<std::string>();
}

/// A dB value; the strings "inf" / "infinity" stand for +infinity.
double read_db(const json &v, const std::string &path)
{
    if (v.is_string())
    {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "infinity" || s == "Infinity")
            return std::numeric_limits<double>::infinity();
        schema_error(path, "expected a number or \"inf\"");
    }
    return read_number(v, path);
}

std::vector<double> read_number_list(const json &v, const std::string &path)
{
    if (!v.is_array())
        schema_error(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(read_number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

template <typename F>
void with(const json &obj, const std::string &path, const char *key, F &&f)
{
    if (auto it = obj.find(key); it != obj.end())
        f(*it, join(path, key));
}

nlohmann::ordered_json db_value(double db)
{
    if (std::isinf(db))
        return "inf";
    return db;
}

void read_link(const json &j, LinkConfig &link)
{
    const std::string p = "link";
    check_keys(j, p,
               {"spatial_modes", "spans", "span_length_km", "gd_coeff_ps_per_sqrt_km", "n_bins", "bandwidth_ghz"});
    with(j, p, "spatial_modes", [&](const json &v, const std::string &q) { link.spatial_modes = read_int(v, q); });
    with(j, p, "spans", [&](const json &v, const std::string &q) { link.spans = read_int(v, q); });
    with(j, p, "span_length_km", [&](const json &v, const std::string &q) { link.span_length_km = read_number(v, q); });
    with(j, p, "gd_coeff_ps_per_sqrt_km",
         [&](const json &v, const std::string &q) { link.gd_coeff_ps_per_sqrt_km = read_number(v, q); });
    with(j, p, "n_bins", [&](const json &v, const std::string &q) { link.n_bins = read_int(v, q); });
    with(j, p, "bandwidth_ghz", [&](const json &v, const std::string &q) { link.bandwidth_ghz = read_number(v, q); });
}

void read_grid(const json &j, ExperimentConfig &cfg)
{
    const std::string p = "grid";
    check_keys(j, p, {"sigma_g_db", "sigma_mdg_target_db", "snr_db"});
    if (j.contains("sigma_g_db") || j.contains("sigma_mdg_target_db"))
    {
        cfg.sigma_g_db.clear();
        cfg.sigma_mdg_target_db.clear();
    }
    with(j, p, "sigma_g_db", [&](const json &v, const std::string &q) { cfg.sigma_g_db = read_number_list(v, q); });
    with(j, p, "sigma_mdg_target_db",
         [&](const json &v, const std::string &q) { cfg.sigma_mdg_target_db = read_number_list(v, q); });
    with(j, p, "snr_db", [&](const json &v, const std::string &q) {
        if (!v.is_array() || v.empty())
            schema_error(q, "expected a nonempty array of dB values");
        cfg.snr.clear();
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            const std::string qi = q + "[" + std::to_string(i) + "]";
            const double db = read_db(v[i], qi);
            if (db == -std::numeric_limits<double>::infinity())
                schema_error(qi, "SNR must be finite or +inf");
            cfg.snr.push_back(Snr::from_db(db));
        }
    });
}

void read_signal(const json &j, SignalConfig &s)
{
    const std::string p = "signal";
    check_keys(j, p,
               {"symbols_per_stream", "symbol_rate_gbd", "rolloff", "tx_oversampling", "rx_oversampling", "rrc_span"});
    with(j, p, "symbols_per_stream", [&](const json &v, const std::string &q) { s.symbols_per_stream = read_integer(v, q); });
    with(j, p, "symbol_rate_gbd", [&](const json &v, const std::string &q) { s.symbol_rate_gbd = read_number(v, q); });
    with(j, p, "rolloff", [&](const json &v, const std::string &q) { s.rolloff = read_number(v, q); });
    with(j, p, "tx_oversampling", [&](const json &v, const std::string &q) { s.tx_oversampling = read_int(v, q); });
    with(j, p, "rx_oversampling", [&](const json &v, const std::string &q) { s.rx_oversampling = read_int(v, q); });
    with(j, p, "rrc_span", [&](const json &v, const std::string &q) { s.rrc_span = read_int(v, q); });
}

void read_equalizer(const json &j, ExperimentConfig &cfg)
{
    const std::string p = "equalizer";
    check_keys(j, p,
               {"taps_per_filter", "step_size", "epochs", "step_decay", "mse_window", "supervised", "transfer_points"});
    EqConfig &e = cfg.equalizer;
    with(j, p, "taps_per_filter", [&](const json &v, const std::string &q) { e.taps_per_filter = read_int(v, q); });
    with(j, p, "step_size", [&](const json &v, const std::string &q) { e.step_size = read_number(v, q); });
    with(j, p, "epochs", [&](const json &v, const std::string &q) { e.epochs = read_int(v, q); });
    with(j, p, "step_decay", [&](const json &v, const std::string &q) { e.step_decay = read_number(v, q); });
    with(j, p, "mse_window", [&](const json &v, const std::string &q) { e.mse_window = read_int(v, q); });
    with(j, p, "supervised", [&](const json &v, const std::string &q) { e.supervised = read_bool(v, q); });
    with(j, p, "transfer_points", [&](const json &v, const std::string &q) { cfg.transfer_points = read_int(v, q); });
}

void read_voa(const json &j, VoaExperiment &voa)
{
    const std::string p = "voa";
    check_keys(j, p,
               {"case", "baseline_launch_db", "coupling_kappa", "sweep_span_db", "steps", "initial_attenuation_db",
                "intrinsic_snr_db", "signal_chain"});
    with(j, p, "case", [&](const json &v, const std::string &q) { voa.case_id = read_int(v, q); });
    with(j, p, "baseline_launch_db",
         [&](const json &v, const std::string &q) { voa.baseline_launch_db = read_number_list(v, q); });
    with(j, p, "coupling_kappa", [&](const json &v, const std::string &q) { voa.coupling_kappa = read_number(v, q); });
    with(j, p, "sweep_span_db", [&](const json &v, const std::string &q) { voa.sweep_span_db = read_number(v, q); });
    with(j, p, "steps", [&](const json &v, const std::string &q) { voa.steps = read_int(v, q); });
    with(j, p, "initial_attenuation_db",
         [&](const json &v, const std::string &q) { voa.initial_attenuation_db = read_number(v, q); });
    with(j, p, "intrinsic_snr_db", [&](const json &v, const std::string &q) { voa.intrinsic_snr_db = read_db(v, q); });
    with(j, p, "signal_chain", [&](const json &v, const std::string &q) { voa.signal_chain = read_bool(v, q); });
}

} // namespace

ExperimentConfig config_from_json(const std::string &text, std::optional<ExperimentKind> expected)
{
    json j;
    try
    {
        j = json::parse(text);
    }
    catch (const json::parse_error &e)
    {
        fail(ErrorCode::parse_error, std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "",
               {"kind", "preset", "seed", "trials", "correction", "parallelism", "link", "grid", "signal", "equalizer",
                "voa"});
    ExperimentKind kind{};
    if (j.contains("kind"))
    {
        try
        {
            kind = parse_experiment_kind(read_string(j["kind"], "kind"));
        }
        catch (const Error &)
        {
            schema_error("kind", "must be one of scatter, surface, sweep, voa");
        }
        if (expected && *expected != kind)
            schema_error("kind", std::string("config is a '") + to_string(kind) + "' experiment, not '" +
                                     to_string(*expected) + "'");
    }
    else if (expected)
        kind = *expected;
    else
        schema_error("kind", "required field missing");

    std::string preset = "desk";
    if (j.contains("preset"))
    {
        preset = read_string(j["preset"], "preset");
        if (preset != "desk" && preset != "full")
            schema_error("preset", "must be desk or full");
    }
    ExperimentConfig cfg = ExperimentConfig::preset(preset, kind);

    with(j, "", "seed", [&](const json &v, const std::string &q) {
        if (!v.is_number_unsigned())
            schema_error(q, "expected a nonnegative integer");
        cfg.seed = v.get<Seed>();
    });
    with(j, "", "trials", [&](const json &v, const std::string &q) { cfg.trials = read_int(v, q); });
    with(j, "", "parallelism", [&](const json &v, const std::string &q) { cfg.parallelism = read_int(v, q); });
    with(j, "", "correction", [&](const json &v, const std::string &q) {
        try
        {
            cfg.correction = parse_correction(read_string(v, q));
        }
        catch (const Error &)
        {
            schema_error(q, "must be off, on or both");
        }
    });
    with(j, "", "link", [&](const json &v, const std::string &) { read_link(v, cfg.link); });
    with(j, "", "grid", [&](const json &v, const std::string &) { read_grid(v, cfg); });
    with(j, "", "signal", [&](const json &v, const std::string &) { read_signal(v, cfg.signal); });
    with(j, "", "equalizer", [&](const json &v, const std::string &) { read_equalizer(v, cfg); });
    with(j, "", "voa", [&](const json &v, const std::string &) { read_voa(v, cfg.voa); });

    try
    {
        cfg.validate();
    }
    catch (const Error &e)
    {
        fail(ErrorCode::invalid_argument, std::string("config invalid: ") + e.what());
    }
    return cfg;
}

std::string config_to_json(const ExperimentConfig &cfg)
{
    nlohmann::ordered_json j;
    j["kind"] = to_string(cfg.kind);
    j["seed"] = cfg.seed;
    j["trials"] = cfg.trials;
    j["correction"] = to_string(cfg.correction);
    j["parallelism"] = cfg.parallelism;
    j["link"] = {{"spatial_modes", cfg.link.spatial_modes},
                 {"spans", cfg.link.spans},
                 {"span_length_km", cfg.link.span_length_km},
                 {"gd_coeff_ps_per_sqrt_km", cfg.link.gd_coeff_ps_per_sqrt_km},
                 {"n_bins", cfg.link.n_bins},
                 {"bandwidth_ghz", cfg.link.bandwidth_ghz}};
    nlohmann::ordered_json grid;
    if (!cfg.sigma_g_db.empty())
        grid["sigma_g_db"] = cfg.sigma_g_db;
    if (!cfg.sigma_mdg_target_db.empty())
        grid["sigma_mdg_target_db"] = cfg.sigma_mdg_target_db;
    grid["snr_db"] = nlohmann::ordered_json::array();
    for (const auto &s : cfg.snr)
        grid["snr_db"].push_back(db_value(s.db()));
    j["grid"] = grid;
    j["signal"] = {{"symbols_per_stream", cfg.signal.symbols_per_stream},
                   {"symbol_rate_gbd", cfg.signal.symbol_rate_gbd},
                   {"rolloff", cfg.signal.rolloff},
                   {"tx_oversampling", cfg.signal.tx_oversampling},
                   {"rx_oversampling", cfg.signal.rx_oversampling},
                   {"rrc_span", cfg.signal.rrc_span}};
    j["equalizer"] = {{"taps_per_filter", cfg.equalizer.taps_per_filter},
                      {"step_size", cfg.equalizer.step_size},
                      {"epochs", cfg.equalizer.epochs},
                      {"step_decay", cfg.equalizer.step_decay},
                      {"mse_window", cfg.equalizer.mse_window},
                      {"supervised", cfg.equalizer.supervised},
                      {"transfer_points", cfg.transfer_points}};
    j["voa"] = {{"case", cfg.voa.case_id},
                {"baseline_launch_db", cfg.voa.baseline_launch_db},
                {"coupling_kappa", cfg.voa.coupling_kappa},
                {"sweep_span_db", cfg.voa.sweep_span_db},
                {"steps", cfg.voa.steps},
                {"initial_attenuation_db", cfg.voa.initial_attenuation_db},
                {"intrinsic_snr_db", db_value(cfg.voa.intrinsic_snr_db)},
                {"signal_chain", cfg.voa.signal_chain}};
    return j.dump(2);
}

ExperimentConfig load_config(const std::string &path, std::optional<ExperimentKind> kind)
{
    std::ifstream is(path);
    if (!is)
        fail(ErrorCode::io_error, "cannot open config " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return config_from_json(ss.str(), kind);
}

} // namespace mdg
