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

// mdgsim command line front end. Talks to the library through the C API only.

#include "mdg/mdg.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace
{

constexpr int exit_ok = 0;
constexpr int exit_usage = 2;
constexpr int exit_runtime = 3;

struct Failure
{
    int exit_code;
    std::string status;
    std::string message;
};

// Emits the machine-readable error record on stderr (one JSON line) and,
// when an output directory is known, as error.json inside it.
int report(const Failure &f, const std::string &subcommand, const std::string &out_dir)
{
    nlohmann::ordered_json j;
    j["error"] = {{"status", f.status},
                  {"exit_code", f.exit_code},
                  {"subcommand", subcommand},
                  {"message", f.message}};
    std::cerr << j.dump() << '\n';
    if (!out_dir.empty() && f.exit_code == exit_runtime)
    {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        std::ofstream os(std::filesystem::path(out_dir) / "error.json");
        os << j.dump(2) << '\n';
    }
    return f.exit_code;
}

/// Configuration problems are usage errors; everything after a config
/// has been accepted is a runtime error.
Failure failure(mdg_status s, bool usage)
{
    return {usage ? exit_usage : exit_runtime, mdg_status_name(s), mdg_last_error()};
}

struct ExpDeleter
{
    void operator()(mdg_experiment *e) const { mdg_experiment_free(e); }
};
struct ResultDeleter
{
    void operator()(mdg_result *r) const { mdg_result_free(r); }
};
struct TapsDeleter
{
    void operator()(mdg_taps *t) const { mdg_taps_free(t); }
};
struct StringDeleter
{
    void operator()(char *s) const { mdg_string_free(s); }
};

using ExperimentPtr = std::unique_ptr<mdg_experiment, ExpDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

struct RunOptions
{
    std::string config;
    std::string preset = "desk";
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> parallelism;
    bool verbose = false;
};

int default_parallelism()
{
    if (const char *env = std::getenv("MDG_PARALLELISM"))
    {
        try
        {
            const int p = std::stoi(env);
            if (p >= 0)
                return p;
        }
        catch (const std::exception &)
        {
        }
        std::cerr << "warning: ignoring invalid MDG_PARALLELISM='" << env << "'\n";
    }
    return 0;
}

void progress_line(std::size_t done, std::size_t total, void *user)
{
    const auto *name = static_cast<const std::string *>(user);
    std::cerr << "[" << *name << "] " << done << "/" << total << " jobs\n";
}

int run_experiment(const std::string &kind, const RunOptions &opt)
{
    mdg_experiment *raw = nullptr;
    const mdg_status load = opt.config.empty() ? mdg_experiment_preset(opt.preset.c_str(), kind.c_str(), &raw)
                                               : mdg_experiment_load(opt.config.c_str(), kind.c_str(), &raw);
    if (load != MDG_OK)
        return report(failure(load, true), kind, "");
    ExperimentPtr exp(raw);

    if (opt.seed)
        mdg_experiment_set_seed(exp.get(), *opt.seed);
    const int parallelism = opt.parallelism ? *opt.parallelism : default_parallelism();
    if (opt.parallelism || parallelism > 0)
        if (auto s = mdg_experiment_set_parallelism(exp.get(), parallelism); s != MDG_OK)
            return report(failure(s, true), kind, "");

    if (opt.verbose)
    {
        char *json = nullptr;
        if (mdg_experiment_to_json(exp.get(), &json) == MDG_OK)
        {
            StringPtr holder(json);
            std::cerr << "resolved config:\n" << json << '\n';
        }
    }

    mdg_result *result_raw = nullptr;
    std::string name = kind;
    const mdg_status run =
        mdg_experiment_run(exp.get(), opt.verbose ? progress_line : nullptr, &name, &result_raw);
    if (run != MDG_OK)
        return report(failure(run, false), kind, opt.out);
    std::unique_ptr<mdg_result, ResultDeleter> result(result_raw);

    if (auto s = mdg_result_write(result.get(), exp.get(), opt.out.c_str()); s != MDG_OK)
        return report(failure(s, false), kind, opt.out);

    std::cout << kind << ": " << mdg_result_trial_rows(result.get()) << " trial rows, "
              << mdg_result_aggregate_rows(result.get()) << " grid points";
    if (const auto skipped = mdg_result_skipped_trials(result.get()); skipped > 0)
        std::cout << ", " << skipped << " trials skipped (convergence failure)";
    std::cout << " -> " << opt.out << '\n';
    return exit_ok;
}

struct TapsOptions
{
    std::string taps;
    std::optional<double> snr_db;
    bool corrected = false;
    int points = 256;
    std::string out;
};

int run_analyze_taps(const TapsOptions &opt)
{
    const std::string cmd = "analyze-taps";
    if (opt.corrected && !opt.snr_db)
        return report({exit_usage, "invalid_argument", "--corrected requires --snr-db"}, cmd, "");

    mdg_taps *raw = nullptr;
    if (auto s = mdg_taps_load(opt.taps.c_str(), &raw); s != MDG_OK)
        return report(failure(s, true), cmd, "");
    std::unique_ptr<mdg_taps, TapsDeleter> taps(raw);

    char *json = nullptr;
    const mdg_status s =
        mdg_taps_estimate(taps.get(), opt.snr_db ? 1 : 0, opt.snr_db.value_or(0.0), opt.corrected ? 1 : 0, opt.points, &json);
    if (s != MDG_OK)
        return report(failure(s, s == MDG_ERR_INVALID_ARGUMENT), cmd, opt.out);
    StringPtr holder(json);

    std::cout << json << '\n';
    if (!opt.out.empty())
    {
        std::error_code ec;
        std::filesystem::create_directories(opt.out, ec);
        std::ofstream os(std::filesystem::path(opt.out) / "report.json");
        os << json << '\n';
        nlohmann::ordered_json manifest;
        manifest["tool"] = "mdgsim";
        manifest["version"] = mdg_version();
        manifest["kind"] = cmd;
        manifest["inputs"] = {{"taps", opt.taps},
                              {"snr_db", opt.snr_db ? nlohmann::ordered_json(*opt.snr_db) : nlohmann::ordered_json()},
                              {"corrected", opt.corrected},
                              {"points", opt.points}};
        manifest["outputs"] = {"report.json", "manifest.json"};
        std::ofstream ms(std::filesystem::path(opt.out) / "manifest.json");
        ms << manifest.dump(2) << '\n';
        if (!os || !ms)
            return report({exit_runtime, "io_error", "failed writing to " + opt.out}, cmd, "");
    }
    return exit_ok;
}

int run_validate(const std::string &path, const std::string &kind)
{
    mdg_experiment *raw = nullptr;
    const mdg_status s = mdg_experiment_load(path.c_str(), kind.empty() ? nullptr : kind.c_str(), &raw);
    if (s != MDG_OK)
        return report(failure(s, true), "validate", "");
    ExperimentPtr exp(raw);
    char *json = nullptr;
    if (mdg_experiment_to_json(exp.get(), &json) != MDG_OK)
        return report(failure(MDG_ERR_INTERNAL, false), "validate", "");
    StringPtr holder(json);
    std::cout << json << '\n';
    std::cerr << "ok: valid " << mdg_experiment_kind(exp.get()) << " config\n";
    return exit_ok;
}

void add_run_options(CLI::App *sub, RunOptions &opt)
{
    sub->add_option("-c,--config", opt.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--preset", opt.preset, "Preset used when no config is given")
        ->check(CLI::IsMember({"desk", "full"}));
    sub->add_option("-o,--out", opt.out, "Output directory")->required();
    sub->add_option("--seed", opt.seed, "Base seed (overrides the config)");
    sub->add_option("-j,--parallelism", opt.parallelism,
                    "Worker threads, 0 = all cores (default: $MDG_PARALLELISM or config)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("-v,--verbose", opt.verbose, "Progress and resolved config on stderr");
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Mode-dependent loss/gain estimation experiments"};
    app.set_version_flag("--version", std::string(mdg_version()));
    app.require_subcommand(1);

    RunOptions scatter, surface, sweep, voa;
    add_run_options(app.add_subcommand("scatter", "True vs MMSE-observed eigenvalues"), scatter);
    add_run_options(app.add_subcommand("surface", "Analytic estimation error over (sigma, SNR)"), surface);
    add_run_options(app.add_subcommand("sweep", "End-to-end estimation through the signal chain"), sweep);
    add_run_options(app.add_subcommand("voa", "VOA-emulated MDL sweep"), voa);

    TapsOptions taps;
    auto *analyze = app.add_subcommand("analyze-taps", "Estimate MDL/MDG from an equalizer tap dump");
    analyze->add_option("--taps", taps.taps, "Tap dump file")->required()->check(CLI::ExistingFile);
    analyze->add_option("--snr-db", taps.snr_db, "Known SNR in dB");
    analyze->add_flag("--corrected", taps.corrected, "Apply the eigenvalue correction (needs --snr-db)");
    analyze->add_option("--points", taps.points, "Frequency points over the equalizer band")
        ->check(CLI::PositiveNumber);
    analyze->add_option("-o,--out", taps.out, "Also write report.json and manifest.json here");

    std::string validate_config, validate_kind;
    auto *validate = app.add_subcommand("validate", "Check a config against the schema");
    validate->add_option("-c,--config", validate_config, "Experiment config (JSON)")->required();
    validate->add_option("--kind", validate_kind, "Expected experiment kind")
        ->check(CLI::IsMember({"scatter", "surface", "sweep", "voa"}));

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForVersion &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        std::string sub;
        for (const auto *s : app.get_subcommands())
            sub = s->get_name();
        return report({exit_usage, "usage_error", e.what()}, sub, "");
    }

    const auto *chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    if (name == "scatter")
        return run_experiment(name, scatter);
    if (name == "surface")
        return run_experiment(name, surface);
    if (name == "sweep")
        return run_experiment(name, sweep);
    if (name == "voa")
        return run_experiment(name, voa);
    if (name == "analyze-taps")
        return run_analyze_taps(taps);
    return run_validate(validate_config, validate_kind);
}
