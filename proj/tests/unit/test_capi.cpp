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

#include <catch_amalgamated.hpp>

#include "mdg/mdg.h"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{

std::filesystem::path scratch_dir()
{
    const char *env = std::getenv("MDG_TEST_TMP");
    const auto dir = env ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "mdg_capi";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string take(char *s)
{
    std::string out = s ? s : "";
    mdg_string_free(s);
    return out;
}

template <typename T>
void put(std::ofstream &os, T v)
{
    os.write(reinterpret_cast<const char *>(&v), sizeof v);
}

// Tap dump written byte by byte from the documented layout: diagonal
// center spikes with gains g[i] (amplitude), 2 sps at 30 GBd.
void write_diagonal_taps(const std::filesystem::path &path, const double *g, std::uint32_t dim, std::uint32_t len)
{
    std::ofstream os(path, std::ios::binary);
    os.write("MDGTAPS1", 8);
    put<std::uint32_t>(os, dim);
    put<std::uint32_t>(os, dim);
    put<std::uint32_t>(os, len);
    put<std::uint32_t>(os, 1);
    put<double>(os, 60.0);
    put<double>(os, 30.0);
    put<double>(os, 0.01);
    for (std::uint32_t o = 0; o < dim; ++o)
        for (std::uint32_t i = 0; i < dim; ++i)
            for (std::uint32_t k = 0; k < len; ++k)
            {
                put<double>(os, o == i && k == len / 2 ? g[o] : 0.0);
                put<double>(os, 0.0);
            }
    put<std::uint32_t>(os, 0);
}

} // namespace

TEST_CASE("Status reporting")
{
    CHECK(std::strlen(mdg_version()) > 0);
    CHECK(std::string(mdg_status_name(MDG_OK)) == "ok");
    CHECK(std::string(mdg_status_name(MDG_ERR_PARSE)) == "parse_error");

    mdg_experiment *exp = nullptr;
    CHECK(mdg_experiment_from_json(R"({"kind": "surface", "trials": -2})", nullptr, &exp) ==
          MDG_ERR_INVALID_ARGUMENT);
    CHECK(exp == nullptr);
    CHECK_THAT(std::string(mdg_last_error()), ContainsSubstring("trials"));
    CHECK(mdg_experiment_from_json("{", nullptr, &exp) == MDG_ERR_PARSE);
    CHECK(mdg_experiment_from_json(nullptr, nullptr, &exp) == MDG_ERR_INVALID_ARGUMENT);
    CHECK(mdg_experiment_load("/nonexistent/x.json", nullptr, &exp) == MDG_ERR_IO);
    CHECK(mdg_experiment_preset("desk", "histogram", &exp) == MDG_ERR_INVALID_ARGUMENT);

    double v = 0.0;
    CHECK(mdg_observed_eigenvalue(2.0, 10.0, &v) == MDG_OK);
    CHECK(std::string(mdg_last_error()).empty());
}

TEST_CASE("Scalar relations")
{
    double v = 0.0;
    REQUIRE(mdg_observed_eigenvalue(2.0, 10.0, &v) == MDG_OK);
    CHECK_THAT(v, WithinRel(2.205, 1e-14));
    REQUIRE(mdg_correct_eigenvalue(2.205, 10.0, &v) == MDG_OK);
    CHECK_THAT(v, WithinRel(2.0, 1e-14));
    REQUIRE(mdg_correct_eigenvalue(0.3, 10.0, &v) == MDG_OK);
    CHECK(v == 0.1);
    CHECK(mdg_correct_eigenvalue(1.0, INFINITY, &v) == MDG_ERR_INVALID_ARGUMENT);
    REQUIRE(mdg_osnr_to_snr(20.0, 40.0, &v) == MDG_OK);
    CHECK_THAT(v, WithinAbs(16.9897, 1e-4));
    CHECK(mdg_osnr_to_snr(20.0, -1.0, &v) == MDG_ERR_INVALID_ARGUMENT);
    CHECK_THAT(mdg_estimation_error(2.0, 2.2), WithinAbs(-0.2, 1e-15));
}

TEST_CASE("Experiment lifecycle")
{
    mdg_experiment *exp = nullptr;
    REQUIRE(mdg_experiment_from_json(R"({
        "kind": "surface", "trials": 2,
        "link": {"n_bins": 16, "spans": 20},
        "grid": {"sigma_g_db": [0.3], "snr_db": [10, 20]}
    })",
                                     "surface", &exp) == MDG_OK);
    CHECK(std::string(mdg_experiment_kind(exp)) == "surface");
    CHECK(mdg_experiment_set_seed(exp, 5) == MDG_OK);
    CHECK(mdg_experiment_set_parallelism(exp, -1) == MDG_ERR_INVALID_ARGUMENT);
    CHECK(mdg_experiment_set_parallelism(exp, 2) == MDG_OK);

    char *json = nullptr;
    REQUIRE(mdg_experiment_to_json(exp, &json) == MDG_OK);
    const std::string cfg = take(json);
    CHECK_THAT(cfg, ContainsSubstring("\"seed\": 5"));

    std::size_t calls = 0, last_total = 0;
    auto progress = [](size_t, size_t total, void *user) {
        auto *p = static_cast<std::pair<std::size_t *, std::size_t *> *>(user);
        ++*p->first;
        *p->second = total;
    };
    std::pair<std::size_t *, std::size_t *> user{&calls, &last_total};
    mdg_result *res = nullptr;
    REQUIRE(mdg_experiment_run(exp, progress, &user, &res) == MDG_OK);
    CHECK(calls == 2);
    CHECK(last_total == 2);
    CHECK(mdg_result_trial_rows(res) == 4);
    CHECK(mdg_result_aggregate_rows(res) == 2);
    CHECK(mdg_result_skipped_trials(res) == 0);

    char *csv = nullptr;
    REQUIRE(mdg_result_csv(res, &csv) == MDG_OK);
    const std::string first = take(csv);
    CHECK(first.rfind("row_type,grid_index", 0) == 0);
    char *rj = nullptr;
    REQUIRE(mdg_result_json(res, &rj) == MDG_OK);
    CHECK_THAT(take(rj), ContainsSubstring("\"aggregates\""));

    const auto dir = scratch_dir() / "surface_run";
    std::filesystem::remove_all(dir);
    REQUIRE(mdg_result_write(res, exp, dir.string().c_str()) == MDG_OK);
    CHECK(std::filesystem::exists(dir / "results.csv"));
    CHECK(std::filesystem::exists(dir / "manifest.json"));

    // the echoed config reproduces the run
    mdg_experiment *again = nullptr;
    REQUIRE(mdg_experiment_from_json(cfg.c_str(), nullptr, &again) == MDG_OK);
    mdg_result *res2 = nullptr;
    REQUIRE(mdg_experiment_run(again, nullptr, nullptr, &res2) == MDG_OK);
    char *csv2 = nullptr;
    REQUIRE(mdg_result_csv(res2, &csv2) == MDG_OK);
    CHECK(take(csv2) == first);

    mdg_result_free(res2);
    mdg_experiment_free(again);
    mdg_result_free(res);
    mdg_experiment_free(exp);
    mdg_result_free(nullptr);
    mdg_experiment_free(nullptr);
}

TEST_CASE("Channels")
{
    mdg_link_config cfg;
    mdg_link_config_default(&cfg);
    CHECK(cfg.spatial_modes == 6);
    CHECK(cfg.n_bins == 1000);
    cfg.spatial_modes = 2;
    cfg.n_bins = 32;
    cfg.spans = 20;
    cfg.sigma_g_db = 0.5;
    cfg.seed = 3;
    mdg_channel *ch = nullptr;
    REQUIRE(mdg_channel_build(&cfg, &ch) == MDG_OK);
    int dim = 0, bins = 0;
    double bw = 0.0;
    REQUIRE(mdg_channel_dims(ch, &dim, &bins, &bw) == MDG_OK);
    CHECK(dim == 4);
    CHECK(bins == 32);
    CHECK(bw == 240.0);

    double sigma = 0.0, ptp = 0.0;
    REQUIRE(mdg_channel_metrics(ch, &sigma, &ptp) == MDG_OK);
    CHECK(sigma > 0.0);
    CHECK(ptp > sigma);

    char *rep = nullptr;
    REQUIRE(mdg_channel_estimate(ch, INFINITY, 0, &rep) == MDG_OK);
    CHECK_THAT(take(rep), ContainsSubstring("\"snr_used_db\": \"inf\""));
    CHECK(mdg_channel_estimate(ch, INFINITY, 1, &rep) == MDG_ERR_INVALID_ARGUMENT);

    const auto path = scratch_dir() / "channel.bin";
    REQUIRE(mdg_channel_save(ch, path.string().c_str()) == MDG_OK);
    mdg_channel *back = nullptr;
    REQUIRE(mdg_channel_load(path.string().c_str(), &back) == MDG_OK);
    double sigma2 = 0.0;
    REQUIRE(mdg_channel_metrics(back, &sigma2, nullptr) == MDG_OK);
    CHECK(sigma2 == sigma);
    mdg_channel_free(back);
    mdg_channel_free(ch);

    cfg.spatial_modes = 0;
    CHECK(mdg_channel_build(&cfg, &ch) == MDG_ERR_INVALID_ARGUMENT);
    CHECK(mdg_channel_load((scratch_dir() / "missing.bin").string().c_str(), &ch) == MDG_ERR_IO);
}

TEST_CASE("Tap dumps from the documented layout")
{
    // amplitudes 1 and 1/2: the inverse has power gains 1 and 4, i.e. 0 and 6.02 dB
    const double g[2] = {1.0, 0.5};
    const auto path = scratch_dir() / "taps.bin";
    write_diagonal_taps(path, g, 2, 9);

    mdg_taps *taps = nullptr;
    REQUIRE(mdg_taps_load(path.string().c_str(), &taps) == MDG_OK);
    int no = 0, ni = 0, len = 0;
    REQUIRE(mdg_taps_dims(taps, &no, &ni, &len) == MDG_OK);
    CHECK(no == 2);
    CHECK(ni == 2);
    CHECK(len == 9);

    char *rep = nullptr;
    REQUIRE(mdg_taps_estimate(taps, 0, 0.0, 0, 64, &rep) == MDG_OK);
    const std::string r = take(rep);
    CHECK_THAT(r, ContainsSubstring("\"source\": \"equalizer-taps\""));
    CHECK_THAT(r, ContainsSubstring("\"snr_used_db\": null"));
    CHECK_THAT(r, ContainsSubstring("\"peak_to_peak_db\": 6.02"));
    CHECK_THAT(r, ContainsSubstring("\"sigma_mdg_db\": 3.01"));

    REQUIRE(mdg_taps_estimate(taps, 1, 12.0, 1, 64, &rep) == MDG_OK);
    const std::string c = take(rep);
    CHECK_THAT(c, ContainsSubstring("\"corrected\": true"));
    CHECK_THAT(c, ContainsSubstring("\"snr_used_db\": 12"));
    CHECK(mdg_taps_estimate(taps, 0, 0.0, 1, 64, &rep) == MDG_ERR_INVALID_ARGUMENT);
    mdg_taps_free(taps);

    std::ofstream(scratch_dir() / "junk.bin") << "not a tap dump";
    CHECK(mdg_taps_load((scratch_dir() / "junk.bin").string().c_str(), &taps) == MDG_ERR_PARSE);
}
