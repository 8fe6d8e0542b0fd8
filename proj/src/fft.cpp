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

#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace mdg::detail
{

namespace
{

struct PlanCache
{
    std::mutex mutex;
    std::map<std::pair<std::size_t, bool>, fftw_plan> plans;

    ~PlanCache()
    {
        for (auto &[key, plan] : plans)
            fftw_destroy_plan(plan);
    }
};

PlanCache &cache()
{
    static PlanCache c;
    return c;
}

fftw_plan plan_for(std::size_t n, bool inverse)
{
    auto &c = cache();
    std::lock_guard lock(c.mutex);
    const auto key = std::make_pair(n, inverse);
    if (auto it = c.plans.find(key); it != c.plans.end())
        return it->second;
    // Planned on a scratch buffer, executed later through the new-array API.
    auto *scratch = fftw_alloc_complex(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), scratch, scratch, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    c.plans.emplace(key, p);
    return p;
}

} // namespace

void fft_inplace(std::span<std::complex<double>> data, bool inverse)
{
    if (data.empty())
        return;
    fftw_plan p = plan_for(data.size(), inverse);
    auto *buf = reinterpret_cast<fftw_complex *>(data.data());
    fftw_execute_dft(p, buf, buf);
}

} // namespace mdg::detail
