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

#include "mdg/error.hpp"

#include <optional>

// Error code raised by f(), or nothing if it returned normally.
template <typename F>
std::optional<mdg::ErrorCode> error_code_of(F &&f)
{
    try
    {
        f();
    }
    catch (const mdg::Error &e)
    {
        return e.code();
    }
    return std::nullopt;
}
