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

#include <stdexcept>
#include <string>

namespace mdg
{

enum class ErrorCode
{
    invalid_argument,
    numeric_error,
    convergence_failure,
    io_error,
    parse_error,
};

// Single exception type for the library; the C API maps `code()` onto mdg_status.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &message)
{
    throw Error(code, message);
}

inline void require(bool condition, const std::string &message)
{
    if (!condition)
        fail(ErrorCode::invalid_argument, message);
}

} // namespace mdg
