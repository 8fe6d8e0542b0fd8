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

#include <optional>
#include <string>

#include "mdg/experiments.hpp"

namespace mdg
{

/// Parses an experiment config document (JSON). Syntax errors raise
/// parse_error; schema violations raise invalid_argument with the dotted
/// path of the offending field in the message. The "preset" key (default
/// "desk") selects the starting values that the remaining keys override. When
/// `kind` is given, the document's "kind" may be omitted but must match
/// if present.
ExperimentConfig config_from_json(const std::string &text, std::optional<ExperimentKind> kind = std::nullopt);

/// Fully resolved config, accepted back by config_from_json.
std::string config_to_json(const ExperimentConfig &cfg);

ExperimentConfig load_config(const std::string &path, std::optional<ExperimentKind> kind = std::nullopt);

} // namespace mdg
