// Copyright 2025-present the strata project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace strata {

/// Receives one structured event per call. The default sink writes a JSON
/// line to stderr; tools may redirect or silence it.
using LogSink = std::function<void(const nlohmann::json&)>;

/// Installs `sink` (null silences logging) and returns the previous one.
LogSink SetLogSink(LogSink sink);
void LogEvent(const nlohmann::json& event);
void LogWarning(std::string_view message);

}  // namespace strata
