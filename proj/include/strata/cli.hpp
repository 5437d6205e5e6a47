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

#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "strata/error.hpp"
#include "strata/kg_model.hpp"
#include "strata/providers.hpp"

namespace strata {

/// Process exit codes. Every failure falls into exactly one class.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitData = 3,
    kExitProvider = 4,
    kExitInternal = 5,
};

int ExitCodeFor(ErrorCode code);

struct RetrievalConfig {
    std::size_t top_n = 10;
    std::size_t top_c = 5;
    bool include_relations = true;
    bool include_chunks = true;
    int max_hops = 4;

    bool operator==(const RetrievalConfig&) const = default;
};

/// Everything a command needs, resolved from defaults, an optional JSON
/// config file and command-line overrides (in that order).
struct RunConfig {
    ProviderConfig embedding;
    ProviderConfig generation;
    BuildParams build;
    RetrievalConfig retrieval;

    bool operator==(const RunConfig&) const = default;
};

/// Fields present in `j` override `base`; unknown keys are rejected.
ProviderConfig ProviderConfigFromJson(const nlohmann::json& j, ProviderConfig base = {});
RunConfig RunConfigFromJson(const nlohmann::json& j, RunConfig base = {});

/// `redact` replaces non-empty API keys with a placeholder.
nlohmann::json ToJson(const ProviderConfig& config, bool redact);
nlohmann::json ToJson(const RunConfig& config, bool redact = true);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Machine output goes to `out`, logs to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace strata
