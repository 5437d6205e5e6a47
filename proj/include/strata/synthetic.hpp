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

#include <cstdint>
#include <string>
#include <vector>

namespace strata {

/// Shape of a generated corpus: domains contain topics, topics contain
/// entities. Relations prefer to stay inside a topic, then a domain.
struct SyntheticParams {
    int domains = 3;
    int topics_per_domain = 5;
    int entities_per_topic = 10;
    int relations = 400;
    int chunks = 80;
    int queries = 50;
    double p_same_topic = 0.70;
    double p_same_domain = 0.22;  // remainder crosses domains
    std::uint64_t seed = 7;

    void Validate() const;
};

struct SyntheticCorpus {
    std::string jsonl;                 // ingest records, one per line
    std::vector<std::string> queries;  // one natural-language question each
};

SyntheticCorpus generate_synthetic(const SyntheticParams& params = {});

}  // namespace strata
