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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "strata/kg_model.hpp"
#include "strata/retrieval.hpp"

namespace strata {

using ChunkStore = std::map<ChunkId, Chunk>;

struct ChunkRank {
    ChunkId chunk_id;
    std::size_t seed_hits = 0;

    bool operator==(const ChunkRank&) const = default;
};

struct ContextFlags {
    bool include_relations = true;  // false: relation-free ablation
    bool include_chunks = true;     // false: graph-only ablation

    bool operator==(const ContextFlags&) const = default;
};

/// Evidence handed to the answer generator. Each section is a labelled block
/// with one record per line; disabled sections are empty strings.
struct ContextBundle {
    std::string entity_section;
    std::string relation_section;
    std::string chunk_section;
    std::vector<ChunkId> chunk_ids;
    std::size_t entity_tokens = 0;
    std::size_t relation_tokens = 0;
    std::size_t chunk_tokens = 0;
    std::size_t total_tokens = 0;
    ContextFlags flags;
    std::size_t top_c = 0;

    /// Non-empty sections joined by a blank line.
    [[nodiscard]] std::string Render() const;

    bool operator==(const ContextBundle&) const = default;
};

/// Chunks referenced by at least one seed, ranked by the number of distinct
/// seeds citing them (descending), then chunk id (ascending).
std::vector<ChunkRank> rank_chunks(const Hierarchy& h, const SeedSet& seeds);

ContextBundle assemble_context(const Hierarchy& h, const RetrievedSubgraph& sub, const SeedSet& seeds,
                               const ChunkStore& chunks, std::size_t top_c,
                               const ContextFlags& flags = {});

struct SectionTokens {
    std::size_t lean = 0;
    std::size_t baseline = 0;
};

struct RedundancyReport {
    std::size_t lean_tokens = 0;
    std::size_t baseline_tokens = 0;
    std::optional<double> ratio;  // undefined when the baseline is empty
    std::map<std::string, SectionTokens> sections;
};

RedundancyReport redundancy_report(const ContextBundle& lean, const ContextBundle& baseline);

nlohmann::json ToJson(const ContextBundle& bundle);
nlohmann::json ToJson(const RedundancyReport& report);

}  // namespace strata
