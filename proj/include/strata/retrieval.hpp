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

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "strata/aggregation.hpp"
#include "strata/kg_model.hpp"
#include "strata/providers.hpp"

namespace strata {

struct SeedEntry {
    EntityId entity_id;
    double score = 0.0;

    bool operator==(const SeedEntry&) const = default;
};

/// Top-n base-layer entities for a query, score descending then id ascending.
struct SeedSet {
    std::string query;
    std::vector<SeedEntry> entries;
    std::size_t n = 0;

    [[nodiscard]] std::vector<EntityId> ids() const;
    bool operator==(const SeedSet&) const = default;
};

/// A seed group (seeds sharing a root) and the lowest node common to all of
/// their ancestor chains.
struct LcaNode {
    std::vector<EntityId> seeds;
    EntityId ancestor;

    bool operator==(const LcaNode&) const = default;
};

struct LcaPaths {
    std::vector<std::vector<EntityId>> paths;  // each path climbs strictly upward
    std::vector<LcaNode> lca_nodes;
};

/// Child -> parent edge of the hierarchy traversed by a path.
using TreeLink = std::pair<EntityId, EntityId>;

struct RetrievedSubgraph {
    std::vector<EntityId> node_ids;                  // sorted
    std::vector<TreeLink> tree_links;                // sorted, parent-child part of R_lca
    std::vector<RelationId> path_relations;          // sorted, stored relations of R_lca
    std::vector<RelationId> inter_cluster_relations; // sorted
    std::vector<LcaNode> lca_nodes;
    std::vector<std::vector<EntityId>> paths;

    bool operator==(const RetrievedSubgraph&) const = default;
};

struct AssembleOptions {
    /// Include base-layer relations joining two retrieved seeds.
    bool include_seed_relations = true;
};

/// Cosine scan over stored base-layer embeddings only.
SeedSet anchor_seeds(const Hierarchy& h, const EmbeddingTable& embeddings, const std::string& query,
                     std::size_t n, EmbeddingProvider& provider);

/// Common ancestor minimising the combined path length from `a` and `b`;
/// nullopt when their chains end in different roots.
std::optional<EntityId> lowest_common_ancestor(const Hierarchy& h, std::string_view a,
                                               std::string_view b);

/// Groups seeds by root, finds each group's lowest shared ancestor, and
/// returns every seed's chain cut at that ancestor (singletons climb to the
/// root). Duplicate paths are dropped.
LcaPaths lca_paths(const Hierarchy& h, const SeedSet& seeds);

RetrievedSubgraph assemble_subgraph(const Hierarchy& h, const LcaPaths& paths,
                                    const AssembleOptions& options = {});

/// Baseline: union of all shortest base-layer paths (<= max_hops) between
/// every pair of seeds. Seeds are always part of the node set.
RetrievedSubgraph flat_path_retrieve(const Hierarchy& h, const SeedSet& seeds, int max_hops);

nlohmann::json ToJson(const SeedSet& seeds);
nlohmann::json ToJson(const RetrievedSubgraph& sub);

}  // namespace strata
