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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace strata {

using EntityId = std::string;
using RelationId = std::string;
using ChunkId = std::string;

enum class RelationKind {
    kBase,
    kIntraClusterInherited,  // reserved, never produced by the builder
    kInterClusterAggregated,
    kInterClusterConcatenated,
};

std::string_view ToString(RelationKind kind);
RelationKind RelationKindFromString(std::string_view text);

struct Entity {
    EntityId id;
    std::string name;
    std::string description;
    int layer = 0;
    std::optional<EntityId> parent_id;
    std::vector<ChunkId> source_chunk_ids;

    bool operator==(const Entity&) const = default;
};

struct Relation {
    RelationId id;
    EntityId source_id;
    EntityId target_id;
    std::string description;
    int layer = 0;
    RelationKind kind = RelationKind::kBase;

    bool operator==(const Relation&) const = default;
};

struct Chunk {
    ChunkId id;
    std::string text;
    std::string doc_id;
    std::size_t token_count = 0;

    bool operator==(const Chunk&) const = default;
};

struct GraphLayer {
    int index = 0;
    std::set<EntityId> entity_ids;
    std::set<RelationId> relation_ids;

    bool operator==(const GraphLayer&) const = default;
};

/// Knobs for hierarchy construction. `max_layers` counts every layer
/// including the base layer, so 1 means "no aggregation".
struct BuildParams {
    int cluster_size = 20;
    int tau = 3;
    int max_layers = 4;
    std::uint64_t seed = 0;
    std::optional<int> stop_when_entities_leq;  // defaults to cluster_size
    std::map<int, int> tau_overrides;           // keyed by the layer being built
    bool add_root = false;
    int gmm_max_iters = 100;
    double gmm_tol = 1e-6;

    [[nodiscard]] int StopThreshold() const {
        return stop_when_entities_leq.value_or(cluster_size);
    }
    [[nodiscard]] int TauFor(int layer) const;

    /// Throws Error(kInvalidArgument) when a field is out of range.
    void Validate() const;

    bool operator==(const BuildParams&) const = default;
};

/// Whole knowledge graph: base layer plus every aggregated layer. Entity and
/// relation records live in the id-keyed stores; layers index into them.
struct Hierarchy {
    std::vector<GraphLayer> layers;
    std::map<EntityId, Entity> entities;
    std::map<RelationId, Relation> relations;
    std::map<EntityId, EntityId> parent_map;
    BuildParams build_params;

    [[nodiscard]] const Entity& entity(std::string_view id) const;
    [[nodiscard]] const Relation& relation(std::string_view id) const;
    [[nodiscard]] bool contains_entity(std::string_view id) const;
    [[nodiscard]] int top_layer() const {
        return static_cast<int>(layers.size()) - 1;
    }

    /// Adds an entity and registers it in its layer (creating layers as
    /// needed). Sets parent_map when parent_id is present.
    void AddEntity(Entity entity);
    void AddRelation(Relation relation);
    void SetParent(const EntityId& child, const EntityId& parent);

    bool operator==(const Hierarchy&) const = default;
};

/// Every invariant breach in `h`, each naming the offending id and rule.
/// An empty result means the hierarchy is well formed.
std::vector<std::string> validate_hierarchy(const Hierarchy& h);

/// Chain from `entity_id` up to its topmost ancestor, inclusive on both ends.
std::vector<EntityId> ancestors(const Hierarchy& h, std::string_view entity_id);

/// Children of an aggregate (entities whose parent is `aggregate_id`).
std::set<EntityId> entities_of_cluster(const Hierarchy& h, std::string_view aggregate_id);

/// Generated id for the ordinal-th aggregate of `layer`.
EntityId AggregateId(int layer, std::size_t ordinal);

}  // namespace strata
