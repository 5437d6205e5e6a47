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

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "strata/clustering.hpp"
#include "strata/kg_model.hpp"
#include "strata/providers.hpp"

namespace strata {

/// Id -> normalised vector for every embedded entity. Insertion order is kept
/// so serialisation is deterministic.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {
    }

    void Put(const EntityId& id, Embedding vector);
    [[nodiscard]] const Embedding& Get(const EntityId& id) const;
    [[nodiscard]] bool Contains(const EntityId& id) const {
        return index_.count(id) != 0;
    }
    [[nodiscard]] std::size_t dim() const {
        return dim_;
    }
    [[nodiscard]] std::size_t size() const {
        return ids_.size();
    }
    [[nodiscard]] const std::vector<EntityId>& ids() const {
        return ids_;
    }

    bool operator==(const EmbeddingTable& other) const;

private:
    std::size_t dim_ = 0;
    std::vector<EntityId> ids_;
    std::vector<Embedding> vectors_;
    std::unordered_map<EntityId, std::size_t> index_;
};

/// Lower-layer relations crossing one pair of clusters. `aggregate_a` <
/// `aggregate_b`; `cross_relations` is sorted.
struct InterClusterEvidence {
    EntityId aggregate_a;
    EntityId aggregate_b;
    std::vector<RelationId> cross_relations;
    std::size_t lambda = 0;
};

/// Counters and distributions observed while building one layer.
struct LayerReport {
    int layer = 0;
    std::size_t input_entities = 0;
    std::size_t clusters = 0;
    std::size_t entity_generations = 0;
    std::size_t relation_generations = 0;
    std::size_t concatenated_relations = 0;
    std::size_t embedding_calls = 0;
    std::map<std::size_t, std::size_t> lambda_histogram;
    std::vector<InterClusterEvidence> evidence;
    bool degenerate_fallback = false;
};

struct BuildReport {
    std::vector<LayerReport> layers;
    std::size_t embedding_calls = 0;
    std::size_t entity_generations = 0;
    std::size_t relation_generations = 0;
};

/// Relations of `layer` with both endpoints inside `cluster`, sorted by id.
std::vector<RelationId> intra_cluster_relations(const Hierarchy& h, int layer,
                                                const std::vector<EntityId>& cluster);

/// Crossing relations for every unordered cluster pair with lambda > 0.
/// `labels[j]` names cluster j (normally its aggregate id).
std::vector<InterClusterEvidence> connectivity_matrix(const Hierarchy& h, int layer,
                                                      const ClusterAssignment& assignment,
                                                      const std::vector<EntityId>& labels);

/// Clusters layer `lower` of `h`, appends layer `lower + 1` with one
/// aggregate per cluster plus inter-cluster relations, links children and
/// embeds the new aggregates into `embeddings`.
LayerReport build_layer(Hierarchy& h, int lower, const BuildParams& params, Providers& providers,
                        EmbeddingTable& embeddings);

/// Embeds the base layer when needed, then aggregates layer by layer until
/// the newest layer is small enough or `max_layers` is reached. The base
/// layer is always aggregated once when it has at least two entities and
/// max_layers > 1.
BuildReport build_hierarchy(Hierarchy& h, const BuildParams& params, Providers& providers,
                            EmbeddingTable& embeddings);

nlohmann::json ToJson(const LayerReport& report);
nlohmann::json ToJson(const BuildReport& report);

}  // namespace strata
