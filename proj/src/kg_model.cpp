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

#include "strata/kg_model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <unordered_map>

#include "strata/error.hpp"

namespace strata {

std::string_view
ToString(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInvalidArgument:
            return "invalid_argument";
        case ErrorCode::kNotFound:
            return "not_found";
        case ErrorCode::kProviderUnavailable:
            return "provider_unavailable";
        case ErrorCode::kGenerationParse:
            return "generation_parse_error";
        case ErrorCode::kLoad:
            return "load_error";
        case ErrorCode::kIntegrity:
            return "integrity_error";
        case ErrorCode::kInternal:
            return "internal_error";
    }
    return "internal_error";
}

std::string_view
ToString(RelationKind kind) {
    switch (kind) {
        case RelationKind::kBase:
            return "base";
        case RelationKind::kIntraClusterInherited:
            return "intra_cluster_inherited";
        case RelationKind::kInterClusterAggregated:
            return "inter_cluster_aggregated";
        case RelationKind::kInterClusterConcatenated:
            return "inter_cluster_concatenated";
    }
    return "base";
}

RelationKind
RelationKindFromString(std::string_view text) {
    for (auto kind : {RelationKind::kBase,
                      RelationKind::kIntraClusterInherited,
                      RelationKind::kInterClusterAggregated,
                      RelationKind::kInterClusterConcatenated}) {
        if (ToString(kind) == text) {
            return kind;
        }
    }
    throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown relation kind '{}'", text));
}

int
BuildParams::TauFor(int layer) const {
    auto it = tau_overrides.find(layer);
    return it == tau_overrides.end() ? tau : it->second;
}

void
BuildParams::Validate() const {
    if (cluster_size < 2) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("cluster_size must be >= 2, got {}", cluster_size));
    }
    if (tau < 0) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("tau must be >= 0, got {}", tau));
    }
    for (const auto& [layer, value] : tau_overrides) {
        if (value < 0) {
            throw Error(ErrorCode::kInvalidArgument,
                        fmt::format("tau override for layer {} must be >= 0", layer));
        }
    }
    if (max_layers < 1) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("max_layers must be >= 1, got {}", max_layers));
    }
    if (StopThreshold() < 1) {
        throw Error(ErrorCode::kInvalidArgument, "stop_when_entities_leq must be >= 1");
    }
    if (gmm_max_iters < 1 || !(gmm_tol > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "gmm_max_iters must be >= 1 and gmm_tol > 0");
    }
}

const Entity&
Hierarchy::entity(std::string_view id) const {
    auto it = entities.find(std::string(id));
    if (it == entities.end()) {
        throw Error(ErrorCode::kNotFound, fmt::format("unknown entity '{}'", id));
    }
    return it->second;
}

const Relation&
Hierarchy::relation(std::string_view id) const {
    auto it = relations.find(std::string(id));
    if (it == relations.end()) {
        throw Error(ErrorCode::kNotFound, fmt::format("unknown relation '{}'", id));
    }
    return it->second;
}

bool
Hierarchy::contains_entity(std::string_view id) const {
    return entities.find(std::string(id)) != entities.end();
}

namespace {

GraphLayer&
EnsureLayer(std::vector<GraphLayer>& layers, int index) {
    if (index < 0) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("negative layer {}", index));
    }
    while (static_cast<int>(layers.size()) <= index) {
        GraphLayer layer;
        layer.index = static_cast<int>(layers.size());
        layers.push_back(std::move(layer));
    }
    return layers[index];
}

}  // namespace

void
Hierarchy::AddEntity(Entity entity) {
    if (entities.count(entity.id) != 0) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("duplicate entity id '{}'", entity.id));
    }
    EnsureLayer(layers, entity.layer).entity_ids.insert(entity.id);
    if (entity.parent_id) {
        parent_map[entity.id] = *entity.parent_id;
    }
    auto id = entity.id;
    entities.emplace(std::move(id), std::move(entity));
}

void
Hierarchy::AddRelation(Relation relation) {
    if (relations.count(relation.id) != 0) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("duplicate relation id '{}'", relation.id));
    }
    EnsureLayer(layers, relation.layer).relation_ids.insert(relation.id);
    auto id = relation.id;
    relations.emplace(std::move(id), std::move(relation));
}

void
Hierarchy::SetParent(const EntityId& child, const EntityId& parent) {
    auto it = entities.find(child);
    if (it == entities.end()) {
        throw Error(ErrorCode::kNotFound, fmt::format("unknown entity '{}'", child));
    }
    it->second.parent_id = parent;
    parent_map[child] = parent;
}

std::vector<std::string>
validate_hierarchy(const Hierarchy& h) {
    std::vector<std::string> violations;
    auto report = [&](std::string message) { violations.push_back(std::move(message)); };

    if (h.layers.empty() || h.layers[0].entity_ids.empty()) {
        report("layer 0: layer 0 must not be empty");
    }

    // Layer membership: each entity listed exactly once, in its own layer.
    std::unordered_map<std::string, int> listed_layer;
    for (std::size_t i = 0; i < h.layers.size(); ++i) {
        const auto& layer = h.layers[i];
        if (layer.index != static_cast<int>(i)) {
            report(fmt::format("layer {}: index field is {}", i, layer.index));
        }
        for (const auto& id : layer.entity_ids) {
            auto [it, inserted] = listed_layer.emplace(id, static_cast<int>(i));
            if (!inserted) {
                report(fmt::format("entity '{}': listed in layers {} and {} (ids must be unique)",
                                   id, it->second, i));
            }
            auto e = h.entities.find(id);
            if (e == h.entities.end()) {
                report(fmt::format("entity '{}': listed in layer {} but has no record", id, i));
            } else if (e->second.layer != static_cast<int>(i)) {
                report(fmt::format("entity '{}': layer field {} but listed in layer {}", id,
                                   e->second.layer, i));
            }
        }
        for (const auto& id : layer.relation_ids) {
            auto r = h.relations.find(id);
            if (r == h.relations.end()) {
                report(fmt::format("relation '{}': listed in layer {} but has no record", id, i));
            } else if (r->second.layer != static_cast<int>(i)) {
                report(fmt::format("relation '{}': layer field {} but listed in layer {}", id,
                                   r->second.layer, i));
            }
        }
    }

    for (const auto& [key, e] : h.entities) {
        if (key != e.id) {
            report(fmt::format("entity '{}': stored under key '{}'", e.id, key));
        }
        if (listed_layer.count(e.id) == 0) {
            report(fmt::format("entity '{}': not listed in any layer", e.id));
        }
        if (e.layer == 0 && e.source_chunk_ids.empty()) {
            report(fmt::format("entity '{}': layer-0 entity without source chunks", e.id));
        }
        if (e.layer >= 1 && !e.source_chunk_ids.empty()) {
            report(fmt::format("entity '{}': layer-{} entity carries source chunks", e.id,
                               e.layer));
        }
        auto pm = h.parent_map.find(e.id);
        if (e.parent_id) {
            if (pm == h.parent_map.end() || pm->second != *e.parent_id) {
                report(fmt::format("entity '{}': parent_id disagrees with parent_map", e.id));
            }
            auto p = h.entities.find(*e.parent_id);
            if (p == h.entities.end()) {
                report(fmt::format("entity '{}': parent '{}' does not exist", e.id, *e.parent_id));
            } else if (p->second.layer != e.layer + 1) {
                report(fmt::format("entity '{}': parent '{}' is at layer {}, expected {}", e.id,
                                   *e.parent_id, p->second.layer, e.layer + 1));
            }
        } else {
            if (pm != h.parent_map.end()) {
                report(fmt::format("entity '{}': parent_map entry without parent_id", e.id));
            }
            if (e.layer < h.top_layer()) {
                report(fmt::format("entity '{}': non-top entity at layer {} has no parent", e.id,
                                   e.layer));
            }
        }
    }
    for (const auto& [child, parent] : h.parent_map) {
        if (h.entities.count(child) == 0) {
            report(fmt::format("entity '{}': parent_map entry for unknown entity", child));
        }
    }

    // Cycle detection over parent_map (iterative three-colour DFS).
    {
        enum class Mark { kUnseen, kActive, kDone };
        std::unordered_map<std::string, Mark> marks;
        for (const auto& [start, unused] : h.parent_map) {
            if (marks[start] != Mark::kUnseen) {
                continue;
            }
            std::vector<std::string> stack;
            std::string current = start;
            while (true) {
                auto& mark = marks[current];
                if (mark == Mark::kActive) {
                    report(fmt::format("entity '{}': parent chain forms a cycle", current));
                    break;
                }
                if (mark == Mark::kDone) {
                    break;
                }
                mark = Mark::kActive;
                stack.push_back(current);
                auto next = h.parent_map.find(current);
                if (next == h.parent_map.end()) {
                    break;
                }
                current = next->second;
            }
            for (const auto& id : stack) {
                marks[id] = Mark::kDone;
            }
        }
    }

    for (const auto& [key, r] : h.relations) {
        if (key != r.id) {
            report(fmt::format("relation '{}': stored under key '{}'", r.id, key));
        }
        if (r.source_id == r.target_id) {
            report(fmt::format("relation '{}': self-loop on '{}'", r.id, r.source_id));
        }
        for (const auto* endpoint : {&r.source_id, &r.target_id}) {
            auto e = h.entities.find(*endpoint);
            if (e == h.entities.end()) {
                report(fmt::format("relation '{}': endpoint '{}' does not exist", r.id, *endpoint));
            } else if (e->second.layer != r.layer) {
                report(fmt::format("relation '{}': endpoint '{}' is at layer {}, relation at {}",
                                   r.id, *endpoint, e->second.layer, r.layer));
            }
        }
        bool inter = r.kind == RelationKind::kInterClusterAggregated ||
                     r.kind == RelationKind::kInterClusterConcatenated;
        if (inter != (r.layer >= 1)) {
            report(fmt::format("relation '{}': kind {} not allowed at layer {}", r.id,
                               ToString(r.kind), r.layer));
        }
    }

    // Layer i (i >= 1) must be exactly the set of parents of layer i-1.
    for (std::size_t i = 1; i < h.layers.size(); ++i) {
        std::set<std::string> parents;
        for (const auto& id : h.layers[i - 1].entity_ids) {
            auto pm = h.parent_map.find(id);
            if (pm != h.parent_map.end()) {
                parents.insert(pm->second);
            }
        }
        if (parents != h.layers[i].entity_ids) {
            for (const auto& id : h.layers[i].entity_ids) {
                if (parents.count(id) == 0) {
                    report(fmt::format("entity '{}': aggregate at layer {} has no children", id, i));
                }
            }
            for (const auto& id : parents) {
                if (h.layers[i].entity_ids.count(id) == 0) {
                    report(fmt::format("entity '{}': parent of layer-{} entity missing from layer {}",
                                       id, i - 1, i));
                }
            }
        }
    }
    return violations;
}

std::vector<EntityId>
ancestors(const Hierarchy& h, std::string_view entity_id) {
    std::vector<EntityId> chain{h.entity(entity_id).id};
    while (true) {
        auto it = h.parent_map.find(chain.back());
        if (it == h.parent_map.end()) {
            break;
        }
        if (chain.size() > h.entities.size()) {
            throw Error(ErrorCode::kIntegrity,
                        fmt::format("parent chain of '{}' does not terminate", entity_id));
        }
        chain.push_back(it->second);
    }
    return chain;
}

std::set<EntityId>
entities_of_cluster(const Hierarchy& h, std::string_view aggregate_id) {
    const auto& aggregate = h.entity(aggregate_id);
    if (aggregate.layer < 1) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("'{}' is a layer-0 entity, not an aggregate", aggregate_id));
    }
    std::set<EntityId> children;
    if (aggregate.layer - 1 < static_cast<int>(h.layers.size())) {
        for (const auto& id : h.layers[aggregate.layer - 1].entity_ids) {
            auto it = h.parent_map.find(id);
            if (it != h.parent_map.end() && it->second == aggregate.id) {
                children.insert(id);
            }
        }
    }
    return children;
}

EntityId
AggregateId(int layer, std::size_t ordinal) {
    return fmt::format("agg:{}:{}", layer, ordinal);
}

}  // namespace strata
