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

#include "strata/context.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace strata {

namespace {

std::string
RenderEntities(const Hierarchy& h, const RetrievedSubgraph& sub) {
    std::vector<const Entity*> entities;
    entities.reserve(sub.node_ids.size());
    for (const auto& id : sub.node_ids) {
        entities.push_back(&h.entity(id));
    }
    if (entities.empty()) {
        return {};
    }
    std::sort(entities.begin(), entities.end(), [](const Entity* l, const Entity* r) {
        if (l->layer != r->layer) {
            return l->layer > r->layer;
        }
        return l->id < r->id;
    });
    std::string out = "# Aggregates\n";
    for (const auto* e : entities) {
        out += fmt::format("- [L{}] {}: {}\n", e->layer, e->name, e->description);
    }
    return out;
}

std::string
RenderRelations(const Hierarchy& h, const RetrievedSubgraph& sub) {
    std::vector<const Relation*> relations;
    for (const auto* ids : {&sub.path_relations, &sub.inter_cluster_relations}) {
        for (const auto& id : *ids) {
            relations.push_back(&h.relation(id));
        }
    }
    if (relations.empty()) {
        return {};
    }
    std::sort(relations.begin(), relations.end(), [](const Relation* l, const Relation* r) {
        if (l->kind != r->kind) {
            return l->kind < r->kind;
        }
        return l->id < r->id;
    });
    std::string out = "# Relations\n";
    for (const auto* r : relations) {
        out += fmt::format("- {} -- {}: {}\n", h.entity(r->source_id).name,
                           h.entity(r->target_id).name, r->description);
    }
    return out;
}

}  // namespace

std::string
ContextBundle::Render() const {
    std::string out;
    for (const auto* section : {&entity_section, &relation_section, &chunk_section}) {
        if (section->empty()) {
            continue;
        }
        if (!out.empty()) {
            out += "\n";
        }
        out += *section;
    }
    return out;
}

std::vector<ChunkRank>
rank_chunks(const Hierarchy& h, const SeedSet& seeds) {
    std::map<ChunkId, std::size_t> hits;
    std::set<EntityId> counted;
    for (const auto& entry : seeds.entries) {
        if (!counted.insert(entry.entity_id).second) {
            continue;
        }
        const auto& e = h.entity(entry.entity_id);
        std::set<ChunkId> distinct(e.source_chunk_ids.begin(), e.source_chunk_ids.end());
        for (const auto& cid : distinct) {
            ++hits[cid];
        }
    }
    std::vector<ChunkRank> ranked;
    ranked.reserve(hits.size());
    for (const auto& [cid, count] : hits) {
        ranked.push_back({cid, count});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const ChunkRank& l, const ChunkRank& r) {
        if (l.seed_hits != r.seed_hits) {
            return l.seed_hits > r.seed_hits;
        }
        return l.chunk_id < r.chunk_id;
    });
    return ranked;
}

ContextBundle
assemble_context(const Hierarchy& h, const RetrievedSubgraph& sub, const SeedSet& seeds,
                 const ChunkStore& chunks, std::size_t top_c, const ContextFlags& flags) {
    ContextBundle bundle;
    bundle.flags = flags;
    bundle.top_c = top_c;
    bundle.entity_section = RenderEntities(h, sub);
    if (flags.include_relations) {
        bundle.relation_section = RenderRelations(h, sub);
    }
    if (flags.include_chunks && top_c > 0) {
        std::string out;
        for (const auto& rank : rank_chunks(h, seeds)) {
            if (bundle.chunk_ids.size() == top_c) {
                break;
            }
            auto it = chunks.find(rank.chunk_id);
            if (it == chunks.end()) {
                continue;
            }
            bundle.chunk_ids.push_back(rank.chunk_id);
            out += fmt::format("- [{}] {}\n", it->first, it->second.text);
        }
        if (!out.empty()) {
            bundle.chunk_section = "# Chunks\n" + out;
        }
    }
    bundle.entity_tokens = count_tokens(bundle.entity_section);
    bundle.relation_tokens = count_tokens(bundle.relation_section);
    bundle.chunk_tokens = count_tokens(bundle.chunk_section);
    bundle.total_tokens = bundle.entity_tokens + bundle.relation_tokens + bundle.chunk_tokens;
    return bundle;
}

RedundancyReport
redundancy_report(const ContextBundle& lean, const ContextBundle& baseline) {
    RedundancyReport report;
    report.lean_tokens = lean.total_tokens;
    report.baseline_tokens = baseline.total_tokens;
    if (baseline.total_tokens > 0) {
        report.ratio = static_cast<double>(lean.total_tokens) /
                       static_cast<double>(baseline.total_tokens);
    }
    report.sections["entities"] = {lean.entity_tokens, baseline.entity_tokens};
    report.sections["relations"] = {lean.relation_tokens, baseline.relation_tokens};
    report.sections["chunks"] = {lean.chunk_tokens, baseline.chunk_tokens};
    return report;
}

nlohmann::json
ToJson(const ContextBundle& bundle) {
    return {
        {"sections",
         {{"entities", bundle.entity_section},
          {"relations", bundle.relation_section},
          {"chunks", bundle.chunk_section}}},
        {"chunk_ids", bundle.chunk_ids},
        {"tokens",
         {{"entities", bundle.entity_tokens},
          {"relations", bundle.relation_tokens},
          {"chunks", bundle.chunk_tokens},
          {"total", bundle.total_tokens}}},
        {"flags",
         {{"include_relations", bundle.flags.include_relations},
          {"include_chunks", bundle.flags.include_chunks}}},
        {"top_c", bundle.top_c},
        {"rendering", bundle.Render()},
    };
}

nlohmann::json
ToJson(const RedundancyReport& report) {
    nlohmann::json sections = nlohmann::json::object();
    for (const auto& [name, tokens] : report.sections) {
        sections[name] = {{"lean", tokens.lean}, {"baseline", tokens.baseline}};
    }
    return {
        {"lean_tokens", report.lean_tokens},
        {"baseline_tokens", report.baseline_tokens},
        {"ratio", report.ratio ? nlohmann::json(*report.ratio) : nlohmann::json(nullptr)},
        {"sections", sections},
    };
}

}  // namespace strata
