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

#include "strata/aggregation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>

#include "strata/error.hpp"
#include "strata/log.hpp"

namespace strata {

namespace {

constexpr std::size_t kEmbedBatch = 64;

// Runs task(i) for i in [0, count) on up to `workers` threads. The first
// exception (lowest index) is rethrown after all workers finish.
void
RunIndexed(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            task(i);
        }
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

// Re-raises a provider failure with the cluster it belongs to.
[[noreturn]] void
RethrowWithContext(const std::string& context) {
    try {
        throw;
    } catch (const GenerationParseError& e) {
        throw GenerationParseError(fmt::format("{}: {}", context, e.what()), e.raw_text());
    } catch (const Error& e) {
        throw Error(e.code(), fmt::format("{}: {}", context, e.what()));
    }
}

std::string
EmbeddingText(const Entity& e) {
    return count_tokens(e.description) > 0 ? e.description : e.name;
}

void
EmbedMissing(const Hierarchy& h, int layer, Providers& providers, EmbeddingTable& table,
             std::size_t& calls) {
    std::vector<const Entity*> pending;
    for (const auto& id : h.layers[layer].entity_ids) {
        if (!table.Contains(id)) {
            pending.push_back(&h.entity(id));
        }
    }
    for (std::size_t start = 0; start < pending.size(); start += kEmbedBatch) {
        std::size_t end = std::min(pending.size(), start + kEmbedBatch);
        std::vector<std::string> texts;
        for (std::size_t i = start; i < end; ++i) {
            texts.push_back(EmbeddingText(*pending[i]));
        }
        auto vectors = providers.embedding->embed_batch(texts);
        ++calls;
        for (std::size_t i = start; i < end; ++i) {
            table.Put(pending[i]->id, std::move(vectors[i - start]));
        }
    }
}

LayerReport
BuildLayerImpl(Hierarchy& h, int lower, const BuildParams& params, Providers& providers,
               EmbeddingTable& embeddings, bool single_cluster) {
    if (lower < 0 || lower >= static_cast<int>(h.layers.size())) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("no layer {} to aggregate", lower));
    }
    if (lower != h.top_layer()) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("layer {} already has a layer above it", lower));
    }
    const auto& lower_layer = h.layers[lower];
    if (lower_layer.entity_ids.size() < 2) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("layer {} needs at least two entities to aggregate", lower));
    }
    const int layer = lower + 1;
    LayerReport report;
    report.layer = layer;
    report.input_entities = lower_layer.entity_ids.size();

    EmbedMissing(h, lower, providers, embeddings, report.embedding_calls);

    std::vector<EntityId> ids(lower_layer.entity_ids.begin(), lower_layer.entity_ids.end());
    ClusterAssignment assignment;
    if (single_cluster) {
        assignment.clusters.push_back(ids);
    } else {
        std::vector<Embedding> vectors;
        vectors.reserve(ids.size());
        for (const auto& id : ids) {
            vectors.push_back(embeddings.Get(id));
        }
        GmmParams gmm;
        gmm.num_components = choose_num_components(ids.size(), static_cast<std::size_t>(params.cluster_size));
        gmm.seed = params.seed + static_cast<std::uint64_t>(lower);
        gmm.max_iters = params.gmm_max_iters;
        gmm.tol = params.gmm_tol;
        assignment = fit_gmm(ids, vectors, gmm);
        assignment = split_oversized(assignment, static_cast<std::size_t>(params.cluster_size),
                                     [&](const EntityId& id) -> const Embedding& { return embeddings.Get(id); });
    }
    assignment.layer = lower;
    report.clusters = assignment.clusters.size();
    report.degenerate_fallback = assignment.degenerate_fallback;

    std::vector<EntityId> labels;
    labels.reserve(assignment.clusters.size());
    for (std::size_t j = 0; j < assignment.clusters.size(); ++j) {
        labels.push_back(AggregateId(layer, j));
    }

    // Aggregated entities, one per cluster.
    std::vector<AggregateEntity> generated(assignment.clusters.size());
    RunIndexed(assignment.clusters.size(), providers.max_concurrency, [&](std::size_t j) {
        const auto& cluster = assignment.clusters[j];
        std::vector<EntitySummary> members;
        members.reserve(cluster.size());
        for (const auto& id : cluster) {
            const auto& e = h.entity(id);
            members.push_back({e.name, e.description});
        }
        std::vector<std::string> intra;
        for (const auto& rid : intra_cluster_relations(h, lower, cluster)) {
            intra.push_back(h.relation(rid).description);
        }
        try {
            generated[j] = providers.generation->generate_aggregate_entity(members, intra);
        } catch (const Error&) {
            RethrowWithContext(fmt::format("layer {} cluster {} ({} members)", layer, labels[j],
                                           cluster.size()));
        }
    });
    report.entity_generations = generated.size();

    for (std::size_t j = 0; j < assignment.clusters.size(); ++j) {
        Entity aggregate;
        aggregate.id = labels[j];
        aggregate.name = generated[j].name;
        aggregate.description = generated[j].description;
        aggregate.layer = layer;
        h.AddEntity(std::move(aggregate));
        for (const auto& child : assignment.clusters[j]) {
            h.SetParent(child, labels[j]);
        }
    }
    EmbedMissing(h, layer, providers, embeddings, report.embedding_calls);

    // Inter-cluster relations: LLM summary above tau, concatenation otherwise.
    report.evidence = connectivity_matrix(h, lower, assignment, labels);
    const int tau = params.TauFor(layer);
    std::vector<std::string> summaries(report.evidence.size());
    std::vector<std::size_t> to_generate;
    for (std::size_t p = 0; p < report.evidence.size(); ++p) {
        const auto& ev = report.evidence[p];
        ++report.lambda_histogram[ev.lambda];
        if (ev.lambda > static_cast<std::size_t>(tau)) {
            to_generate.push_back(p);
        } else {
            std::string joined;
            for (const auto& rid : ev.cross_relations) {
                if (!joined.empty()) {
                    joined += "; ";
                }
                joined += h.relation(rid).description;
            }
            summaries[p] = std::move(joined);
        }
    }
    RunIndexed(to_generate.size(), providers.max_concurrency, [&](std::size_t g) {
        const auto& ev = report.evidence[to_generate[g]];
        const auto& a = h.entity(ev.aggregate_a);
        const auto& b = h.entity(ev.aggregate_b);
        std::vector<std::string> cross;
        cross.reserve(ev.cross_relations.size());
        for (const auto& rid : ev.cross_relations) {
            cross.push_back(h.relation(rid).description);
        }
        try {
            summaries[to_generate[g]] = providers.generation->generate_aggregate_relation(
                {a.name, a.description}, {b.name, b.description}, cross);
        } catch (const Error&) {
            RethrowWithContext(fmt::format("layer {} relation {} -- {} (lambda {})", layer,
                                           ev.aggregate_a, ev.aggregate_b, ev.lambda));
        }
    });
    report.relation_generations = to_generate.size();
    report.concatenated_relations = report.evidence.size() - to_generate.size();

    for (std::size_t p = 0; p < report.evidence.size(); ++p) {
        const auto& ev = report.evidence[p];
        Relation r;
        r.id = fmt::format("aggrel:{}:{}", layer, p);
        r.source_id = ev.aggregate_a;
        r.target_id = ev.aggregate_b;
        r.description = std::move(summaries[p]);
        r.layer = layer;
        r.kind = ev.lambda > static_cast<std::size_t>(tau) ? RelationKind::kInterClusterAggregated
                                                           : RelationKind::kInterClusterConcatenated;
        h.AddRelation(std::move(r));
    }
    return report;
}

void
Accumulate(BuildReport& total, LayerReport layer) {
    total.embedding_calls += layer.embedding_calls;
    total.entity_generations += layer.entity_generations;
    total.relation_generations += layer.relation_generations;
    LogEvent({{"event", "layer_built"}, {"report", ToJson(layer)}});
    total.layers.push_back(std::move(layer));
}

}  // namespace

void
EmbeddingTable::Put(const EntityId& id, Embedding vector) {
    if (dim_ == 0) {
        dim_ = vector.size();
    }
    if (vector.size() != dim_) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("embedding for '{}' has dim {}, table dim {}", id, vector.size(), dim_));
    }
    auto it = index_.find(id);
    if (it != index_.end()) {
        vectors_[it->second] = std::move(vector);
        return;
    }
    index_.emplace(id, ids_.size());
    ids_.push_back(id);
    vectors_.push_back(std::move(vector));
}

const Embedding&
EmbeddingTable::Get(const EntityId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        throw Error(ErrorCode::kNotFound, fmt::format("no embedding stored for '{}'", id));
    }
    return vectors_[it->second];
}

bool
EmbeddingTable::operator==(const EmbeddingTable& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && vectors_ == other.vectors_;
}

std::vector<RelationId>
intra_cluster_relations(const Hierarchy& h, int layer, const std::vector<EntityId>& cluster) {
    std::vector<RelationId> out;
    if (layer < 0 || layer >= static_cast<int>(h.layers.size())) {
        return out;
    }
    std::set<EntityId> members(cluster.begin(), cluster.end());
    for (const auto& rid : h.layers[layer].relation_ids) {
        const auto& r = h.relation(rid);
        if (members.count(r.source_id) != 0 && members.count(r.target_id) != 0) {
            out.push_back(rid);
        }
    }
    return out;
}

std::vector<InterClusterEvidence>
connectivity_matrix(const Hierarchy& h, int layer, const ClusterAssignment& assignment,
                    const std::vector<EntityId>& labels) {
    if (labels.size() != assignment.clusters.size()) {
        throw Error(ErrorCode::kInvalidArgument, "connectivity_matrix: one label per cluster required");
    }
    std::unordered_map<EntityId, std::size_t> cluster_of;
    for (std::size_t j = 0; j < assignment.clusters.size(); ++j) {
        for (const auto& id : assignment.clusters[j]) {
            cluster_of[id] = j;
        }
    }
    std::map<std::pair<EntityId, EntityId>, std::vector<RelationId>> crossing;
    for (const auto& rid : h.layers.at(layer).relation_ids) {
        const auto& r = h.relation(rid);
        auto a = cluster_of.find(r.source_id);
        auto b = cluster_of.find(r.target_id);
        if (a == cluster_of.end() || b == cluster_of.end()) {
            throw Error(ErrorCode::kInvalidArgument,
                        fmt::format("relation '{}' has an endpoint outside the assignment", rid));
        }
        if (a->second == b->second) {
            continue;
        }
        auto key = std::minmax(labels[a->second], labels[b->second]);
        crossing[{key.first, key.second}].push_back(rid);
    }
    std::vector<InterClusterEvidence> out;
    out.reserve(crossing.size());
    for (auto& [pair, rels] : crossing) {
        std::sort(rels.begin(), rels.end());
        InterClusterEvidence ev;
        ev.aggregate_a = pair.first;
        ev.aggregate_b = pair.second;
        ev.lambda = rels.size();
        ev.cross_relations = std::move(rels);
        out.push_back(std::move(ev));
    }
    return out;
}

LayerReport
build_layer(Hierarchy& h, int lower, const BuildParams& params, Providers& providers,
            EmbeddingTable& embeddings) {
    params.Validate();
    return BuildLayerImpl(h, lower, params, providers, embeddings, false);
}

BuildReport
build_hierarchy(Hierarchy& h, const BuildParams& params, Providers& providers,
                EmbeddingTable& embeddings) {
    params.Validate();
    if (!providers.embedding || !providers.generation) {
        throw Error(ErrorCode::kInvalidArgument, "build_hierarchy requires both providers");
    }
    if (h.layers.empty() || h.layers[0].entity_ids.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "build_hierarchy requires a non-empty base layer");
    }
    if (h.layers.size() > 1) {
        throw Error(ErrorCode::kInvalidArgument, "hierarchy is already aggregated");
    }
    BuildReport report;
    EmbedMissing(h, 0, providers, embeddings, report.embedding_calls);

    while (static_cast<int>(h.layers.size()) < params.max_layers) {
        const int current = h.top_layer();
        const auto size = h.layers[current].entity_ids.size();
        if (size < 2) {
            break;
        }
        if (current >= 1 && size <= static_cast<std::size_t>(params.StopThreshold())) {
            break;
        }
        Accumulate(report, BuildLayerImpl(h, current, params, providers, embeddings, false));
    }
    if (params.add_root && h.layers[h.top_layer()].entity_ids.size() > 1) {
        Accumulate(report, BuildLayerImpl(h, h.top_layer(), params, providers, embeddings, true));
    }
    h.build_params = params;
    return report;
}

nlohmann::json
ToJson(const LayerReport& report) {
    nlohmann::json histogram = nlohmann::json::object();
    for (const auto& [lambda, count] : report.lambda_histogram) {
        histogram[std::to_string(lambda)] = count;
    }
    return {
        {"layer", report.layer},
        {"input_entities", report.input_entities},
        {"clusters", report.clusters},
        {"entity_generations", report.entity_generations},
        {"relation_generations", report.relation_generations},
        {"concatenated_relations", report.concatenated_relations},
        {"embedding_calls", report.embedding_calls},
        {"lambda_histogram", histogram},
        {"degenerate_fallback", report.degenerate_fallback},
    };
}

nlohmann::json
ToJson(const BuildReport& report) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : report.layers) {
        layers.push_back(ToJson(l));
    }
    return {
        {"layers", layers},
        {"provider_calls",
         {{"embedding_batches", report.embedding_calls},
          {"entity_generations", report.entity_generations},
          {"relation_generations", report.relation_generations}}},
    };
}

}  // namespace strata
