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

#include "strata/retrieval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "strata/error.hpp"

namespace strata {

namespace {

constexpr int kUnreached = std::numeric_limits<int>::max();

template <typename T>
std::vector<T>
SortedUnique(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

struct BaseGraph {
    std::vector<EntityId> ids;
    std::unordered_map<EntityId, int> index;
    // neighbour index, relation id
    std::vector<std::vector<std::pair<int, const RelationId*>>> adjacency;
};

BaseGraph
MakeBaseGraph(const Hierarchy& h) {
    BaseGraph g;
    const auto& layer = h.layers.at(0);
    g.ids.assign(layer.entity_ids.begin(), layer.entity_ids.end());
    for (std::size_t i = 0; i < g.ids.size(); ++i) {
        g.index.emplace(g.ids[i], static_cast<int>(i));
    }
    g.adjacency.resize(g.ids.size());
    for (const auto& rid : layer.relation_ids) {
        const auto& r = h.relation(rid);
        int a = g.index.at(r.source_id);
        int b = g.index.at(r.target_id);
        g.adjacency[a].emplace_back(b, &rid);
        g.adjacency[b].emplace_back(a, &rid);
    }
    return g;
}

std::vector<int>
BoundedBfs(const BaseGraph& g, int source, int max_hops) {
    std::vector<int> dist(g.ids.size(), kUnreached);
    std::vector<int> frontier{source};
    dist[source] = 0;
    for (int depth = 1; depth <= max_hops && !frontier.empty(); ++depth) {
        std::vector<int> next;
        for (int u : frontier) {
            for (const auto& [v, rid] : g.adjacency[u]) {
                if (dist[v] == kUnreached) {
                    dist[v] = depth;
                    next.push_back(v);
                }
            }
        }
        frontier = std::move(next);
    }
    return dist;
}

}  // namespace

std::vector<EntityId>
SeedSet::ids() const {
    std::vector<EntityId> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        out.push_back(e.entity_id);
    }
    return out;
}

SeedSet
anchor_seeds(const Hierarchy& h, const EmbeddingTable& embeddings, const std::string& query,
             std::size_t n, EmbeddingProvider& provider) {
    if (count_tokens(query) == 0) {
        throw Error(ErrorCode::kInvalidArgument, "query must not be empty");
    }
    if (n < 1) {
        throw Error(ErrorCode::kInvalidArgument, "top-n must be >= 1");
    }
    if (h.layers.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "hierarchy has no base layer");
    }
    const Embedding q = provider.embed_batch({query}).at(0);
    const double q_norm = std::sqrt(Dot(q, q));
    SeedSet out;
    out.query = query;
    out.n = n;
    for (const auto& id : h.layers[0].entity_ids) {
        const auto& v = embeddings.Get(id);
        if (v.size() != q.size()) {
            throw Error(ErrorCode::kInvalidArgument,
                        fmt::format("query embedding dim {} does not match index dim {}", q.size(),
                                    v.size()));
        }
        const double denom = q_norm * std::sqrt(Dot(v, v));
        out.entries.push_back({id, denom > 0.0 ? Dot(q, v) / denom : 0.0});
    }
    auto better = [](const SeedEntry& l, const SeedEntry& r) {
        if (l.score != r.score) {
            return l.score > r.score;
        }
        return l.entity_id < r.entity_id;
    };
    const std::size_t keep = std::min(n, out.entries.size());
    std::partial_sort(out.entries.begin(), out.entries.begin() + static_cast<std::ptrdiff_t>(keep),
                      out.entries.end(), better);
    out.entries.resize(keep);
    return out;
}

std::optional<EntityId>
lowest_common_ancestor(const Hierarchy& h, std::string_view a, std::string_view b) {
    auto chain_a = ancestors(h, a);
    auto chain_b = ancestors(h, b);
    std::unordered_set<EntityId> on_a(chain_a.begin(), chain_a.end());
    // Chains climb one layer per step, so the first shared node is the lowest.
    for (const auto& id : chain_b) {
        if (on_a.count(id) != 0) {
            return id;
        }
    }
    return std::nullopt;
}

LcaPaths
lca_paths(const Hierarchy& h, const SeedSet& seeds) {
    LcaPaths out;
    std::map<EntityId, std::vector<std::vector<EntityId>>> by_root;
    std::map<EntityId, std::vector<EntityId>> members;
    for (const auto& entry : seeds.entries) {
        auto chain = ancestors(h, entry.entity_id);
        const auto root = chain.back();
        members[root].push_back(entry.entity_id);
        by_root[root].push_back(std::move(chain));
    }
    std::set<std::vector<EntityId>> unique_paths;
    for (auto& [root, chains] : by_root) {
        auto& group = members[root];
        if (chains.size() == 1) {
            out.lca_nodes.push_back({group, root});
            unique_paths.insert(chains.front());
            continue;
        }
        // Lowest node present in every chain of the group.
        std::map<EntityId, std::size_t> hits;
        for (const auto& chain : chains) {
            for (const auto& id : chain) {
                ++hits[id];
            }
        }
        EntityId lca = root;
        int lca_layer = h.entity(root).layer;
        for (const auto& [id, count] : hits) {
            if (count == chains.size() && h.entity(id).layer < lca_layer) {
                lca = id;
                lca_layer = h.entity(id).layer;
            }
        }
        std::sort(group.begin(), group.end());
        out.lca_nodes.push_back({group, lca});
        for (const auto& chain : chains) {
            auto end = std::find(chain.begin(), chain.end(), lca);
            unique_paths.emplace(chain.begin(), end + 1);
        }
    }
    out.paths.assign(unique_paths.begin(), unique_paths.end());
    return out;
}

RetrievedSubgraph
assemble_subgraph(const Hierarchy& h, const LcaPaths& paths, const AssembleOptions& options) {
    RetrievedSubgraph sub;
    sub.paths = paths.paths;
    sub.lca_nodes = paths.lca_nodes;
    std::vector<EntityId> nodes;
    for (const auto& path : paths.paths) {
        for (std::size_t i = 0; i < path.size(); ++i) {
            nodes.push_back(path[i]);
            if (i + 1 < path.size()) {
                sub.tree_links.emplace_back(path[i], path[i + 1]);
            }
        }
    }
    sub.node_ids = SortedUnique(std::move(nodes));
    sub.tree_links = SortedUnique(std::move(sub.tree_links));
    std::unordered_set<EntityId> in_ret(sub.node_ids.begin(), sub.node_ids.end());

    for (std::size_t layer = 0; layer < h.layers.size(); ++layer) {
        if (layer == 0 && !options.include_seed_relations) {
            continue;
        }
        for (const auto& rid : h.layers[layer].relation_ids) {
            const auto& r = h.relation(rid);
            if (in_ret.count(r.source_id) == 0 || in_ret.count(r.target_id) == 0) {
                continue;
            }
            (layer == 0 ? sub.path_relations : sub.inter_cluster_relations).push_back(rid);
        }
    }
    return sub;
}

RetrievedSubgraph
flat_path_retrieve(const Hierarchy& h, const SeedSet& seeds, int max_hops) {
    if (max_hops < 1) {
        throw Error(ErrorCode::kInvalidArgument, "max_hops must be >= 1");
    }
    const auto g = MakeBaseGraph(h);
    std::vector<int> seed_idx;
    for (const auto& entry : seeds.entries) {
        auto it = g.index.find(entry.entity_id);
        if (it == g.index.end()) {
            throw Error(ErrorCode::kInvalidArgument,
                        fmt::format("seed '{}' is not a base-layer entity", entry.entity_id));
        }
        seed_idx.push_back(it->second);
    }
    std::vector<std::vector<int>> dist;
    dist.reserve(seed_idx.size());
    for (int s : seed_idx) {
        dist.push_back(BoundedBfs(g, s, max_hops));
    }
    std::vector<bool> keep_node(g.ids.size(), false);
    std::set<RelationId> keep_rel;
    for (int s : seed_idx) {
        keep_node[s] = true;
    }
    for (std::size_t i = 0; i < seed_idx.size(); ++i) {
        for (std::size_t j = i + 1; j < seed_idx.size(); ++j) {
            const auto& da = dist[i];
            const auto& db = dist[j];
            const int d = da[seed_idx[j]];
            if (d == kUnreached || d == 0) {
                continue;
            }
            for (std::size_t u = 0; u < g.ids.size(); ++u) {
                if (da[u] == kUnreached || db[u] == kUnreached || da[u] + db[u] != d) {
                    continue;
                }
                keep_node[u] = true;
                for (const auto& [v, rid] : g.adjacency[u]) {
                    if (db[v] != kUnreached && da[u] + 1 + db[v] == d) {
                        keep_rel.insert(*rid);
                    }
                }
            }
        }
    }
    RetrievedSubgraph sub;
    for (std::size_t u = 0; u < g.ids.size(); ++u) {
        if (keep_node[u]) {
            sub.node_ids.push_back(g.ids[u]);
        }
    }
    sub.path_relations.assign(keep_rel.begin(), keep_rel.end());
    return sub;
}

nlohmann::json
ToJson(const SeedSet& seeds) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : seeds.entries) {
        entries.push_back({{"entity_id", e.entity_id}, {"score", e.score}});
    }
    return {{"query", seeds.query}, {"n", seeds.n}, {"entries", entries}};
}

nlohmann::json
ToJson(const RetrievedSubgraph& sub) {
    nlohmann::json links = nlohmann::json::array();
    for (const auto& [child, parent] : sub.tree_links) {
        links.push_back({{"child", child}, {"parent", parent}});
    }
    nlohmann::json lca = nlohmann::json::array();
    for (const auto& node : sub.lca_nodes) {
        lca.push_back({{"seeds", node.seeds}, {"ancestor", node.ancestor}});
    }
    return {
        {"node_ids", sub.node_ids},
        {"tree_links", links},
        {"path_relations", sub.path_relations},
        {"inter_cluster_relations", sub.inter_cluster_relations},
        {"lca_nodes", lca},
        {"paths", sub.paths},
    };
}

}  // namespace strata
