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

#include "test_support.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "json.hpp"

namespace strata::testing {

namespace fs = std::filesystem;

namespace {

constexpr const char* kTopics[] = {"river", "market", "engine", "garden", "library", "harbor"};
constexpr const char* kTraits[] = {"steady", "bright", "ancient", "rapid", "quiet", "dense", "mobile"};

}  // namespace

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            fmt::format("strata-test-{}-{}-{}", ::getpid(), counter++, rd());
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::size_t
UniformInt(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return std::min(hi, lo + static_cast<std::size_t>(u * static_cast<double>(hi - lo + 1)));
}

BaseGraph
RandomBaseGraph(std::size_t n, double avg_degree, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    BaseGraph g;
    const std::size_t num_chunks = std::max<std::size_t>(1, n / 3);
    for (std::size_t c = 0; c < num_chunks; ++c) {
        Chunk chunk;
        chunk.id = fmt::format("chunk{:04d}", c);
        chunk.doc_id = fmt::format("doc{}", c % 7);
        chunk.text = fmt::format("Passage {} about {} matters.", c, kTopics[c % std::size(kTopics)]);
        chunk.token_count = count_tokens(chunk.text);
        g.chunks.emplace(chunk.id, chunk);
    }
    g.hierarchy.layers.push_back(GraphLayer{0, {}, {}});
    for (std::size_t i = 0; i < n; ++i) {
        Entity e;
        e.id = fmt::format("n{:04d}", i);
        const char* topic = kTopics[UniformInt(rng, 0, std::size(kTopics) - 1)];
        e.name = fmt::format("{} {} {}", kTraits[UniformInt(rng, 0, std::size(kTraits) - 1)], topic, i);
        e.description = fmt::format("A {} entity in the {} domain numbered {}.",
                                    kTraits[UniformInt(rng, 0, std::size(kTraits) - 1)], topic, i);
        e.source_chunk_ids.push_back(fmt::format("chunk{:04d}", UniformInt(rng, 0, num_chunks - 1)));
        g.hierarchy.AddEntity(std::move(e));
    }
    const auto target = static_cast<std::size_t>(avg_degree * static_cast<double>(n) / 2.0);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t attempt = 0; n > 1 && pairs.size() < target && attempt < target * 20; ++attempt) {
        auto a = UniformInt(rng, 0, n - 1);
        auto b = UniformInt(rng, 0, n - 1);
        if (a == b || !pairs.insert(std::minmax(a, b)).second) {
            continue;
        }
        Relation r;
        r.id = fmt::format("rel{:05d}", pairs.size());
        r.source_id = fmt::format("n{:04d}", a);
        r.target_id = fmt::format("n{:04d}", b);
        r.description = fmt::format("n{} links to n{}", a, b);
        g.hierarchy.AddRelation(std::move(r));
    }
    return g;
}

std::string
ToIngestJsonl(const BaseGraph& g) {
    std::string out;
    for (const auto& [id, c] : g.chunks) {
        out += nlohmann::json{{"type", "chunk"}, {"id", c.id}, {"doc_id", c.doc_id}, {"text", c.text}}
                   .dump() +
               "\n";
    }
    for (const auto& [id, e] : g.hierarchy.entities) {
        out += nlohmann::json{{"type", "entity"},
                              {"id", e.id},
                              {"name", e.name},
                              {"description", e.description},
                              {"chunk_ids", e.source_chunk_ids}}
                   .dump() +
               "\n";
    }
    for (const auto& [id, r] : g.hierarchy.relations) {
        out += nlohmann::json{{"type", "relation"},
                              {"id", r.id},
                              {"source", r.source_id},
                              {"target", r.target_id},
                              {"description", r.description}}
                   .dump() +
               "\n";
    }
    return out;
}

Hierarchy
RandomHierarchy(std::size_t leaves, int layers, std::mt19937_64& rng) {
    Hierarchy h;
    std::vector<EntityId> current;
    for (std::size_t i = 0; i < leaves; ++i) {
        Entity e;
        e.id = fmt::format("leaf{:04d}", i);
        e.name = e.id;
        e.description = fmt::format("leaf number {}", i);
        e.source_chunk_ids = {fmt::format("c{}", i % 5)};
        current.push_back(e.id);
        h.AddEntity(std::move(e));
    }
    std::size_t rel_counter = 0;
    auto add_random_relations = [&](int layer, const std::vector<EntityId>& ids, std::size_t count) {
        std::set<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t attempt = 0; ids.size() > 1 && pairs.size() < count && attempt < count * 20;
             ++attempt) {
            auto a = UniformInt(rng, 0, ids.size() - 1);
            auto b = UniformInt(rng, 0, ids.size() - 1);
            if (a == b || !pairs.insert(std::minmax(a, b)).second) {
                continue;
            }
            Relation r;
            r.id = fmt::format("r{:05d}", rel_counter++);
            r.source_id = ids[a];
            r.target_id = ids[b];
            r.layer = layer;
            r.description = fmt::format("{} with {}", ids[a], ids[b]);
            r.kind = layer == 0 ? RelationKind::kBase
                                : (UniformInt(rng, 0, 1) == 0 ? RelationKind::kInterClusterAggregated
                                                              : RelationKind::kInterClusterConcatenated);
            h.AddRelation(std::move(r));
        }
    };
    add_random_relations(0, current, current.size() + UniformInt(rng, 0, current.size()));

    for (int layer = 1; layer < layers && current.size() > 1; ++layer) {
        std::vector<EntityId> shuffled = current;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::vector<EntityId> next;
        std::size_t pos = 0;
        std::size_t ordinal = 0;
        while (pos < shuffled.size()) {
            // Cluster sizes in [1, 5]; the layer must strictly shrink.
            std::size_t size = UniformInt(rng, 1, 5);
            if (next.empty() && size >= shuffled.size()) {
                size = shuffled.size() - 1;
            }
            Entity agg;
            agg.id = AggregateId(layer, ordinal++);
            agg.name = agg.id;
            agg.description = fmt::format("aggregate {} on layer {}", ordinal, layer);
            agg.layer = layer;
            h.AddEntity(agg);
            for (std::size_t k = 0; k < size && pos < shuffled.size(); ++k, ++pos) {
                h.SetParent(shuffled[pos], agg.id);
            }
            next.push_back(agg.id);
        }
        add_random_relations(layer, next, UniformInt(rng, 0, next.size()));
        current = std::move(next);
    }
    return h;
}

std::string
ReadText(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void
WriteText(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

fs::path
DataDir() {
    return fs::path(STRATA_TEST_DATA_DIR);
}

}  // namespace strata::testing
