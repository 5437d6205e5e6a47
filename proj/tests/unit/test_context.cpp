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

#include <gtest/gtest.h>

#include <fmt/format.h>

#include <algorithm>
#include <random>

#include "strata/context.hpp"
#include "test_support.hpp"

namespace strata {
namespace {

Entity
Leaf(const std::string& id, std::vector<ChunkId> chunks) {
    Entity e;
    e.id = id;
    e.name = "N" + id;
    e.description = "about " + id;
    e.source_chunk_ids = std::move(chunks);
    return e;
}

SeedSet
Seeds(const std::vector<EntityId>& ids) {
    SeedSet s;
    s.n = ids.size();
    for (const auto& id : ids) {
        s.entries.push_back({id, 0.5});
    }
    return s;
}

TEST(RankChunks, MoreSeedsRankFirst) {
    Hierarchy h;
    h.AddEntity(Leaf("s1", {"B", "A"}));
    h.AddEntity(Leaf("s2", {"A"}));
    h.AddEntity(Leaf("s3", {"A", "A"}));
    auto ranked = rank_chunks(h, Seeds({"s1", "s2", "s3"}));
    EXPECT_EQ(ranked, (std::vector<ChunkRank>{{"A", 3}, {"B", 1}}));
}

TEST(RankChunks, NoChunksGivesEmptyRanking) {
    Hierarchy h;
    h.AddEntity(Leaf("s1", {}));
    EXPECT_TRUE(rank_chunks(h, Seeds({"s1"})).empty());
}

TEST(RankChunks, MatchesDoubleLoopCountOracle) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        Hierarchy h;
        std::vector<EntityId> seeds;
        std::vector<ChunkId> all_chunks;
        for (int c = 0; c < 10; ++c) {
            all_chunks.push_back(fmt::format("c{}", c));
        }
        for (int s = 0; s < 30; ++s) {
            std::vector<ChunkId> mine;
            for (std::size_t k = 0, n = testing::UniformInt(rng, 0, 4); k < n; ++k) {
                mine.push_back(all_chunks[testing::UniformInt(rng, 0, 9)]);
            }
            seeds.push_back(fmt::format("s{:02d}", s));
            h.AddEntity(Leaf(seeds.back(), mine));
        }
        std::vector<std::pair<long, ChunkId>> oracle;
        for (const auto& c : all_chunks) {
            long count = 0;
            for (const auto& s : seeds) {
                const auto& cs = h.entity(s).source_chunk_ids;
                count += std::find(cs.begin(), cs.end(), c) != cs.end();
            }
            if (count > 0) {
                oracle.emplace_back(-count, c);
            }
        }
        std::sort(oracle.begin(), oracle.end());
        auto ranked = rank_chunks(h, Seeds(seeds));
        ASSERT_EQ(ranked.size(), oracle.size());
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            EXPECT_EQ(ranked[i].chunk_id, oracle[i].second);
            EXPECT_EQ(static_cast<long>(ranked[i].seed_hits), -oracle[i].first);
        }
    }
}

struct Fixture {
    Hierarchy h;
    ChunkStore chunks;
    RetrievedSubgraph sub;
    SeedSet seeds;
};

Fixture
MakeFixture() {
    Fixture f;
    f.h.AddEntity(Leaf("a", {"k1", "k2"}));
    f.h.AddEntity(Leaf("b", {"k2"}));
    Entity p;
    p.id = "p";
    p.name = "Np";
    p.description = "group of a and b";
    p.layer = 1;
    f.h.AddEntity(p);
    f.h.SetParent("a", "p");
    f.h.SetParent("b", "p");
    f.h.AddRelation({"r1", "a", "b", "a meets b", 0, RelationKind::kBase});
    f.chunks["k1"] = {"k1", "first chunk text", "d", 3};
    f.chunks["k2"] = {"k2", "second chunk with more text", "d", 5};
    f.seeds = Seeds({"a", "b"});
    f.sub.node_ids = {"a", "b", "p"};
    f.sub.path_relations = {"r1"};
    return f;
}

TEST(AssembleContext, LayoutAndOrdering) {
    auto f = MakeFixture();
    auto bundle = assemble_context(f.h, f.sub, f.seeds, f.chunks, 5);
    EXPECT_EQ(bundle.entity_section,
              "# Aggregates\n- [L1] Np: group of a and b\n- [L0] Na: about a\n- [L0] Nb: about b\n");
    EXPECT_EQ(bundle.relation_section, "# Relations\n- Na -- Nb: a meets b\n");
    EXPECT_EQ(bundle.chunk_section,
              "# Chunks\n- [k2] second chunk with more text\n- [k1] first chunk text\n");
    EXPECT_EQ(bundle.chunk_ids, (std::vector<ChunkId>{"k2", "k1"}));
}

TEST(AssembleContext, BothAblationsLeaveEntitiesOnly) {
    auto f = MakeFixture();
    auto bundle = assemble_context(f.h, f.sub, f.seeds, f.chunks, 5, {false, false});
    EXPECT_FALSE(bundle.entity_section.empty());
    EXPECT_TRUE(bundle.relation_section.empty());
    EXPECT_TRUE(bundle.chunk_section.empty());
    EXPECT_EQ(bundle.relation_tokens + bundle.chunk_tokens, 0u);
    EXPECT_EQ(bundle.Render(), bundle.entity_section);
}

TEST(AssembleContext, TopCZeroDropsChunks) {
    auto f = MakeFixture();
    auto bundle = assemble_context(f.h, f.sub, f.seeds, f.chunks, 0);
    EXPECT_TRUE(bundle.chunk_section.empty());
    EXPECT_TRUE(bundle.chunk_ids.empty());
    auto one = assemble_context(f.h, f.sub, f.seeds, f.chunks, 1);
    EXPECT_EQ(one.chunk_ids, std::vector<ChunkId>{"k2"});
}

TEST(AssembleContext, RenderingIsDeterministic) {
    auto f = MakeFixture();
    EXPECT_EQ(assemble_context(f.h, f.sub, f.seeds, f.chunks, 5).Render(),
              assemble_context(f.h, f.sub, f.seeds, f.chunks, 5).Render());
}

TEST(AssembleContext, TokensAddUpAndAblationsOnlyRemove) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        auto h = testing::RandomHierarchy(testing::UniformInt(rng, 3, 50), 3, rng);
        ChunkStore chunks;
        for (const auto& [id, e] : h.entities) {
            for (const auto& c : e.source_chunk_ids) {
                chunks[c] = {c, fmt::format("text of {} with words", c), "doc", 5};
            }
        }
        std::vector<EntityId> base(h.layers[0].entity_ids.begin(), h.layers[0].entity_ids.end());
        std::shuffle(base.begin(), base.end(), rng);
        base.resize(std::min<std::size_t>(base.size(), testing::UniformInt(rng, 1, 8)));
        auto seeds = Seeds(base);
        auto sub = assemble_subgraph(h, lca_paths(h, seeds));
        const std::size_t top_c = testing::UniformInt(rng, 0, 6);
        auto full = assemble_context(h, sub, seeds, chunks, top_c);
        EXPECT_EQ(full.total_tokens, full.entity_tokens + full.relation_tokens + full.chunk_tokens);
        EXPECT_EQ(full.total_tokens, count_tokens(full.Render()));
        EXPECT_LE(full.chunk_ids.size(), top_c);

        auto no_rel = assemble_context(h, sub, seeds, chunks, top_c, {false, true});
        auto no_ctx = assemble_context(h, sub, seeds, chunks, top_c, {true, false});
        EXPECT_EQ(no_rel.entity_section, full.entity_section);
        EXPECT_EQ(no_rel.chunk_section, full.chunk_section);
        EXPECT_TRUE(no_rel.relation_section.empty());
        EXPECT_EQ(no_ctx.entity_section, full.entity_section);
        EXPECT_EQ(no_ctx.relation_section, full.relation_section);
        EXPECT_TRUE(no_ctx.chunk_section.empty());
        EXPECT_EQ(no_ctx.total_tokens, count_tokens(no_ctx.Render()));
    }
}

TEST(RedundancyReport, RatioCases) {
    auto f = MakeFixture();
    auto full = assemble_context(f.h, f.sub, f.seeds, f.chunks, 5);
    auto same = redundancy_report(full, full);
    ASSERT_TRUE(same.ratio.has_value());
    EXPECT_DOUBLE_EQ(*same.ratio, 1.0);

    ContextBundle empty;
    auto zero = redundancy_report(empty, full);
    ASSERT_TRUE(zero.ratio.has_value());
    EXPECT_DOUBLE_EQ(*zero.ratio, 0.0);

    auto undefined = redundancy_report(full, empty);
    EXPECT_FALSE(undefined.ratio.has_value());
    auto j = ToJson(undefined);
    EXPECT_TRUE(j["ratio"].is_null());
    EXPECT_EQ(j["sections"]["chunks"]["lean"], full.chunk_tokens);
}

TEST(ContextJson, CarriesSectionsAndTotals) {
    auto f = MakeFixture();
    auto bundle = assemble_context(f.h, f.sub, f.seeds, f.chunks, 5);
    auto j = ToJson(bundle);
    EXPECT_EQ(j["tokens"]["total"], bundle.total_tokens);
    EXPECT_EQ(j["rendering"], bundle.Render());
    EXPECT_EQ(j["chunk_ids"], (nlohmann::json{"k2", "k1"}));
}

}  // namespace
}  // namespace strata
