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

#include <bit>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "strata/error.hpp"
#include "strata/index.hpp"
#include "strata/log.hpp"
#include "strata/store.hpp"
#include "test_support.hpp"

namespace strata {
namespace {

namespace fs = std::filesystem;

IngestResult
IngestText(const std::string& text) {
    std::istringstream in(text);
    return ingest_stream(in);
}

std::size_t
LoadErrorLine(const std::string& text) {
    try {
        IngestText(text);
    } catch (const LoadError& e) {
        EXPECT_EQ(e.code(), ErrorCode::kLoad);
        return e.line();
    }
    ADD_FAILURE() << "no LoadError for:\n" << text;
    return 0;
}

const char* kTiny =
    R"({"type": "chunk", "id": "c1", "doc_id": "d", "text": "Alpha meets beta."}
{"type": "entity", "id": "a", "name": "Alpha", "description": "first", "chunk_ids": ["c1"]}
{"type": "entity", "id": "b", "name": "Beta", "description": "second", "chunk_ids": ["c1"]}
{"type": "relation", "id": "r1", "source": "a", "target": "b", "description": "meets"}
)";

TEST(Ingest, ThreeRecordKinds) {
    auto r = IngestText(kTiny);
    EXPECT_EQ(r.hierarchy.layers.size(), 1u);
    EXPECT_EQ(r.hierarchy.entities.size(), 2u);
    EXPECT_EQ(r.hierarchy.relations.size(), 1u);
    EXPECT_EQ(r.chunks.at("c1").token_count, 3u);
    EXPECT_EQ(r.report.lines, 4u);
    EXPECT_EQ(r.hierarchy.entity("a").source_chunk_ids, std::vector<ChunkId>{"c1"});
}

TEST(Ingest, ErrorsNameTheLine) {
    const std::string chunk = R"({"type": "chunk", "id": "c1", "text": "t"})";
    EXPECT_EQ(LoadErrorLine(chunk + "\n{not json\n"), 2u);
    EXPECT_EQ(LoadErrorLine(chunk + "\n\n" + R"({"type": "entity", "id": "a", "chunk_ids": ["c1"]})"),
              3u);
    EXPECT_EQ(LoadErrorLine(chunk + "\n" + R"({"type": "widget", "id": "w"})"), 2u);
    EXPECT_EQ(LoadErrorLine(chunk + "\n" + R"({"type": "entity", "id": "a", "name": "A", "chunk_ids": []})"),
              2u);
    // Dangling references are reported at the record that made them.
    EXPECT_EQ(LoadErrorLine(chunk + "\n" +
                            R"({"type": "entity", "id": "a", "name": "A", "chunk_ids": ["c1"]})" + "\n" +
                            R"({"type": "relation", "id": "r", "source": "a", "target": "zz"})"),
              3u);
    EXPECT_EQ(LoadErrorLine(R"({"type": "entity", "id": "a", "name": "A", "chunk_ids": ["nope"]})"), 1u);
    EXPECT_EQ(LoadErrorLine(chunk + "\n" +
                            R"({"type": "entity", "id": "a", "name": "A", "chunk_ids": ["c1"]})" + "\n" +
                            R"({"type": "entity", "id": "a", "name": "B", "chunk_ids": ["c1"]})"),
              3u);
    EXPECT_THROW(IngestText(chunk + "\n"), LoadError);
}

TEST(Ingest, MissingFileIsNotFound) {
    try {
        ingest("/nonexistent/strata/input.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kNotFound);
    }
}

TEST(Ingest, TenThousandLinesMatchCountOracle) {
    std::mt19937_64 rng(1234);
    std::ostringstream out;
    std::set<std::string> chunks, entities, relations;
    std::set<std::pair<std::string, std::string>> pairs;
    std::size_t dup_chunks = 0, dup_entities = 0, dup_relations = 0, self_loops = 0, lines = 0;
    std::vector<std::string> emitted_chunks, emitted_entities;
    auto emit = [&](const nlohmann::json& j) {
        out << j.dump() << "\n";
        ++lines;
    };
    for (int i = 0; i < 200; ++i) {
        const auto id = fmt::format("c{}", i);
        emit({{"type", "chunk"}, {"id", id}, {"text", "chunk " + id}});
        chunks.insert(id);
        emitted_chunks.push_back(id);
    }
    while (lines < 10000) {
        const auto roll = testing::UniformInt(rng, 0, 99);
        if (roll < 25 || entities.size() < 2) {
            const auto id = fmt::format("e{}", testing::UniformInt(rng, 0, 1999));
            const auto chunk = fmt::format("c{}", std::hash<std::string>{}(id) % 200);
            emit({{"type", "entity"}, {"id", id}, {"name", "N" + id}, {"chunk_ids", {chunk}}});
            if (!entities.insert(id).second) {
                ++dup_entities;
            } else {
                emitted_entities.push_back(id);
            }
        } else if (roll < 27) {
            const auto id = emitted_chunks[testing::UniformInt(rng, 0, emitted_chunks.size() - 1)];
            emit({{"type", "chunk"}, {"id", id}, {"text", "chunk " + id}});
            ++dup_chunks;
        } else {
            const auto& a = emitted_entities[testing::UniformInt(rng, 0, emitted_entities.size() - 1)];
            const auto& b = roll < 30 ? a
                                      : emitted_entities[testing::UniformInt(rng, 0, emitted_entities.size() - 1)];
            const auto id = fmt::format("r{}", lines);
            emit({{"type", "relation"}, {"id", id}, {"source", a}, {"target", b}});
            if (a == b) {
                ++self_loops;
            } else if (!pairs.insert(std::minmax(a, b)).second) {
                ++dup_relations;
            } else {
                relations.insert(id);
            }
        }
    }
    auto r = IngestText(out.str());
    EXPECT_EQ(r.report.lines, lines);
    EXPECT_EQ(r.report.entities, entities.size());
    EXPECT_EQ(r.report.relations, relations.size());
    EXPECT_EQ(r.report.chunks, chunks.size());
    EXPECT_EQ(r.report.duplicate_entities, dup_entities);
    EXPECT_EQ(r.report.duplicate_relations, dup_relations);
    EXPECT_EQ(r.report.duplicate_chunks, dup_chunks);
    EXPECT_EQ(r.report.self_loops, self_loops);
    EXPECT_EQ(r.hierarchy.layers[0].relation_ids, relations);
}

class IndexStore : public ::testing::Test {
protected:
    void SetUp() override {
        previous_ = SetLogSink(nullptr);
        auto g = testing::RandomBaseGraph(60, 3.0, 17);
        IngestResult in{g.hierarchy, g.chunks, {}};
        auto providers = MakeProviders(ProviderConfig{}, ProviderConfig{});
        BuildParams params;
        params.cluster_size = 6;
        params.seed = 3;
        built_ = build_index(std::move(in), params, providers).index;
    }
    void TearDown() override {
        SetLogSink(std::move(previous_));
    }

    IndexManifest Save(const fs::path& dir) {
        return save_index(built_.hierarchy, built_.embeddings, built_.chunks, dir,
                          {{"embedding", "mock-embed"}, {"generation", "mock-gen"}});
    }

    LogSink previous_;
    Index built_;
};

TEST_F(IndexStore, RoundTripIsExact) {
    testing::TempDir tmp;
    auto manifest = Save(tmp.path());
    auto loaded = load_index(tmp.path());
    EXPECT_EQ(loaded.hierarchy, built_.hierarchy);
    EXPECT_EQ(loaded.chunks, built_.chunks);
    EXPECT_EQ(loaded.manifest, manifest);
    ASSERT_EQ(loaded.embeddings.ids(), built_.embeddings.ids());
    for (const auto& id : built_.embeddings.ids()) {
        const auto& a = built_.embeddings.Get(id);
        const auto& b = loaded.embeddings.Get(id);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            ASSERT_EQ(std::bit_cast<std::uint64_t>(a[k]), std::bit_cast<std::uint64_t>(b[k]));
        }
    }
    EXPECT_EQ(manifest.layers.size(), built_.hierarchy.layers.size());
    EXPECT_EQ(manifest.dim, 256u);
    EXPECT_EQ(manifest.providers.at("embedding"), "mock-embed");
}

TEST_F(IndexStore, SavingTwiceGivesTheSameHash) {
    testing::TempDir a, b;
    EXPECT_EQ(Save(a.path()).content_hash, Save(b.path()).content_hash);
    EXPECT_EQ(testing::ReadText(a.path() / "manifest.json"),
              testing::ReadText(b.path() / "manifest.json"));
}

TEST_F(IndexStore, CorruptByteIsAnIntegrityError) {
    testing::TempDir tmp;
    Save(tmp.path());
    const auto target = tmp.path() / "layer_1.entities.jsonl";
    auto text = testing::ReadText(target);
    text[text.size() / 2] ^= 0x01;
    testing::WriteText(target, text);
    try {
        load_index(tmp.path());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kIntegrity);
        EXPECT_NE(std::string(e.what()).find("layer_1.entities.jsonl"), std::string::npos);
    }
}

TEST_F(IndexStore, EditedManifestFailsContentHash) {
    testing::TempDir tmp;
    Save(tmp.path());
    auto j = nlohmann::json::parse(testing::ReadText(tmp.path() / "manifest.json"));
    j["build_params"]["tau"] = 9;
    testing::WriteText(tmp.path() / "manifest.json", j.dump(2));
    try {
        load_index(tmp.path());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kIntegrity);
    }
}

TEST_F(IndexStore, MissingManifestIsNotAnIndex) {
    testing::TempDir tmp;
    Save(tmp.path());
    fs::remove(tmp.path() / "manifest.json");
    try {
        load_index(tmp.path());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kLoad);
        EXPECT_NE(std::string(e.what()).find("not an index"), std::string::npos);
    }
}

TEST_F(IndexStore, FutureFormatVersionIsRejected) {
    testing::TempDir tmp;
    Save(tmp.path());
    auto j = nlohmann::json::parse(testing::ReadText(tmp.path() / "manifest.json"));
    j["format_version"] = kIndexFormatVersion + 1;
    testing::WriteText(tmp.path() / "manifest.json", j.dump(2));
    try {
        load_index(tmp.path());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kLoad);
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
}

TEST_F(IndexStore, InvalidHierarchyIsNotWritten) {
    testing::TempDir tmp;
    auto broken = built_.hierarchy;
    broken.entities.at("n0000").source_chunk_ids.clear();
    EXPECT_THROW(save_index(broken, built_.embeddings, built_.chunks, tmp.path()), Error);
    EXPECT_FALSE(fs::exists(tmp.path() / "manifest.json"));
}

TEST(StoreJson, BuildParamsRoundTrip) {
    BuildParams p;
    p.cluster_size = 7;
    p.tau = 2;
    p.seed = 11;
    p.add_root = true;
    p.tau_overrides[2] = 5;
    p.stop_when_entities_leq = 4;
    EXPECT_EQ(BuildParamsFromJson(ToJson(p)), p);
    EXPECT_EQ(BuildParamsFromJson(nlohmann::json{{"tau", 1}}).cluster_size, BuildParams{}.cluster_size);
}

TEST(StoreJson, Sha256KnownVector) {
    EXPECT_EQ(Sha256Hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace strata
