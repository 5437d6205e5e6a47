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
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "strata/aggregation.hpp"
#include "strata/context.hpp"
#include "strata/kg_model.hpp"

namespace strata {

inline constexpr int kIndexFormatVersion = 1;

struct IngestReport {
    std::size_t lines = 0;
    std::size_t entities = 0;
    std::size_t relations = 0;
    std::size_t chunks = 0;
    std::size_t duplicate_entities = 0;
    std::size_t duplicate_relations = 0;
    std::size_t duplicate_chunks = 0;
    std::size_t self_loops = 0;
};

struct IngestResult {
    Hierarchy hierarchy;  // base layer only
    ChunkStore chunks;
    IngestReport report;
};

/// Reads one JSON object per line, tagged by "type" (entity, relation,
/// chunk). Blank lines are skipped. Exact duplicates and repeated relations
/// between the same unordered endpoint pair are dropped and counted.
/// Throws LoadError naming the offending line.
IngestResult ingest(const std::filesystem::path& path);
IngestResult ingest_stream(std::istream& in);

struct LayerStats {
    std::size_t entities = 0;
    std::size_t relations = 0;

    bool operator==(const LayerStats&) const = default;
};

struct IndexManifest {
    int format_version = kIndexFormatVersion;
    BuildParams build_params;
    std::vector<LayerStats> layers;
    std::size_t dim = 0;
    std::map<std::string, std::string> providers;  // role -> identifier
    std::map<std::string, std::string> files;      // file name -> sha256 hex
    std::string content_hash;

    bool operator==(const IndexManifest&) const = default;
};

struct LoadedIndex {
    Hierarchy hierarchy;
    EmbeddingTable embeddings;
    ChunkStore chunks;
    IndexManifest manifest;
};

/// Writes the index into `dir` (created if needed). Every file goes through
/// a temporary name and a rename; the manifest is written last.
IndexManifest save_index(const Hierarchy& h, const EmbeddingTable& embeddings,
                         const ChunkStore& chunks, const std::filesystem::path& dir,
                         const std::map<std::string, std::string>& provider_ids = {});

/// Verifies version, file hashes, content hash and hierarchy invariants
/// before returning anything. Throws Error(kLoad or kIntegrity).
LoadedIndex load_index(const std::filesystem::path& dir);

std::string Sha256Hex(std::string_view data);

nlohmann::json ToJson(const BuildParams& params);
BuildParams BuildParamsFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const IngestReport& report);
nlohmann::json ToJson(const IndexManifest& manifest);
IndexManifest ManifestFromJson(const nlohmann::json& j);

}  // namespace strata
