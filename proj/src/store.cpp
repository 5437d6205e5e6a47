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

#include "strata/store.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "strata/error.hpp"
#include "strata/providers.hpp"

namespace strata {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 8> kEmbeddingMagic = {'S', 'T', 'R', 'A', 'T', 'A', 'E', 'B'};
constexpr std::uint32_t kEmbeddingVersion = 1;
constexpr const char* kManifestName = "manifest.json";
constexpr const char* kEmbeddingsName = "embeddings.bin";
constexpr const char* kChunksName = "chunks.jsonl";

std::string
EntitiesFile(std::size_t layer) {
    return fmt::format("layer_{}.entities.jsonl", layer);
}

std::string
RelationsFile(std::size_t layer) {
    return fmt::format("layer_{}.relations.jsonl", layer);
}

// ---- ingest helpers -------------------------------------------------------

std::string
RequireString(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw LoadError(fmt::format("line {}: missing or non-string field '{}'", line, key), line);
    }
    auto value = it->get<std::string>();
    if (key != std::string_view("description") && key != std::string_view("text") &&
        value.empty()) {
        throw LoadError(fmt::format("line {}: field '{}' must not be empty", line, key), line);
    }
    return value;
}

std::string
OptionalString(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return {};
    }
    if (!it->is_string()) {
        throw LoadError(fmt::format("line {}: field '{}' must be a string", line, key), line);
    }
    return it->get<std::string>();
}

std::vector<ChunkId>
ChunkIds(const json& obj, std::size_t line) {
    auto it = obj.find("chunk_ids");
    if (it == obj.end() || !it->is_array()) {
        throw LoadError(fmt::format("line {}: entity needs a 'chunk_ids' array", line), line);
    }
    std::vector<ChunkId> out;
    std::unordered_set<ChunkId> seen;
    for (const auto& v : *it) {
        if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
            throw LoadError(fmt::format("line {}: chunk_ids must be non-empty strings", line),
                            line);
        }
        if (seen.insert(v.get<std::string>()).second) {
            out.push_back(v.get<std::string>());
        }
    }
    return out;
}

// ---- binary helpers -------------------------------------------------------

template <typename T>
void
PutLe(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
    }
}

class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {
    }

    template <typename T>
    T
    Le() {
        Need(sizeof(T));
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(T);
        return value;
    }

    std::string_view
    Bytes(std::size_t n) {
        Need(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    [[nodiscard]] bool
    done() const {
        return pos_ == data_.size();
    }

private:
    void
    Need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw Error(ErrorCode::kLoad, "embedding file is truncated");
        }
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

std::string
EncodeEmbeddings(const EmbeddingTable& table) {
    std::string out(kEmbeddingMagic.begin(), kEmbeddingMagic.end());
    PutLe<std::uint32_t>(out, kEmbeddingVersion);
    PutLe<std::uint32_t>(out, 0);
    PutLe<std::uint64_t>(out, table.dim());
    PutLe<std::uint64_t>(out, table.size());
    for (const auto& id : table.ids()) {
        PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out += id;
        for (double x : table.Get(id)) {
            PutLe<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
        }
    }
    return out;
}

EmbeddingTable
DecodeEmbeddings(std::string_view data) {
    ByteReader r(data);
    auto magic = r.Bytes(kEmbeddingMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kEmbeddingMagic.begin())) {
        throw Error(ErrorCode::kLoad, "embedding file has a bad magic header");
    }
    if (auto version = r.Le<std::uint32_t>(); version != kEmbeddingVersion) {
        throw Error(ErrorCode::kLoad, fmt::format("unsupported embedding file version {}", version));
    }
    r.Le<std::uint32_t>();
    const auto dim = r.Le<std::uint64_t>();
    const auto count = r.Le<std::uint64_t>();
    EmbeddingTable table(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = r.Le<std::uint32_t>();
        std::string id(r.Bytes(len));
        Embedding v(dim);
        for (auto& x : v) {
            x = std::bit_cast<double>(r.Le<std::uint64_t>());
        }
        if (table.Contains(id)) {
            throw Error(ErrorCode::kLoad, fmt::format("duplicate embedding for '{}'", id));
        }
        table.Put(id, std::move(v));
    }
    if (!r.done()) {
        throw Error(ErrorCode::kLoad, "embedding file has trailing bytes");
    }
    return table;
}

// ---- file helpers ---------------------------------------------------------

void
WriteAtomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::kLoad, fmt::format("cannot write '{}'", tmp.string()));
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            throw Error(ErrorCode::kLoad, fmt::format("short write to '{}'", tmp.string()));
        }
    }
    fs::rename(tmp, path);
}

std::string
ReadFile(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kLoad, fmt::format("missing index file '{}'", path.string()));
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json
EntityToJson(const Entity& e) {
    return {
        {"id", e.id},
        {"name", e.name},
        {"description", e.description},
        {"layer", e.layer},
        {"parent_id", e.parent_id ? json(*e.parent_id) : json(nullptr)},
        {"source_chunk_ids", e.source_chunk_ids},
    };
}

Entity
EntityFromJson(const json& j) {
    Entity e;
    e.id = j.at("id").get<std::string>();
    e.name = j.at("name").get<std::string>();
    e.description = j.at("description").get<std::string>();
    e.layer = j.at("layer").get<int>();
    if (!j.at("parent_id").is_null()) {
        e.parent_id = j.at("parent_id").get<std::string>();
    }
    e.source_chunk_ids = j.at("source_chunk_ids").get<std::vector<ChunkId>>();
    return e;
}

json
RelationToJson(const Relation& r) {
    return {
        {"id", r.id},
        {"source", r.source_id},
        {"target", r.target_id},
        {"description", r.description},
        {"layer", r.layer},
        {"kind", ToString(r.kind)},
    };
}

Relation
RelationFromJson(const json& j) {
    Relation r;
    r.id = j.at("id").get<std::string>();
    r.source_id = j.at("source").get<std::string>();
    r.target_id = j.at("target").get<std::string>();
    r.description = j.at("description").get<std::string>();
    r.layer = j.at("layer").get<int>();
    r.kind = RelationKindFromString(j.at("kind").get<std::string>());
    return r;
}

template <typename Fn>
void
ForEachJsonLine(const std::string& content, const std::string& file, Fn&& fn) {
    std::istringstream in(content);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) {
            continue;
        }
        try {
            fn(json::parse(line));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::kLoad,
                        fmt::format("{} line {}: {}", file, number, ex.what()));
        }
    }
}

json
ManifestBody(const IndexManifest& m) {
    auto j = ToJson(m);
    j.erase("content_hash");
    return j;
}

}  // namespace

// ---- ingest ---------------------------------------------------------------

IngestResult
ingest_stream(std::istream& in) {
    IngestResult result;
    auto& report = result.report;
    std::map<EntityId, std::pair<Entity, std::size_t>> entities;
    std::map<RelationId, std::pair<Relation, std::size_t>> relations;
    std::map<std::pair<EntityId, EntityId>, RelationId> pairs;

    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        ++report.lines;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& ex) {
            throw LoadError(fmt::format("line {}: malformed JSON: {}", number, ex.what()), number);
        }
        if (!obj.is_object()) {
            throw LoadError(fmt::format("line {}: expected a JSON object", number), number);
        }
        const auto type = RequireString(obj, "type", number);
        if (type == "entity") {
            Entity e;
            e.id = RequireString(obj, "id", number);
            e.name = RequireString(obj, "name", number);
            e.description = OptionalString(obj, "description", number);
            e.source_chunk_ids = ChunkIds(obj, number);
            if (e.source_chunk_ids.empty()) {
                throw LoadError(fmt::format("line {}: entity '{}' has no chunk_ids", number, e.id),
                                number);
            }
            auto [it, fresh] = entities.try_emplace(e.id, e, number);
            if (!fresh) {
                if (it->second.first != e) {
                    throw LoadError(fmt::format("line {}: entity '{}' conflicts with line {}",
                                                number, e.id, it->second.second),
                                    number);
                }
                ++report.duplicate_entities;
            }
        } else if (type == "relation") {
            Relation r;
            r.id = RequireString(obj, "id", number);
            r.source_id = RequireString(obj, "source", number);
            r.target_id = RequireString(obj, "target", number);
            r.description = OptionalString(obj, "description", number);
            if (r.source_id == r.target_id) {
                ++report.self_loops;
                continue;
            }
            auto [it, fresh] = relations.try_emplace(r.id, r, number);
            if (!fresh) {
                if (it->second.first != r) {
                    throw LoadError(fmt::format("line {}: relation '{}' conflicts with line {}",
                                                number, r.id, it->second.second),
                                    number);
                }
                ++report.duplicate_relations;
                continue;
            }
            auto key = std::minmax(r.source_id, r.target_id);
            if (!pairs.try_emplace({key.first, key.second}, r.id).second) {
                relations.erase(it);
                ++report.duplicate_relations;
            }
        } else if (type == "chunk") {
            Chunk c;
            c.id = RequireString(obj, "id", number);
            c.text = RequireString(obj, "text", number);
            c.doc_id = OptionalString(obj, "doc_id", number);
            c.token_count = count_tokens(c.text);
            auto [it, fresh] = result.chunks.try_emplace(c.id, c);
            if (!fresh) {
                if (it->second != c) {
                    throw LoadError(fmt::format("line {}: chunk '{}' redefined differently",
                                                number, c.id),
                                    number);
                }
                ++report.duplicate_chunks;
            }
        } else {
            throw LoadError(fmt::format("line {}: unknown record type '{}'", number, type),
                            number);
        }
    }

    if (entities.empty()) {
        throw LoadError("input contains no entities", 0);
    }
    for (const auto& [id, rec] : entities) {
        for (const auto& cid : rec.first.source_chunk_ids) {
            if (result.chunks.count(cid) == 0) {
                throw LoadError(fmt::format("line {}: entity '{}' references unknown chunk '{}'",
                                            rec.second, id, cid),
                                rec.second);
            }
        }
    }
    for (const auto& [id, rec] : relations) {
        for (const auto* end : {&rec.first.source_id, &rec.first.target_id}) {
            if (entities.count(*end) == 0) {
                throw LoadError(fmt::format("line {}: relation '{}' references unknown entity '{}'",
                                            rec.second, id, *end),
                                rec.second);
            }
        }
    }

    auto& h = result.hierarchy;
    h.layers.push_back(GraphLayer{0, {}, {}});
    for (auto& [id, rec] : entities) {
        h.AddEntity(std::move(rec.first));
    }
    for (auto& [id, rec] : relations) {
        h.AddRelation(std::move(rec.first));
    }
    report.entities = h.entities.size();
    report.relations = h.relations.size();
    report.chunks = result.chunks.size();
    if (auto problems = validate_hierarchy(h); !problems.empty()) {
        throw LoadError(fmt::format("ingested graph is inconsistent: {}", problems.front()), 0);
    }
    return result;
}

IngestResult
ingest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::kNotFound, fmt::format("cannot open input '{}'", path.string()));
    }
    return ingest_stream(in);
}

// ---- index persistence ----------------------------------------------------

std::string
Sha256Hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::kInternal, "sha256 computation failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

IndexManifest
save_index(const Hierarchy& h, const EmbeddingTable& embeddings, const ChunkStore& chunks,
           const fs::path& dir, const std::map<std::string, std::string>& provider_ids) {
    if (auto problems = validate_hierarchy(h); !problems.empty()) {
        throw Error(ErrorCode::kIntegrity,
                    fmt::format("refusing to save an invalid hierarchy: {}", problems.front()));
    }
    fs::create_directories(dir);
    // A stale manifest must never describe a half-written directory.
    fs::remove(dir / kManifestName);

    IndexManifest m;
    m.build_params = h.build_params;
    m.dim = embeddings.dim();
    m.providers = provider_ids;

    auto emit = [&](const std::string& name, const std::string& content) {
        WriteAtomic(dir / name, content);
        m.files[name] = Sha256Hex(content);
    };

    for (std::size_t i = 0; i < h.layers.size(); ++i) {
        const auto& layer = h.layers[i];
        std::string ents;
        for (const auto& id : layer.entity_ids) {
            ents += EntityToJson(h.entity(id)).dump() + "\n";
        }
        std::string rels;
        for (const auto& id : layer.relation_ids) {
            rels += RelationToJson(h.relation(id)).dump() + "\n";
        }
        emit(EntitiesFile(i), ents);
        emit(RelationsFile(i), rels);
        m.layers.push_back({layer.entity_ids.size(), layer.relation_ids.size()});
    }
    std::string chunk_lines;
    for (const auto& [id, c] : chunks) {
        chunk_lines += json{{"id", c.id},
                            {"doc_id", c.doc_id},
                            {"text", c.text},
                            {"token_count", c.token_count}}
                           .dump() +
                       "\n";
    }
    emit(kChunksName, chunk_lines);
    emit(kEmbeddingsName, EncodeEmbeddings(embeddings));

    m.content_hash = Sha256Hex(ManifestBody(m).dump());
    WriteAtomic(dir / kManifestName, ToJson(m).dump(2) + "\n");
    return m;
}

LoadedIndex
load_index(const fs::path& dir) {
    const auto manifest_path = dir / kManifestName;
    if (!fs::exists(manifest_path)) {
        throw Error(ErrorCode::kLoad,
                    fmt::format("'{}' is not an index (no manifest; missing or partial write)",
                                dir.string()));
    }
    IndexManifest m;
    try {
        m = ManifestFromJson(json::parse(ReadFile(manifest_path)));
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::kLoad, fmt::format("unreadable manifest: {}", ex.what()));
    }
    if (m.format_version != kIndexFormatVersion) {
        throw Error(ErrorCode::kLoad, fmt::format("unsupported index format_version {} (expected {})",
                                                  m.format_version, kIndexFormatVersion));
    }
    if (Sha256Hex(ManifestBody(m).dump()) != m.content_hash) {
        throw Error(ErrorCode::kIntegrity, "manifest content hash mismatch");
    }

    std::vector<std::string> required{kChunksName, kEmbeddingsName};
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        required.push_back(EntitiesFile(i));
        required.push_back(RelationsFile(i));
    }
    std::map<std::string, std::string> contents;
    for (const auto& name : required) {
        auto it = m.files.find(name);
        if (it == m.files.end()) {
            throw Error(ErrorCode::kLoad, fmt::format("manifest does not list '{}'", name));
        }
        auto data = ReadFile(dir / name);
        if (Sha256Hex(data) != it->second) {
            throw Error(ErrorCode::kIntegrity, fmt::format("hash mismatch for '{}'", name));
        }
        contents.emplace(name, std::move(data));
    }

    LoadedIndex out;
    auto& h = out.hierarchy;
    h.build_params = m.build_params;
    h.layers.resize(m.layers.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        h.layers[i].index = static_cast<int>(i);
    }
    try {
        for (std::size_t i = 0; i < m.layers.size(); ++i) {
            ForEachJsonLine(contents[EntitiesFile(i)], EntitiesFile(i), [&](const json& j) {
                auto e = EntityFromJson(j);
                if (e.layer != static_cast<int>(i) || h.entities.count(e.id) != 0) {
                    throw Error(ErrorCode::kIntegrity,
                                fmt::format("entity '{}' misplaced or duplicated", e.id));
                }
                h.AddEntity(std::move(e));
            });
            ForEachJsonLine(contents[RelationsFile(i)], RelationsFile(i), [&](const json& j) {
                auto r = RelationFromJson(j);
                if (r.layer != static_cast<int>(i) || h.relations.count(r.id) != 0) {
                    throw Error(ErrorCode::kIntegrity,
                                fmt::format("relation '{}' misplaced or duplicated", r.id));
                }
                h.AddRelation(std::move(r));
            });
        }
        ForEachJsonLine(contents[kChunksName], kChunksName, [&](const json& j) {
            Chunk c;
            c.id = j.at("id").get<std::string>();
            c.doc_id = j.at("doc_id").get<std::string>();
            c.text = j.at("text").get<std::string>();
            c.token_count = j.at("token_count").get<std::size_t>();
            out.chunks.emplace(c.id, std::move(c));
        });
    } catch (const Error&) {
        throw;
    } catch (const std::exception& ex) {
        throw Error(ErrorCode::kLoad, fmt::format("malformed index record: {}", ex.what()));
    }
    out.embeddings = DecodeEmbeddings(contents[kEmbeddingsName]);
    if (out.embeddings.dim() != m.dim) {
        throw Error(ErrorCode::kIntegrity, "embedding dim disagrees with manifest");
    }

    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        LayerStats got{h.layers[i].entity_ids.size(), h.layers[i].relation_ids.size()};
        if (got != m.layers[i]) {
            throw Error(ErrorCode::kIntegrity, fmt::format("layer {} counts disagree with manifest", i));
        }
    }
    if (auto problems = validate_hierarchy(h); !problems.empty()) {
        throw Error(ErrorCode::kIntegrity,
                    fmt::format("index violates hierarchy invariants: {}", problems.front()));
    }
    out.manifest = std::move(m);
    return out;
}

// ---- JSON -----------------------------------------------------------------

json
ToJson(const BuildParams& p) {
    json overrides = json::object();
    for (const auto& [layer, tau] : p.tau_overrides) {
        overrides[std::to_string(layer)] = tau;
    }
    return {
        {"cluster_size", p.cluster_size},
        {"tau", p.tau},
        {"max_layers", p.max_layers},
        {"seed", p.seed},
        {"stop_when_entities_leq",
         p.stop_when_entities_leq ? json(*p.stop_when_entities_leq) : json(nullptr)},
        {"tau_overrides", overrides},
        {"add_root", p.add_root},
        {"gmm_max_iters", p.gmm_max_iters},
        {"gmm_tol", p.gmm_tol},
    };
}

BuildParams
BuildParamsFromJson(const json& j) {
    BuildParams p;
    if (!j.is_object()) {
        throw Error(ErrorCode::kInvalidArgument, "build params must be a JSON object");
    }
    try {
        p.cluster_size = j.value("cluster_size", p.cluster_size);
        p.tau = j.value("tau", p.tau);
        p.max_layers = j.value("max_layers", p.max_layers);
        p.seed = j.value("seed", p.seed);
        if (auto it = j.find("stop_when_entities_leq"); it != j.end() && !it->is_null()) {
            p.stop_when_entities_leq = it->get<int>();
        }
        if (auto it = j.find("tau_overrides"); it != j.end()) {
            for (const auto& [layer, tau] : it->items()) {
                p.tau_overrides[std::stoi(layer)] = tau.get<int>();
            }
        }
        p.add_root = j.value("add_root", p.add_root);
        p.gmm_max_iters = j.value("gmm_max_iters", p.gmm_max_iters);
        p.gmm_tol = j.value("gmm_tol", p.gmm_tol);
    } catch (const std::exception& ex) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("bad build params: {}", ex.what()));
    }
    return p;
}

json
ToJson(const IngestReport& r) {
    return {
        {"lines", r.lines},
        {"entities", r.entities},
        {"relations", r.relations},
        {"chunks", r.chunks},
        {"dropped",
         {{"duplicate_entities", r.duplicate_entities},
          {"duplicate_relations", r.duplicate_relations},
          {"duplicate_chunks", r.duplicate_chunks},
          {"self_loops", r.self_loops}}},
    };
}

json
ToJson(const IndexManifest& m) {
    json layers = json::array();
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        layers.push_back(
            {{"layer", i}, {"entities", m.layers[i].entities}, {"relations", m.layers[i].relations}});
    }
    return {
        {"format_version", m.format_version},
        {"build_params", ToJson(m.build_params)},
        {"layers", layers},
        {"dim", m.dim},
        {"providers", m.providers},
        {"files", m.files},
        {"content_hash", m.content_hash},
    };
}

IndexManifest
ManifestFromJson(const json& j) {
    IndexManifest m;
    m.format_version = j.at("format_version").get<int>();
    m.build_params = BuildParamsFromJson(j.at("build_params"));
    for (const auto& layer : j.at("layers")) {
        m.layers.push_back({layer.at("entities").get<std::size_t>(),
                            layer.at("relations").get<std::size_t>()});
    }
    m.dim = j.at("dim").get<std::size_t>();
    m.providers = j.at("providers").get<std::map<std::string, std::string>>();
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    m.content_hash = j.at("content_hash").get<std::string>();
    return m;
}

}  // namespace strata
