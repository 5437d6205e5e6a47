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

#include <fmt/format.h>

#include <algorithm>
#include <cstdint>

#include "strata/error.hpp"
#include "strata/providers.hpp"

namespace strata {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t
Fnv1a(std::string_view bytes) {
    std::uint64_t h = kFnvOffset;
    for (char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

std::string
AsciiLower(std::string_view text) {
    std::string out(text);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
    }
    return out;
}

bool
IsBlank(std::string_view text) {
    return count_tokens(text) == 0;
}

}  // namespace

void
CheckEmbedInput(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "embed_batch requires at least one text");
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (IsBlank(texts[i])) {
            throw Error(ErrorCode::kInvalidArgument,
                        fmt::format("embed_batch text #{} is empty", i));
        }
    }
}

void
ProviderConfig::Validate() const {
    if (kind != "mock" && kind != "http") {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("provider kind must be 'mock' or 'http', got '{}'", kind));
    }
    if (max_retries < 0) {
        throw Error(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
    }
    if (max_concurrency < 1) {
        throw Error(ErrorCode::kInvalidArgument, "max_concurrency must be >= 1");
    }
    if (timeout_ms < 1) {
        throw Error(ErrorCode::kInvalidArgument, "timeout_ms must be >= 1");
    }
    if (std::any_of(backoff_ms.begin(), backoff_ms.end(), [](int ms) { return ms < 0; })) {
        throw Error(ErrorCode::kInvalidArgument, "backoff_ms entries must be >= 0");
    }
    if (token_budget < 1 || summary_word_limit < 1 || description_word_limit < 1) {
        throw Error(ErrorCode::kInvalidArgument, "token budgets must be >= 1");
    }
    if (dim < 1) {
        throw Error(ErrorCode::kInvalidArgument, "embedding dim must be >= 1");
    }
    if (kind == "http" && endpoint.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "http provider requires an endpoint");
    }
}

std::string
ProviderConfig::Identifier() const {
    if (kind == "mock") {
        return fmt::format("mock(dim={},words={})", dim, description_word_limit);
    }
    return fmt::format("http({},model={})", endpoint, model);
}

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) {
        throw Error(ErrorCode::kInvalidArgument, "embedding dim must be >= 1");
    }
}

Embedding
MockEmbeddingProvider::embed_one(std::string_view text) const {
    Embedding v(dim_, 0.0);
    const std::string lowered = AsciiLower(text);
    std::string_view view(lowered);
    if (view.size() < 3) {
        v[Fnv1a(view) % dim_] += 1.0;
    } else {
        for (std::size_t i = 0; i + 3 <= view.size(); ++i) {
            v[Fnv1a(view.substr(i, 3)) % dim_] += 1.0;
        }
    }
    NormalizeInPlace(v);
    return v;
}

std::vector<Embedding>
MockEmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    CheckEmbedInput(texts);
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        out.push_back(embed_one(text));
    }
    return out;
}

std::string
MockEmbeddingProvider::identifier() const {
    return fmt::format("mock-embedding(dim={})", dim_);
}

MockGenerationProvider::MockGenerationProvider(int description_word_limit)
    : description_word_limit_(description_word_limit) {
    if (description_word_limit_ < 1) {
        throw Error(ErrorCode::kInvalidArgument, "description_word_limit must be >= 1");
    }
}

AggregateEntity
MockGenerationProvider::generate_aggregate_entity(const std::vector<EntitySummary>& cluster_entities,
                                                  const std::vector<std::string>& intra_relations) {
    if (cluster_entities.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "cannot aggregate an empty cluster");
    }
    const std::size_t head = std::min<std::size_t>(2, cluster_entities.size());
    std::string name;
    for (std::size_t i = 0; i < head; ++i) {
        if (i > 0) {
            name += "+";
        }
        name += cluster_entities[i].name;
    }
    name += " Group";
    auto collides = [&](const std::string& candidate) {
        return std::any_of(cluster_entities.begin(), cluster_entities.end(),
                           [&](const EntitySummary& e) { return e.name == candidate; });
    };
    while (collides(name)) {
        name += " (aggregate)";
    }

    std::string joined;
    for (const auto& e : cluster_entities) {
        if (!joined.empty()) {
            joined += "; ";
        }
        joined += e.description;
    }
    std::string description = fmt::format("{} ({} members, {} internal relations): {}", name,
                                          cluster_entities.size(), intra_relations.size(), joined);
    AggregateEntity out;
    out.name = std::move(name);
    out.description =
        TruncateTokens(description, static_cast<std::size_t>(description_word_limit_));
    return out;
}

std::string
MockGenerationProvider::generate_aggregate_relation(const EntitySummary& a,
                                                    const EntitySummary& b,
                                                    const std::vector<std::string>& cross_relations) {
    if (cross_relations.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "relation aggregation requires at least one cross relation");
    }
    return fmt::format("{} relates to {} via {} underlying relations.", a.name, b.name,
                       cross_relations.size());
}

std::string
MockGenerationProvider::complete(const std::string& prompt) {
    return fmt::format("[mock answer] context of {} tokens received.", count_tokens(prompt));
}

std::string
MockGenerationProvider::identifier() const {
    return fmt::format("mock-generation(words={})", description_word_limit_);
}

}  // namespace strata
