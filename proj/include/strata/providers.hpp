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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace strata {

/// L2-normalised dense vector. Dimension is fixed per index.
using Embedding = std::vector<double>;

/// Whitespace token count (Unicode White_Space separators). Additive over
/// concatenation with any whitespace separator.
std::size_t count_tokens(std::string_view text);

/// First `budget` whitespace tokens of `text`, re-joined with single spaces.
/// Returns `text` unchanged when it is already within budget.
std::string TruncateTokens(std::string_view text, std::size_t budget);

double Dot(const Embedding& a, const Embedding& b);
void NormalizeInPlace(Embedding& v);

struct EntitySummary {
    std::string name;
    std::string description;
};

struct Finding {
    std::string summary;
    std::string explanation;

    bool operator==(const Finding&) const = default;
};

struct AggregateEntity {
    std::string name;
    std::string description;
    std::vector<Finding> findings;

    bool operator==(const AggregateEntity&) const = default;
};

/// Connection and budget settings for one provider. `kind` selects the
/// implementation: "mock" (offline, deterministic) or "http".
struct ProviderConfig {
    std::string kind = "mock";
    std::string endpoint;
    std::string model;
    std::string api_key;
    int max_retries = 3;
    std::vector<int> backoff_ms{250, 1000, 4000};
    int timeout_ms = 30000;
    int max_concurrency = 4;
    int token_budget = 2048;
    std::size_t dim = 256;          // embeddings only
    int summary_word_limit = 60;    // relation summaries only
    int description_word_limit = 48;  // mock entity descriptions only

    void Validate() const;
    /// Human-readable identifier recorded in index manifests.
    [[nodiscard]] std::string Identifier() const;

    bool operator==(const ProviderConfig&) const = default;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// One normalised vector per input text, order preserved. Rejects an
    /// empty list or any text that is blank after trimming.
    virtual std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) = 0;

    [[nodiscard]] virtual std::size_t dim() const = 0;
    [[nodiscard]] virtual std::string identifier() const = 0;
};

class GenerationProvider {
public:
    virtual ~GenerationProvider() = default;

    /// Abstract entity summarising a cluster. The name never equals any
    /// member name.
    virtual AggregateEntity generate_aggregate_entity(
        const std::vector<EntitySummary>& cluster_entities,
        const std::vector<std::string>& intra_relations) = 0;

    /// Single sentence relating two aggregates. `cross_relations` must be
    /// non-empty.
    virtual std::string generate_aggregate_relation(
        const EntitySummary& a,
        const EntitySummary& b,
        const std::vector<std::string>& cross_relations) = 0;

    /// Free-form completion used by the query pass-through.
    virtual std::string complete(const std::string& prompt) = 0;

    [[nodiscard]] virtual std::string identifier() const = 0;
};

/// Character 3-gram feature hashing into a fixed-width bag of features.
class MockEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(std::size_t dim = 256);

    std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) override;
    [[nodiscard]] std::size_t dim() const override {
        return dim_;
    }
    [[nodiscard]] std::string identifier() const override;

    [[nodiscard]] Embedding embed_one(std::string_view text) const;

private:
    std::size_t dim_;
};

/// Template-based generator; a pure function of its inputs.
class MockGenerationProvider final : public GenerationProvider {
public:
    explicit MockGenerationProvider(int description_word_limit = 48);

    AggregateEntity generate_aggregate_entity(
        const std::vector<EntitySummary>& cluster_entities,
        const std::vector<std::string>& intra_relations) override;
    std::string generate_aggregate_relation(const EntitySummary& a,
                                            const EntitySummary& b,
                                            const std::vector<std::string>& cross_relations) override;
    std::string complete(const std::string& prompt) override;
    [[nodiscard]] std::string identifier() const override;

private:
    int description_word_limit_;
};

struct Providers {
    std::shared_ptr<EmbeddingProvider> embedding;
    std::shared_ptr<GenerationProvider> generation;
    /// Upper bound on generation calls issued in parallel by the builder.
    std::size_t max_concurrency = 1;
};

/// Instantiates providers from configs ("mock" or "http").
Providers MakeProviders(const ProviderConfig& embedding, const ProviderConfig& generation);

/// Shared precondition check for embed_batch implementations.
void CheckEmbedInput(const std::vector<std::string>& texts);

}  // namespace strata
