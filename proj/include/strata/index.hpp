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

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "strata/aggregation.hpp"
#include "strata/context.hpp"
#include "strata/kg_model.hpp"
#include "strata/providers.hpp"
#include "strata/retrieval.hpp"
#include "strata/store.hpp"

namespace strata {

/// A built (or loaded) index: hierarchy, entity embeddings and source chunks.
struct Index {
    Hierarchy hierarchy;
    EmbeddingTable embeddings;
    ChunkStore chunks;
};

struct BuiltIndex {
    Index index;
    BuildReport report;
};

/// Builds the hierarchy on top of an ingested base layer.
BuiltIndex build_index(IngestResult ingested, const BuildParams& params, Providers& providers);

enum class Strategy { kLca, kFlat };

struct QueryOptions {
    std::size_t top_n = 10;
    std::size_t top_c = 5;
    ContextFlags flags;
    Strategy strategy = Strategy::kLca;
    int max_hops = 4;  // flat baseline only
};

struct QueryResult {
    SeedSet seeds;
    RetrievedSubgraph subgraph;
    ContextBundle bundle;
    Strategy strategy = Strategy::kLca;
};

QueryResult run_query(const Index& index, const std::string& query, const QueryOptions& options,
                      EmbeddingProvider& embedder);

struct BenchRow {
    std::string query;
    std::size_t lca_tokens = 0;
    std::size_t flat_tokens = 0;
    std::optional<double> ratio;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::optional<double> mean_ratio;  // over rows with a defined ratio
};

/// Runs every query with both strategies (same flags, same rendering) and
/// reports LCA tokens / flat tokens.
BenchResult run_bench(const Index& index, const std::vector<std::string>& queries,
                      const QueryOptions& options, EmbeddingProvider& embedder);

std::string_view ToString(Strategy strategy);
nlohmann::json ToJson(const QueryResult& result);
nlohmann::json ToJson(const BenchResult& result);
std::string ToCsv(const BenchResult& result);

}  // namespace strata
