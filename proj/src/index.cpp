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

#include "strata/index.hpp"

#include <fmt/format.h>

#include "strata/error.hpp"

namespace strata {

BuiltIndex
build_index(IngestResult ingested, const BuildParams& params, Providers& providers) {
    BuiltIndex out;
    out.index.hierarchy = std::move(ingested.hierarchy);
    out.index.chunks = std::move(ingested.chunks);
    out.index.embeddings = EmbeddingTable(providers.embedding->dim());
    out.report = build_hierarchy(out.index.hierarchy, params, providers, out.index.embeddings);
    return out;
}

QueryResult
run_query(const Index& index, const std::string& query, const QueryOptions& options,
          EmbeddingProvider& embedder) {
    QueryResult result;
    result.strategy = options.strategy;
    result.seeds = anchor_seeds(index.hierarchy, index.embeddings, query, options.top_n, embedder);
    if (options.strategy == Strategy::kFlat) {
        result.subgraph = flat_path_retrieve(index.hierarchy, result.seeds, options.max_hops);
    } else {
        result.subgraph = assemble_subgraph(index.hierarchy, lca_paths(index.hierarchy, result.seeds));
    }
    if (!options.flags.include_relations) {
        result.subgraph.path_relations.clear();
        result.subgraph.inter_cluster_relations.clear();
    }
    result.bundle = assemble_context(index.hierarchy, result.subgraph, result.seeds, index.chunks,
                                     options.top_c, options.flags);
    return result;
}

BenchResult
run_bench(const Index& index, const std::vector<std::string>& queries, const QueryOptions& options,
          EmbeddingProvider& embedder) {
    BenchResult out;
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& q : queries) {
        auto lca_opts = options;
        lca_opts.strategy = Strategy::kLca;
        auto flat_opts = options;
        flat_opts.strategy = Strategy::kFlat;
        const auto lca = run_query(index, q, lca_opts, embedder);
        const auto flat = run_query(index, q, flat_opts, embedder);
        const auto report = redundancy_report(lca.bundle, flat.bundle);
        out.rows.push_back({q, report.lean_tokens, report.baseline_tokens, report.ratio});
        if (report.ratio) {
            sum += *report.ratio;
            ++defined;
        }
    }
    if (defined > 0) {
        out.mean_ratio = sum / static_cast<double>(defined);
    }
    return out;
}

std::string_view
ToString(Strategy strategy) {
    return strategy == Strategy::kFlat ? "flat" : "lca";
}

nlohmann::json
ToJson(const QueryResult& result) {
    return {
        {"strategy", ToString(result.strategy)},
        {"seeds", ToJson(result.seeds)},
        {"subgraph", ToJson(result.subgraph)},
        {"context", ToJson(result.bundle)},
    };
}

nlohmann::json
ToJson(const BenchResult& result) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : result.rows) {
        rows.push_back({{"query", r.query},
                        {"lca_tokens", r.lca_tokens},
                        {"flat_tokens", r.flat_tokens},
                        {"ratio", r.ratio ? nlohmann::json(*r.ratio) : nlohmann::json(nullptr)}});
    }
    return {
        {"queries", result.rows.size()},
        {"rows", rows},
        {"mean_ratio",
         result.mean_ratio ? nlohmann::json(*result.mean_ratio) : nlohmann::json(nullptr)},
    };
}

namespace {

std::string
CsvField(const std::string& text) {
    if (text.find_first_of(",\"\n\r") == std::string::npos) {
        return text;
    }
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string
ToCsv(const BenchResult& result) {
    std::string out = "query,lca_tokens,flat_tokens,ratio\n";
    for (const auto& r : result.rows) {
        out += fmt::format("{},{},{},{}\n", CsvField(r.query), r.lca_tokens, r.flat_tokens,
                           r.ratio ? fmt::format("{:.6f}", *r.ratio) : std::string());
    }
    if (!result.rows.empty()) {
        out += fmt::format("MEAN,,,{}\n", result.mean_ratio ? fmt::format("{:.6f}", *result.mean_ratio)
                                                            : std::string());
    }
    return out;
}

}  // namespace strata
