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

#include "strata/cli.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "strata/index.hpp"
#include "strata/log.hpp"
#include "strata/store.hpp"
#include "strata/synthetic.hpp"

namespace strata {

namespace fs = std::filesystem;
using nlohmann::json;

int
ExitCodeFor(ErrorCode code) {
    switch (code) {
        case ErrorCode::kInvalidArgument:
        case ErrorCode::kNotFound:
        case ErrorCode::kLoad:
        case ErrorCode::kIntegrity:
            return kExitData;
        case ErrorCode::kProviderUnavailable:
        case ErrorCode::kGenerationParse:
            return kExitProvider;
        case ErrorCode::kInternal:
            break;
    }
    return kExitInternal;
}

namespace {

void
RejectUnknownKeys(const json& j, const std::set<std::string>& known, std::string_view what) {
    if (!j.is_object()) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("{} must be a JSON object", what));
    }
    for (const auto& [key, value] : j.items()) {
        if (known.count(key) == 0) {
            throw Error(ErrorCode::kInvalidArgument,
                        fmt::format("unknown key '{}' in {}", key, what));
        }
    }
}

json
ReadJsonFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::kNotFound, fmt::format("cannot open '{}'", path));
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& ex) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("'{}' is not valid JSON: {}", path, ex.what()));
    }
}

/// Marks a failure that happened while resolving options, before any work.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config_path;
    std::string providers_path;

    // build
    std::string input;
    std::string out_dir;
    int cluster_size = 0;
    int tau = 0;
    int max_layers = 0;
    std::uint64_t seed = 0;
    bool add_root = false;

    // query / bench / stats
    std::string index_dir;
    std::string query;
    std::string queries_path;
    std::size_t top_n = 0;
    std::size_t top_c = 0;
    int max_hops = 0;
    bool no_relations = false;
    bool no_context = false;
    std::string baseline;
    std::string format;
    bool generate = false;

    // synth
    std::string corpus_out;
    std::string queries_out;
    std::uint64_t synth_seed = 7;
};

RunConfig
Resolve(const Options& o, const CLI::App& app, bool& providers_explicit) {
    RunConfig cfg;
    providers_explicit = false;
    try {
        if (!o.config_path.empty()) {
            auto j = ReadJsonFile(o.config_path);
            providers_explicit = j.contains("providers");
            cfg = RunConfigFromJson(j, cfg);
        }
        if (!o.providers_path.empty()) {
            auto j = ReadJsonFile(o.providers_path);
            cfg = RunConfigFromJson(json{{"providers", j}}, cfg);
            providers_explicit = true;
        }
    } catch (const Error& ex) {
        throw UsageError(ex.what());
    }
    auto given = [&](const char* name) {
        for (const auto* sub : app.get_subcommands()) {
            const auto* opt = sub->get_option_no_throw(name);
            if (opt != nullptr && opt->count() > 0) {
                return true;
            }
        }
        return false;
    };
    if (given("--cluster-size")) cfg.build.cluster_size = o.cluster_size;
    if (given("--tau")) cfg.build.tau = o.tau;
    if (given("--max-layers")) cfg.build.max_layers = o.max_layers;
    if (given("--seed")) cfg.build.seed = o.seed;
    if (given("--add-root")) cfg.build.add_root = o.add_root;
    if (given("--top-n")) cfg.retrieval.top_n = o.top_n;
    if (given("--top-c")) cfg.retrieval.top_c = o.top_c;
    if (given("--max-hops")) cfg.retrieval.max_hops = o.max_hops;
    if (given("--no-relations")) cfg.retrieval.include_relations = false;
    if (given("--no-context")) cfg.retrieval.include_chunks = false;
    try {
        cfg.build.Validate();
        cfg.embedding.Validate();
        cfg.generation.Validate();
    } catch (const Error& ex) {
        throw UsageError(ex.what());
    }
    if (cfg.retrieval.top_n < 1) {
        throw UsageError("--top-n must be >= 1");
    }
    if (cfg.retrieval.max_hops < 1) {
        throw UsageError("--max-hops must be >= 1");
    }
    return cfg;
}

std::map<std::string, std::string>
ProviderIds(const Providers& p) {
    return {{"embedding", p.embedding->identifier()}, {"generation", p.generation->identifier()}};
}

Index
LoadForQuery(const std::string& dir, RunConfig& cfg, bool providers_explicit, Providers& providers) {
    auto loaded = load_index(dir);
    if (!providers_explicit) {
        // Without explicit provider settings, embed queries the same way the
        // default mock embedded the index.
        cfg.embedding.dim = loaded.manifest.dim;
    }
    providers = MakeProviders(cfg.embedding, cfg.generation);
    const auto& recorded = loaded.manifest.providers;
    if (auto it = recorded.find("embedding");
        it != recorded.end() && it->second != providers.embedding->identifier()) {
        LogWarning(fmt::format("query embedder '{}' differs from index embedder '{}'",
                               providers.embedding->identifier(), it->second));
    }
    return Index{std::move(loaded.hierarchy), std::move(loaded.embeddings),
                 std::move(loaded.chunks)};
}

QueryOptions
MakeQueryOptions(const RunConfig& cfg) {
    QueryOptions q;
    q.top_n = cfg.retrieval.top_n;
    q.top_c = cfg.retrieval.top_c;
    q.flags.include_relations = cfg.retrieval.include_relations;
    q.flags.include_chunks = cfg.retrieval.include_chunks;
    q.max_hops = cfg.retrieval.max_hops;
    return q;
}

int
CmdBuild(const Options& o, RunConfig& cfg, std::ostream& out) {
    auto providers = MakeProviders(cfg.embedding, cfg.generation);
    auto ingested = ingest(o.input);
    const auto ingest_report = ingested.report;
    auto built = build_index(std::move(ingested), cfg.build, providers);
    auto manifest = save_index(built.index.hierarchy, built.index.embeddings, built.index.chunks,
                               o.out_dir, ProviderIds(providers));
    json layers = json::array();
    for (std::size_t i = 0; i < manifest.layers.size(); ++i) {
        layers.push_back({{"layer", i},
                          {"entities", manifest.layers[i].entities},
                          {"relations", manifest.layers[i].relations}});
    }
    json lambda = json::object();
    for (const auto& layer : built.report.layers) {
        json hist = json::object();
        for (const auto& [value, count] : layer.lambda_histogram) {
            hist[std::to_string(value)] = count;
        }
        lambda[std::to_string(layer.layer)] = hist;
    }
    out << json{{"command", "build"},
                {"index_dir", o.out_dir},
                {"content_hash", manifest.content_hash},
                {"layers", layers},
                {"lambda_histogram", lambda},
                {"provider_calls",
                 {{"embedding", built.report.embedding_calls},
                  {"entity_generation", built.report.entity_generations},
                  {"relation_generation", built.report.relation_generations}}},
                {"ingest", ToJson(ingest_report)}}
               .dump(2)
        << "\n";
    return kExitOk;
}

int
CmdQuery(const Options& o, RunConfig& cfg, bool providers_explicit, std::ostream& out) {
    Providers providers;
    const auto index = LoadForQuery(o.index_dir, cfg, providers_explicit, providers);
    auto options = MakeQueryOptions(cfg);
    options.strategy = o.baseline == "flat" ? Strategy::kFlat : Strategy::kLca;
    const auto result = run_query(index, o.query, options, *providers.embedding);
    std::optional<std::string> answer;
    if (o.generate) {
        answer = providers.generation->complete(
            fmt::format("Answer the question from the evidence below.\n\nQuestion: {}\n\nEvidence:\n{}",
                        o.query, result.bundle.Render()));
    }
    if (o.format == "text") {
        out << result.bundle.Render();
        if (answer) {
            out << "\n# Answer\n" << *answer << "\n";
        }
        return kExitOk;
    }
    auto j = ToJson(result);
    j["command"] = "query";
    if (answer) {
        j["answer"] = *answer;
    }
    out << j.dump(2) << "\n";
    return kExitOk;
}

int
CmdBench(const Options& o, RunConfig& cfg, bool providers_explicit, std::ostream& out) {
    Providers providers;
    const auto index = LoadForQuery(o.index_dir, cfg, providers_explicit, providers);
    std::ifstream in(o.queries_path);
    if (!in) {
        throw Error(ErrorCode::kNotFound, fmt::format("cannot open '{}'", o.queries_path));
    }
    std::vector<std::string> queries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (count_tokens(line) > 0) {
            queries.push_back(line);
        }
    }
    const auto bench = run_bench(index, queries, MakeQueryOptions(cfg), *providers.embedding);
    if (o.format == "csv") {
        out << ToCsv(bench);
    } else {
        auto j = ToJson(bench);
        j["command"] = "bench";
        j["max_hops"] = cfg.retrieval.max_hops;
        out << j.dump(2) << "\n";
    }
    return kExitOk;
}

int
CmdStats(const Options& o, std::ostream& out) {
    const auto loaded = load_index(o.index_dir);
    const auto& h = loaded.hierarchy;
    json layers = json::array();
    for (std::size_t i = 0; i < h.layers.size(); ++i) {
        std::map<std::string, std::size_t> kinds;
        for (const auto& rid : h.layers[i].relation_ids) {
            ++kinds[std::string(ToString(h.relation(rid).kind))];
        }
        json entry{{"layer", i},
                   {"entities", h.layers[i].entity_ids.size()},
                   {"relations", h.layers[i].relation_ids.size()},
                   {"relation_kinds", kinds}};
        if (i + 1 < h.layers.size() && !h.layers[i + 1].entity_ids.empty()) {
            entry["mean_cluster_size"] = static_cast<double>(h.layers[i].entity_ids.size()) /
                                         static_cast<double>(h.layers[i + 1].entity_ids.size());
        }
        layers.push_back(entry);
    }
    out << json{{"command", "stats"},
                {"index_dir", o.index_dir},
                {"format_version", loaded.manifest.format_version},
                {"content_hash", loaded.manifest.content_hash},
                {"dim", loaded.manifest.dim},
                {"providers", loaded.manifest.providers},
                {"build_params", ToJson(loaded.manifest.build_params)},
                {"chunks", loaded.chunks.size()},
                {"embeddings", loaded.embeddings.size()},
                {"layers", layers}}
               .dump(2)
        << "\n";
    return kExitOk;
}

int
CmdSynth(const Options& o, std::ostream& out) {
    SyntheticParams params;
    params.seed = o.synth_seed;
    const auto corpus = generate_synthetic(params);
    auto write = [](const std::string& path, const std::string& content) {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f || !f.write(content.data(), static_cast<std::streamsize>(content.size()))) {
            throw Error(ErrorCode::kLoad, fmt::format("cannot write '{}'", path));
        }
    };
    write(o.corpus_out, corpus.jsonl);
    std::string queries;
    for (const auto& q : corpus.queries) {
        queries += q + "\n";
    }
    if (!o.queries_out.empty()) {
        write(o.queries_out, queries);
    }
    out << json{{"command", "synth"},
                {"corpus", o.corpus_out},
                {"queries_file", o.queries_out.empty() ? json(nullptr) : json(o.queries_out)},
                {"queries", corpus.queries.size()},
                {"seed", params.seed}}
               .dump(2)
        << "\n";
    return kExitOk;
}

void
WriteError(std::ostream& out, std::string_view code, const std::string& message,
           std::optional<std::size_t> line = std::nullopt) {
    json err{{"code", code}, {"message", message}};
    if (line) {
        err["line"] = *line;
    }
    out << json{{"error", err}}.dump() << "\n";
}

}  // namespace

ProviderConfig
ProviderConfigFromJson(const json& j, ProviderConfig c) {
    RejectUnknownKeys(j,
                      {"kind", "endpoint", "model", "api_key", "max_retries", "backoff_ms",
                       "timeout_ms", "max_concurrency", "token_budget", "dim",
                       "summary_word_limit", "description_word_limit"},
                      "provider config");
    try {
        c.kind = j.value("kind", c.kind);
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model = j.value("model", c.model);
        c.api_key = j.value("api_key", c.api_key);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
        c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
        c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
        c.token_budget = j.value("token_budget", c.token_budget);
        c.dim = j.value("dim", c.dim);
        c.summary_word_limit = j.value("summary_word_limit", c.summary_word_limit);
        c.description_word_limit = j.value("description_word_limit", c.description_word_limit);
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("bad provider config: {}", ex.what()));
    }
    return c;
}

RunConfig
RunConfigFromJson(const json& j, RunConfig base) {
    RejectUnknownKeys(j, {"providers", "build", "retrieval"}, "run config");
    if (auto it = j.find("providers"); it != j.end()) {
        RejectUnknownKeys(*it, {"embedding", "generation"}, "providers");
        if (it->contains("embedding")) {
            base.embedding = ProviderConfigFromJson(it->at("embedding"), base.embedding);
        }
        if (it->contains("generation")) {
            base.generation = ProviderConfigFromJson(it->at("generation"), base.generation);
        }
    }
    if (auto it = j.find("build"); it != j.end()) {
        auto merged = ToJson(base.build);
        merged.update(*it);
        base.build = BuildParamsFromJson(merged);
    }
    if (auto it = j.find("retrieval"); it != j.end()) {
        RejectUnknownKeys(*it, {"top_n", "top_c", "include_relations", "include_chunks", "max_hops"},
                          "retrieval config");
        auto& r = base.retrieval;
        try {
            r.top_n = it->value("top_n", r.top_n);
            r.top_c = it->value("top_c", r.top_c);
            r.include_relations = it->value("include_relations", r.include_relations);
            r.include_chunks = it->value("include_chunks", r.include_chunks);
            r.max_hops = it->value("max_hops", r.max_hops);
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::kInvalidArgument, fmt::format("bad retrieval config: {}", ex.what()));
        }
    }
    return base;
}

json
ToJson(const ProviderConfig& c, bool redact) {
    std::string key = c.api_key;
    if (redact && !key.empty()) {
        key = "<redacted>";
    }
    return {
        {"kind", c.kind},
        {"endpoint", c.endpoint},
        {"model", c.model},
        {"api_key", key},
        {"max_retries", c.max_retries},
        {"backoff_ms", c.backoff_ms},
        {"timeout_ms", c.timeout_ms},
        {"max_concurrency", c.max_concurrency},
        {"token_budget", c.token_budget},
        {"dim", c.dim},
        {"summary_word_limit", c.summary_word_limit},
        {"description_word_limit", c.description_word_limit},
    };
}

json
ToJson(const RunConfig& c, bool redact) {
    return {
        {"providers",
         {{"embedding", ToJson(c.embedding, redact)}, {"generation", ToJson(c.generation, redact)}}},
        {"build", ToJson(c.build)},
        {"retrieval",
         {{"top_n", c.retrieval.top_n},
          {"top_c", c.retrieval.top_c},
          {"include_relations", c.retrieval.include_relations},
          {"include_chunks", c.retrieval.include_chunks},
          {"max_hops", c.retrieval.max_hops}}},
    };
}

int
run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::mutex err_mutex;
    auto previous = SetLogSink([&](const json& event) {
        std::lock_guard lock(err_mutex);
        err << event.dump() << "\n";
    });
    struct Restore {
        LogSink sink;
        ~Restore() {
            SetLogSink(std::move(sink));
        }
    } restore{std::move(previous)};

    Options o;
    CLI::App app{"Hierarchical knowledge-graph index: build, query, benchmark.", "strata"};
    app.require_subcommand(1);
    app.add_option("--config", o.config_path, "JSON run config (providers, build, retrieval)")
        ->check(CLI::ExistingFile);

    auto* build = app.add_subcommand("build", "Ingest a JSONL graph and build an index");
    build->add_option("--input", o.input, "JSONL file of entities, relations and chunks")
        ->required()
        ->check(CLI::ExistingFile);
    build->add_option("--out", o.out_dir, "Index directory to write")->required();
    build->add_option("--cluster-size", o.cluster_size, "Target entities per cluster");
    build->add_option("--tau", o.tau, "Crossing-relation threshold for generated relations");
    build->add_option("--max-layers", o.max_layers, "Layer cap, counting the base layer");
    build->add_option("--seed", o.seed, "Clustering seed");
    build->add_flag("--add-root", o.add_root, "Force a single root aggregate on top");
    build->add_option("--providers", o.providers_path, "JSON provider config")
        ->check(CLI::ExistingFile);

    auto* query = app.add_subcommand("query", "Retrieve context for one question");
    query->add_option("--index", o.index_dir, "Index directory")->required();
    query->add_option("--query", o.query, "Question text")->required();
    query->add_option("--top-n", o.top_n, "Seed entities to anchor on");
    query->add_option("--top-c", o.top_c, "Source chunks to include");
    query->add_flag("--no-relations", o.no_relations, "Drop relations from the context");
    query->add_flag("--no-context", o.no_context, "Drop source chunks from the context");
    query->add_option("--baseline", o.baseline, "Use a baseline retriever instead")
        ->check(CLI::IsMember({"flat"}));
    query->add_option("--max-hops", o.max_hops, "Hop limit for the flat baseline");
    query->add_option("--format", o.format, "Output format")
        ->check(CLI::IsMember({"json", "text"}))
        ->default_val("json");
    query->add_flag("--generate", o.generate, "Pass the context to the generation provider");
    query->add_option("--providers", o.providers_path, "JSON provider config")
        ->check(CLI::ExistingFile);

    auto* bench = app.add_subcommand("bench", "Compare context size against the flat baseline");
    bench->add_option("--index", o.index_dir, "Index directory")->required();
    bench->add_option("--queries", o.queries_path, "File with one question per line")
        ->required()
        ->check(CLI::ExistingFile);
    bench->add_option("--top-n", o.top_n, "Seed entities to anchor on");
    bench->add_option("--top-c", o.top_c, "Source chunks to include");
    bench->add_option("--max-hops", o.max_hops, "Hop limit for the flat baseline");
    bench->add_flag("--no-relations", o.no_relations, "Drop relations from both contexts");
    bench->add_flag("--no-context", o.no_context, "Drop source chunks from both contexts");
    bench->add_option("--format", o.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->default_val("json");
    bench->add_option("--providers", o.providers_path, "JSON provider config")
        ->check(CLI::ExistingFile);

    auto* stats = app.add_subcommand("stats", "Summarise an index");
    stats->add_option("--index", o.index_dir, "Index directory")->required();

    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and query set");
    synth->add_option("--out", o.corpus_out, "JSONL corpus path")->required();
    synth->add_option("--queries", o.queries_out, "Query file path");
    synth->add_option("--seed", o.synth_seed, "Generator seed");

    std::vector<std::string> argv_store{"strata"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) {
        argv.push_back(a.data());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        bool providers_explicit = false;
        RunConfig cfg = Resolve(o, app, providers_explicit);
        LogEvent({{"event", "config"}, {"config", ToJson(cfg, true)}});
        if (build->parsed()) {
            return CmdBuild(o, cfg, out);
        }
        if (query->parsed()) {
            return CmdQuery(o, cfg, providers_explicit, out);
        }
        if (bench->parsed()) {
            return CmdBench(o, cfg, providers_explicit, out);
        }
        if (stats->parsed()) {
            return CmdStats(o, out);
        }
        return CmdSynth(o, out);
    } catch (const UsageError& ex) {
        WriteError(out, "usage", ex.what());
        return kExitUsage;
    } catch (const LoadError& ex) {
        WriteError(out, ToString(ex.code()), ex.what(), ex.line());
        return ExitCodeFor(ex.code());
    } catch (const Error& ex) {
        WriteError(out, ToString(ex.code()), ex.what());
        return ExitCodeFor(ex.code());
    } catch (const fs::filesystem_error& ex) {
        WriteError(out, "io_error", ex.what());
        return kExitData;
    } catch (const std::exception& ex) {
        WriteError(out, "internal", ex.what());
        return kExitInternal;
    }
}

}  // namespace strata
