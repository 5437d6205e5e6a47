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

#include "strata/http_provider.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "strata/error.hpp"
#include "strata/log.hpp"
#include "strata/prompts.hpp"

namespace strata {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl
SplitEndpoint(const std::string& url) {
    auto scheme = url.find("://");
    auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public Transport {
public:
    HttpResponse Post(const std::string& url,
                      const std::string& json_body,
                      std::chrono::milliseconds timeout,
                      const std::string& bearer_token) override {
        auto [origin, path] = SplitEndpoint(url);
        httplib::Client client(origin);
        auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());
        if (!bearer_token.empty()) {
            client.set_bearer_token_auth(bearer_token);
        }
        auto result = client.Post(path, json_body, "application/json");
        HttpResponse out;
        if (!result) {
            out.error = httplib::to_string(result.error());
            return out;
        }
        out.status = result->status;
        out.body = result->body;
        return out;
    }
};

void
DefaultSleep(std::chrono::milliseconds ms) {
    std::this_thread::sleep_for(ms);
}

bool
Retryable(const HttpResponse& response) {
    return response.status == 0 || response.status == 429 || response.status >= 500;
}

std::vector<std::string>
CapInputs(const std::vector<std::string>& texts, int budget) {
    std::vector<std::string> out;
    out.reserve(texts.size());
    std::size_t capped = 0;
    for (const auto& text : texts) {
        if (count_tokens(text) > static_cast<std::size_t>(budget)) {
            out.push_back(TruncateTokens(text, static_cast<std::size_t>(budget)));
            ++capped;
        } else {
            out.push_back(text);
        }
    }
    if (capped > 0) {
        LogWarning(fmt::format("{} embedding input(s) capped at {} tokens", capped, budget));
    }
    return out;
}

}  // namespace

std::shared_ptr<Transport>
MakeHttpTransport() {
    return std::make_shared<HttplibTransport>();
}

ReplayTransport::ReplayTransport(std::vector<HttpResponse> responses)
    : responses_(responses.begin(), responses.end()) {
}

std::shared_ptr<ReplayTransport>
ReplayTransport::FromFixtureJson(const nlohmann::json& fixture) {
    if (!fixture.is_object() || !fixture.contains("responses") || !fixture["responses"].is_array()) {
        throw Error(ErrorCode::kInvalidArgument, "fixture must be an object with a 'responses' array");
    }
    std::vector<HttpResponse> responses;
    for (const auto& item : fixture["responses"]) {
        HttpResponse r;
        r.status = item.value("status", 200);
        if (item.contains("body_text")) {
            r.body = item["body_text"].get<std::string>();
        } else if (item.contains("body")) {
            r.body = item["body"].dump();
        }
        r.error = item.value("error", std::string());
        responses.push_back(std::move(r));
    }
    return std::make_shared<ReplayTransport>(std::move(responses));
}

std::shared_ptr<ReplayTransport>
ReplayTransport::FromFixtureFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::kNotFound, fmt::format("cannot open fixture '{}'", path));
    }
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        throw Error(ErrorCode::kInvalidArgument, fmt::format("fixture '{}' is not JSON", path));
    }
    return FromFixtureJson(doc);
}

HttpResponse
ReplayTransport::Post(const std::string&, const std::string& json_body,
                      std::chrono::milliseconds, const std::string&) {
    std::lock_guard lock(mutex_);
    requests_.push_back(json_body);
    if (responses_.empty()) {
        return HttpResponse{0, "", "fixture exhausted"};
    }
    auto next = std::move(responses_.front());
    responses_.pop_front();
    return next;
}

std::vector<std::string>
ReplayTransport::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::size_t
ReplayTransport::remaining() const {
    std::lock_guard lock(mutex_);
    return responses_.size();
}

RetryingClient::RetryingClient(ProviderConfig config, std::shared_ptr<Transport> transport,
                               Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(DefaultSleep)),
      slots_(std::min(config_.max_concurrency, 1024)) {
    config_.Validate();
    if (!transport_) {
        throw Error(ErrorCode::kInvalidArgument, "RetryingClient requires a transport");
    }
}

std::chrono::milliseconds
RetryingClient::BackoffFor(int retry) const {
    if (config_.backoff_ms.empty()) {
        return std::chrono::milliseconds(0);
    }
    auto idx = std::min<std::size_t>(static_cast<std::size_t>(retry), config_.backoff_ms.size() - 1);
    return std::chrono::milliseconds(config_.backoff_ms[idx]);
}

nlohmann::json
RetryingClient::PostJson(const nlohmann::json& body) {
    const std::string payload = body.dump();
    HttpResponse last;
    int made = 0;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleeper_(BackoffFor(attempt - 1));
        }
        slots_.acquire();
        ++attempts_;
        ++made;
        try {
            last = transport_->Post(config_.endpoint, payload,
                                    std::chrono::milliseconds(config_.timeout_ms), config_.api_key);
        } catch (...) {
            slots_.release();
            throw;
        }
        slots_.release();
        if (last.status >= 200 && last.status < 300) {
            auto doc = nlohmann::json::parse(last.body, nullptr, false);
            if (doc.is_discarded() || !doc.is_object()) {
                throw Error(ErrorCode::kProviderUnavailable,
                            fmt::format("{} returned a non-JSON body", config_.endpoint));
            }
            return doc;
        }
        if (!Retryable(last)) {
            break;
        }
    }
    std::string detail = last.status == 0 ? last.error : fmt::format("HTTP {}", last.status);
    throw Error(ErrorCode::kProviderUnavailable,
                fmt::format("{} unavailable after {} attempt(s): {}", config_.endpoint, made,
                            detail));
}

HttpEmbeddingProvider::HttpEmbeddingProvider(ProviderConfig config,
                                             std::shared_ptr<Transport> transport, Sleeper sleeper)
    : client_(std::move(config), std::move(transport), std::move(sleeper)) {
}

std::vector<Embedding>
HttpEmbeddingProvider::embed_batch(const std::vector<std::string>& texts) {
    CheckEmbedInput(texts);
    const auto& cfg = client_.config();
    nlohmann::json request = {{"texts", CapInputs(texts, cfg.token_budget)}};
    if (!cfg.model.empty()) {
        request["model"] = cfg.model;
    }
    auto reply = client_.PostJson(request);
    if (!reply.contains("vectors") || !reply["vectors"].is_array() ||
        reply["vectors"].size() != texts.size()) {
        throw Error(ErrorCode::kProviderUnavailable,
                    fmt::format("embedding reply must hold {} vectors", texts.size()));
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& row : reply["vectors"]) {
        if (!row.is_array() || row.size() != cfg.dim) {
            throw Error(ErrorCode::kProviderUnavailable,
                        fmt::format("embedding reply vector has wrong dimension (expected {})",
                                    cfg.dim));
        }
        Embedding v;
        v.reserve(cfg.dim);
        for (const auto& x : row) {
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                throw Error(ErrorCode::kProviderUnavailable, "embedding reply holds a non-finite value");
            }
            v.push_back(x.get<double>());
        }
        NormalizeInPlace(v);
        out.push_back(std::move(v));
    }
    return out;
}

std::string
HttpEmbeddingProvider::identifier() const {
    return "embedding:" + client_.config().Identifier();
}

HttpGenerationProvider::HttpGenerationProvider(ProviderConfig config,
                                               std::shared_ptr<Transport> transport,
                                               Sleeper sleeper)
    : client_(std::move(config), std::move(transport), std::move(sleeper)) {
}

std::string
HttpGenerationProvider::complete(const std::string& prompt) {
    nlohmann::json request = {{"prompt", prompt}};
    if (!client_.config().model.empty()) {
        request["model"] = client_.config().model;
    }
    auto reply = client_.PostJson(request);
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw Error(ErrorCode::kProviderUnavailable, "generation reply lacks a 'text' string");
    }
    return reply["text"].get<std::string>();
}

AggregateEntity
HttpGenerationProvider::generate_aggregate_entity(const std::vector<EntitySummary>& cluster_entities,
                                                  const std::vector<std::string>& intra_relations) {
    if (cluster_entities.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "cannot aggregate an empty cluster");
    }
    const auto budget = static_cast<std::size_t>(client_.config().token_budget);
    std::string prompt = RenderEntityAggregationPrompt(cluster_entities, intra_relations, budget);
    std::string raw = complete(prompt);
    std::string reason;
    if (auto parsed = ParseEntityAggregation(raw, cluster_entities, &reason)) {
        return *parsed;
    }
    raw = complete(prompt + ReformatReminder(PromptTemplate::kEntityAggregation));
    if (auto parsed = ParseEntityAggregation(raw, cluster_entities, &reason)) {
        return *parsed;
    }
    throw GenerationParseError(fmt::format("entity aggregation reply unusable: {}", reason), raw);
}

std::string
HttpGenerationProvider::generate_aggregate_relation(const EntitySummary& a,
                                                    const EntitySummary& b,
                                                    const std::vector<std::string>& cross_relations) {
    if (cross_relations.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "relation aggregation requires at least one cross relation");
    }
    const auto& cfg = client_.config();
    std::string prompt = RenderRelationAggregationPrompt(
        a, b, cross_relations, cfg.summary_word_limit, static_cast<std::size_t>(cfg.token_budget));
    std::string raw = complete(prompt);
    if (auto sentence = ParseRelationAggregation(raw)) {
        return *sentence;
    }
    raw = complete(prompt + ReformatReminder(PromptTemplate::kRelationAggregation));
    if (auto sentence = ParseRelationAggregation(raw)) {
        return *sentence;
    }
    throw GenerationParseError("relation aggregation reply is empty", raw);
}

std::string
HttpGenerationProvider::identifier() const {
    return "generation:" + client_.config().Identifier();
}

Providers
MakeProviders(const ProviderConfig& embedding, const ProviderConfig& generation) {
    embedding.Validate();
    generation.Validate();
    Providers out;
    if (embedding.kind == "mock") {
        out.embedding = std::make_shared<MockEmbeddingProvider>(embedding.dim);
    } else {
        out.embedding = std::make_shared<HttpEmbeddingProvider>(embedding, MakeHttpTransport());
    }
    if (generation.kind == "mock") {
        out.generation = std::make_shared<MockGenerationProvider>(generation.description_word_limit);
    } else {
        out.generation = std::make_shared<HttpGenerationProvider>(generation, MakeHttpTransport());
        out.max_concurrency = static_cast<std::size_t>(generation.max_concurrency);
    }
    return out;
}

}  // namespace strata
