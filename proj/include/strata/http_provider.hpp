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

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "json.hpp"
#include "strata/providers.hpp"

namespace strata {

/// Outcome of one POST. `status` is 0 when the request never produced an
/// HTTP response (connect failure, timeout).
struct HttpResponse {
    int status = 0;
    std::string body;
    std::string error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse Post(const std::string& url,
                              const std::string& json_body,
                              std::chrono::milliseconds timeout,
                              const std::string& bearer_token) = 0;
};

/// cpp-httplib backed transport. Plain http:// only.
std::shared_ptr<Transport> MakeHttpTransport();

/// Replays recorded responses in order and keeps every request body.
///
/// Fixture file format:
///   {"responses": [{"status": 200, "body": {...}}, {"status": 503, "body_text": "..."}]}
/// `body` is re-serialised as JSON; `body_text` is sent verbatim.
class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(std::vector<HttpResponse> responses);
    static std::shared_ptr<ReplayTransport> FromFixtureFile(const std::string& path);
    static std::shared_ptr<ReplayTransport> FromFixtureJson(const nlohmann::json& fixture);

    HttpResponse Post(const std::string& url,
                      const std::string& json_body,
                      std::chrono::milliseconds timeout,
                      const std::string& bearer_token) override;

    [[nodiscard]] std::vector<std::string> requests() const;
    [[nodiscard]] std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::deque<HttpResponse> responses_;
    std::vector<std::string> requests_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// JSON-over-HTTP client with bounded retries and a concurrency cap.
/// Retries transport failures, 429 and 5xx; other statuses fail at once.
/// Worst-case latency is bounded by (max_retries + 1) * timeout plus the
/// backoff schedule.
class RetryingClient {
public:
    RetryingClient(ProviderConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper = {});

    /// Throws Error(kProviderUnavailable) once attempts are exhausted or the
    /// body is not JSON.
    nlohmann::json PostJson(const nlohmann::json& body);

    [[nodiscard]] std::size_t attempts() const {
        return attempts_.load();
    }
    [[nodiscard]] const ProviderConfig& config() const {
        return config_;
    }

private:
    std::chrono::milliseconds BackoffFor(int retry) const;

    ProviderConfig config_;
    std::shared_ptr<Transport> transport_;
    Sleeper sleeper_;
    std::counting_semaphore<1024> slots_;
    std::atomic<std::size_t> attempts_{0};
};

/// POST {"texts": [...], "model": ...} -> {"vectors": [[...], ...]}
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(ProviderConfig config, std::shared_ptr<Transport> transport,
                          Sleeper sleeper = {});

    std::vector<Embedding> embed_batch(const std::vector<std::string>& texts) override;
    [[nodiscard]] std::size_t dim() const override {
        return client_.config().dim;
    }
    [[nodiscard]] std::string identifier() const override;

private:
    RetryingClient client_;
};

/// POST {"prompt": ..., "model": ...} -> {"text": ...}. Answers that fail to
/// parse are re-prompted once before raising GenerationParseError.
class HttpGenerationProvider final : public GenerationProvider {
public:
    HttpGenerationProvider(ProviderConfig config, std::shared_ptr<Transport> transport,
                           Sleeper sleeper = {});

    AggregateEntity generate_aggregate_entity(
        const std::vector<EntitySummary>& cluster_entities,
        const std::vector<std::string>& intra_relations) override;
    std::string generate_aggregate_relation(const EntitySummary& a,
                                            const EntitySummary& b,
                                            const std::vector<std::string>& cross_relations) override;
    std::string complete(const std::string& prompt) override;
    [[nodiscard]] std::string identifier() const override;

private:
    RetryingClient client_;
};

}  // namespace strata
