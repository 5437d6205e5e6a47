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

#include <thread>

#include "httplib.h"
#include "strata/error.hpp"
#include "strata/http_provider.hpp"
#include "strata/log.hpp"
#include "test_support.hpp"

namespace strata {
namespace {

using std::chrono::milliseconds;

ProviderConfig
HttpConfig(int retries = 3) {
    ProviderConfig c;
    c.kind = "http";
    c.endpoint = "http://127.0.0.1:1/unused";
    c.model = "test-model";
    c.max_retries = retries;
    c.dim = 2;
    return c;
}

HttpResponse
Status(int status, std::string body = "{}") {
    return {status, std::move(body), {}};
}

struct SleepLog {
    std::vector<milliseconds> delays;
    Sleeper sleeper() {
        return [this](milliseconds d) { delays.push_back(d); };
    }
};

class SilenceLogs : public ::testing::Test {
protected:
    void SetUp() override {
        previous_ = SetLogSink(nullptr);
    }
    void TearDown() override {
        SetLogSink(std::move(previous_));
    }
    LogSink previous_;
};

using RetryingClientTest = SilenceLogs;

TEST_F(RetryingClientTest, RetriesTransientFailuresWithBackoff) {
    auto transport = std::make_shared<ReplayTransport>(std::vector<HttpResponse>{
        Status(503), Status(429), Status(0), Status(200, R"({"ok": true})")});
    SleepLog log;
    RetryingClient client(HttpConfig(3), transport, log.sleeper());
    auto reply = client.PostJson({{"x", 1}});
    EXPECT_TRUE(reply["ok"].get<bool>());
    EXPECT_EQ(client.attempts(), 4u);
    EXPECT_EQ(log.delays, (std::vector<milliseconds>{milliseconds(250), milliseconds(1000),
                                                     milliseconds(4000)}));
}

TEST_F(RetryingClientTest, LastBackoffEntryRepeats) {
    auto cfg = HttpConfig(4);
    cfg.backoff_ms = {10, 20};
    auto transport = std::make_shared<ReplayTransport>(
        std::vector<HttpResponse>{Status(500), Status(500), Status(500), Status(500), Status(200)});
    SleepLog log;
    RetryingClient client(cfg, transport, log.sleeper());
    client.PostJson({});
    EXPECT_EQ(log.delays, (std::vector<milliseconds>{milliseconds(10), milliseconds(20),
                                                     milliseconds(20), milliseconds(20)}));
}

TEST_F(RetryingClientTest, GivesUpAfterRetriesAsProviderUnavailable) {
    auto transport = std::make_shared<ReplayTransport>(
        std::vector<HttpResponse>{Status(502), Status(502), Status(502), Status(200)});
    SleepLog log;
    RetryingClient client(HttpConfig(2), transport, log.sleeper());
    try {
        client.PostJson({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kProviderUnavailable);
    }
    EXPECT_EQ(client.attempts(), 3u);
    EXPECT_EQ(transport->remaining(), 1u);
}

TEST_F(RetryingClientTest, ClientErrorsAreNotRetried) {
    auto transport =
        std::make_shared<ReplayTransport>(std::vector<HttpResponse>{Status(400), Status(200)});
    SleepLog log;
    RetryingClient client(HttpConfig(3), transport, log.sleeper());
    EXPECT_THROW(client.PostJson({}), Error);
    EXPECT_EQ(client.attempts(), 1u);
    EXPECT_TRUE(log.delays.empty());
}

TEST_F(RetryingClientTest, NonJsonBodyIsProviderError) {
    auto transport =
        std::make_shared<ReplayTransport>(std::vector<HttpResponse>{Status(200, "<html>")});
    RetryingClient client(HttpConfig(0), transport, [](milliseconds) {});
    EXPECT_THROW(client.PostJson({}), Error);
}

using HttpProviderTest = SilenceLogs;

TEST_F(HttpProviderTest, EmbeddingFixtureRetriesThenNormalises) {
    auto transport = ReplayTransport::FromFixtureFile(
        (testing::DataDir() / "embedding_retry_reply.json").string());
    SleepLog log;
    HttpEmbeddingProvider p(HttpConfig(), transport, log.sleeper());
    auto vs = p.embed_batch({"first", "second"});
    ASSERT_EQ(vs.size(), 2u);
    EXPECT_NEAR(vs[0][0], 0.6, 1e-12);
    EXPECT_NEAR(vs[0][1], 0.8, 1e-12);
    EXPECT_NEAR(vs[1][1], 1.0, 1e-12);
    auto requests = transport->requests();
    ASSERT_EQ(requests.size(), 2u);
    auto body = nlohmann::json::parse(requests[0]);
    EXPECT_EQ(body["texts"], (nlohmann::json{"first", "second"}));
    EXPECT_EQ(body["model"], "test-model");
}

TEST_F(HttpProviderTest, EmbeddingDimensionMismatchFails) {
    auto transport = std::make_shared<ReplayTransport>(
        std::vector<HttpResponse>{Status(200, R"({"vectors": [[1, 2, 3]]})")});
    HttpEmbeddingProvider p(HttpConfig(0), transport, [](milliseconds) {});
    EXPECT_THROW(p.embed_batch({"x"}), Error);
}

TEST_F(HttpProviderTest, EmbeddingInputsAreCappedAtTokenBudget) {
    auto cfg = HttpConfig(0);
    cfg.token_budget = 3;
    auto transport = std::make_shared<ReplayTransport>(
        std::vector<HttpResponse>{Status(200, R"({"vectors": [[1, 0]]})")});
    HttpEmbeddingProvider p(cfg, transport, [](milliseconds) {});
    p.embed_batch({"one two three four five"});
    auto body = nlohmann::json::parse(transport->requests().at(0));
    EXPECT_EQ(body["texts"][0], "one two three");
}

TEST_F(HttpProviderTest, EntityFixtureParsesIntoThreeFields) {
    auto transport = ReplayTransport::FromFixtureFile(
        (testing::DataDir() / "entity_aggregation_reply.json").string());
    HttpGenerationProvider g(HttpConfig(), transport, [](milliseconds) {});
    auto out = g.generate_aggregate_entity({{"Tide Gauge A", "gauge"}, {"Sediment Team", "team"}},
                                           {"Tide Gauge A feeds Sediment Team"});
    EXPECT_EQ(out.name, "Coastal Survey Programme");
    EXPECT_FALSE(out.description.empty());
    ASSERT_EQ(out.findings.size(), 2u);
    EXPECT_EQ(out.findings[0].summary, "Shared instruments");
    auto prompt = nlohmann::json::parse(transport->requests().at(0))["prompt"].get<std::string>();
    EXPECT_NE(prompt.find("Tide Gauge A feeds Sediment Team"), std::string::npos);
}

TEST_F(HttpProviderTest, RelationFixtureYieldsOneSentence) {
    auto transport = ReplayTransport::FromFixtureFile(
        (testing::DataDir() / "relation_aggregation_reply.json").string());
    HttpGenerationProvider g(HttpConfig(), transport, [](milliseconds) {});
    auto s = g.generate_aggregate_relation({"Surveys", "field teams"}, {"Models", "modellers"},
                                           {"a supplies b", "b reviews a"});
    EXPECT_EQ(s,
              "The survey collection supplies measurements that the modelling group calibrates "
              "against and reviews.");
}

TEST_F(HttpProviderTest, UnparseableEntityReplyIsRepromptedOnce) {
    const std::string good =
        R"({"entity_name": "Fruit Set", "entity_description": "Fruit.", "findings": []})";
    auto transport = std::make_shared<ReplayTransport>(std::vector<HttpResponse>{
        Status(200, nlohmann::json{{"text", "Here you go: not json"}}.dump()),
        Status(200, nlohmann::json{{"text", good}}.dump())});
    HttpGenerationProvider g(HttpConfig(), transport, [](milliseconds) {});
    auto out = g.generate_aggregate_entity({{"Apple", "a"}, {"Pear", "p"}}, {});
    EXPECT_EQ(out.name, "Fruit Set");
    auto requests = transport->requests();
    ASSERT_EQ(requests.size(), 2u);
    auto first = nlohmann::json::parse(requests[0])["prompt"].get<std::string>();
    auto second = nlohmann::json::parse(requests[1])["prompt"].get<std::string>();
    EXPECT_GT(second.size(), first.size());
    EXPECT_EQ(second.rfind(first, 0), 0u);
}

TEST_F(HttpProviderTest, PersistentGarbageRaisesParseErrorWithRawText) {
    auto transport = std::make_shared<ReplayTransport>(std::vector<HttpResponse>{
        Status(200, nlohmann::json{{"text", "nope"}}.dump()),
        Status(200, nlohmann::json{{"text", "still nope"}}.dump())});
    HttpGenerationProvider g(HttpConfig(), transport, [](milliseconds) {});
    try {
        g.generate_aggregate_entity({{"Apple", "a"}}, {});
        FAIL();
    } catch (const GenerationParseError& e) {
        EXPECT_EQ(e.code(), ErrorCode::kGenerationParse);
        EXPECT_EQ(e.raw_text(), "still nope");
    }
}

TEST_F(HttpProviderTest, LiveTransportAgainstLocalServer) {
    httplib::Server server;
    std::string seen_auth;
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json vectors = nlohmann::json::array();
        for (std::size_t i = 0; i < body["texts"].size(); ++i) {
            vectors.push_back({1.0, 1.0});
        }
        res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
    });
    server.Post("/generate", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"text": "pong"})", "application/json");
    });
    server.Post("/flaky", [](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
        res.set_content("busy", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto cfg = HttpConfig(1);
    cfg.api_key = "secret-token";
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/embed";
    HttpEmbeddingProvider embed(cfg, MakeHttpTransport(), [](milliseconds) {});
    auto vs = embed.embed_batch({"a", "b", "c"});
    EXPECT_EQ(vs.size(), 3u);
    EXPECT_NEAR(vs[0][0], std::sqrt(0.5), 1e-12);
    EXPECT_EQ(seen_auth, "Bearer secret-token");

    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/generate";
    HttpGenerationProvider gen(cfg, MakeHttpTransport(), [](milliseconds) {});
    EXPECT_EQ(gen.complete("ping"), "pong");

    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/flaky";
    RetryingClient flaky(cfg, MakeHttpTransport(), [](milliseconds) {});
    EXPECT_THROW(flaky.PostJson({}), Error);
    EXPECT_EQ(flaky.attempts(), 2u);

    server.stop();
    worker.join();
}

TEST_F(HttpProviderTest, UnreachableEndpointIsProviderUnavailable) {
    auto cfg = HttpConfig(1);
    cfg.timeout_ms = 500;
    cfg.endpoint = "http://127.0.0.1:9/embed";
    HttpEmbeddingProvider embed(cfg, MakeHttpTransport(), [](milliseconds) {});
    try {
        embed.embed_batch({"x"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kProviderUnavailable);
    }
}

}  // namespace
}  // namespace strata
