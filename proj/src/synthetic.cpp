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

#include "strata/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <random>
#include <set>

#include "json.hpp"
#include "strata/error.hpp"

namespace strata {

namespace {

struct DomainVocab {
    const char* label;
    std::array<const char*, 5> topics;
    std::array<const char*, 4> kinds;
};

constexpr std::array<DomainVocab, 4> kDomains = {{
    {"oceanography",
     {"tidal dynamics", "reef ecology", "deep currents", "coastal sediment", "plankton blooms"},
     {"current", "organism", "survey", "instrument"}},
    {"astronautics",
     {"orbital transfer", "propulsion chemistry", "thermal shielding", "guidance software",
      "docking procedures"},
     {"maneuver", "engine", "material", "module"}},
    {"agronomy",
     {"soil nitrogen", "irrigation scheduling", "seed genetics", "pest control", "crop rotation"},
     {"practice", "cultivar", "treatment", "field trial"}},
    {"metallurgy",
     {"alloy casting", "heat treatment", "corrosion testing", "powder sintering", "weld inspection"},
     {"alloy", "furnace", "process", "defect"}},
}};

constexpr std::array<const char*, 20> kSyllables = {
    "ka", "lo", "mir", "den", "sa", "vu", "tor", "el", "ny", "bra",
    "qui", "zo", "fen", "ra", "tul", "ish", "mo", "gar", "pe", "xan",
};

constexpr std::array<const char*, 6> kVerbs = {
    "regulates", "feeds into", "constrains", "is measured against", "depends on", "amplifies",
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {
    }

    double
    Uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    std::size_t
    Pick(std::size_t n) {
        return std::min(n - 1, static_cast<std::size_t>(Uniform01() * static_cast<double>(n)));
    }

private:
    std::mt19937_64 engine_;
};

std::string
Capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') {
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
    }
    return s;
}

struct GenEntity {
    std::string id;
    std::string name;
    std::string description;
    int domain = 0;
    int topic = 0;  // global topic index
    std::vector<std::string> chunks;
};

}  // namespace

void
SyntheticParams::Validate() const {
    if (domains < 1 || domains > static_cast<int>(kDomains.size())) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("domains must be in [1, {}]", kDomains.size()));
    }
    if (topics_per_domain < 1 || topics_per_domain > 5) {
        throw Error(ErrorCode::kInvalidArgument, "topics_per_domain must be in [1, 5]");
    }
    if (entities_per_topic < 2 || relations < 0 || chunks < domains * topics_per_domain ||
        queries < 0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "need >= 2 entities per topic and at least one chunk per topic");
    }
    if (p_same_topic < 0 || p_same_domain < 0 || p_same_topic + p_same_domain > 1.0) {
        throw Error(ErrorCode::kInvalidArgument, "relation mix probabilities are out of range");
    }
}

SyntheticCorpus
generate_synthetic(const SyntheticParams& params) {
    params.Validate();
    Rng rng(params.seed);
    const int num_topics = params.domains * params.topics_per_domain;

    // Chunks are spread round-robin over topics.
    std::vector<std::vector<std::string>> topic_chunks(num_topics);
    for (int c = 0; c < params.chunks; ++c) {
        topic_chunks[c % num_topics].push_back(fmt::format("c{:03d}", c));
    }

    std::vector<GenEntity> entities;
    std::set<std::string> names;
    for (int t = 0; t < num_topics; ++t) {
        const int d = t / params.topics_per_domain;
        const auto& vocab = kDomains[d];
        const char* topic = vocab.topics[t % params.topics_per_domain];
        const std::string stem = kSyllables[(t * 7) % kSyllables.size()];
        for (int i = 0; i < params.entities_per_topic; ++i) {
            std::string name;
            do {
                name = Capitalize(stem + kSyllables[rng.Pick(kSyllables.size())] +
                                  kSyllables[rng.Pick(kSyllables.size())]);
                if (rng.Uniform01() < 0.5) {
                    name += " " + Capitalize(vocab.kinds[rng.Pick(vocab.kinds.size())]);
                }
            } while (!names.insert(name).second);
            GenEntity e;
            e.id = fmt::format("e{:03d}", entities.size());
            e.name = name;
            e.domain = d;
            e.topic = t;
            e.description = fmt::format(
                "{} is a {} studied in {} within {}. Researchers track it for its effect on {}.",
                name, vocab.kinds[rng.Pick(vocab.kinds.size())], topic, vocab.label,
                vocab.topics[rng.Pick(static_cast<std::size_t>(params.topics_per_domain))]);
            const auto& pool = topic_chunks[t];
            e.chunks.push_back(pool[i % pool.size()]);
            if (pool.size() > 1 && rng.Uniform01() < 0.3) {
                const auto& extra = pool[(i + 1) % pool.size()];
                e.chunks.push_back(extra);
            }
            entities.push_back(std::move(e));
        }
    }

    std::vector<std::vector<std::size_t>> by_topic(num_topics);
    std::vector<std::vector<std::size_t>> by_domain(params.domains);
    for (std::size_t i = 0; i < entities.size(); ++i) {
        by_topic[entities[i].topic].push_back(i);
        by_domain[entities[i].domain].push_back(i);
    }

    SyntheticCorpus corpus;
    auto emit = [&](const nlohmann::json& j) { corpus.jsonl += j.dump() + "\n"; };

    for (int t = 0; t < num_topics; ++t) {
        const auto& vocab = kDomains[t / params.topics_per_domain];
        for (const auto& cid : topic_chunks[t]) {
            std::string text = fmt::format("Field notes on {} ({}).", vocab.topics[t % params.topics_per_domain],
                                           vocab.label);
            for (const auto idx : by_topic[t]) {
                const auto& e = entities[idx];
                if (std::find(e.chunks.begin(), e.chunks.end(), cid) != e.chunks.end()) {
                    text += fmt::format(" Observers recorded {} alongside related {} activity.",
                                        e.name, vocab.kinds[rng.Pick(vocab.kinds.size())]);
                }
            }
            emit({{"type", "chunk"},
                  {"id", cid},
                  {"doc_id", fmt::format("doc-{}", t)},
                  {"text", text}});
        }
    }
    for (const auto& e : entities) {
        emit({{"type", "entity"},
              {"id", e.id},
              {"name", e.name},
              {"description", e.description},
              {"chunk_ids", e.chunks}});
    }

    std::set<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t max_attempts = static_cast<std::size_t>(params.relations) * 50 + 100;
    for (std::size_t attempt = 0;
         attempt < max_attempts && pairs.size() < static_cast<std::size_t>(params.relations);
         ++attempt) {
        const std::size_t a = rng.Pick(entities.size());
        const double roll = rng.Uniform01();
        const std::vector<std::size_t>* pool = nullptr;
        std::vector<std::size_t> all;
        if (roll < params.p_same_topic) {
            pool = &by_topic[entities[a].topic];
        } else if (roll < params.p_same_topic + params.p_same_domain) {
            pool = &by_domain[entities[a].domain];
        } else {
            all.resize(entities.size());
            for (std::size_t i = 0; i < all.size(); ++i) {
                all[i] = i;
            }
            pool = &all;
        }
        const std::size_t b = (*pool)[rng.Pick(pool->size())];
        if (a == b || !pairs.insert(std::minmax(a, b)).second) {
            continue;
        }
        emit({{"type", "relation"},
              {"id", fmt::format("r{:03d}", pairs.size() - 1)},
              {"source", entities[a].id},
              {"target", entities[b].id},
              {"description", fmt::format("{} {} {} in recorded observations.", entities[a].name,
                                          kVerbs[rng.Pick(kVerbs.size())], entities[b].name)}});
    }

    for (int q = 0; q < params.queries; ++q) {
        const auto& a = entities[rng.Pick(entities.size())];
        const auto& dom = by_domain[a.domain];
        const auto& b = entities[dom[rng.Pick(dom.size())]];
        const auto& vocab = kDomains[a.domain];
        switch (q % 4) {
            case 0:
                corpus.queries.push_back(fmt::format("How does {} relate to {}?", a.name, b.name));
                break;
            case 1:
                corpus.queries.push_back(fmt::format("What role does {} play in {}?", a.name,
                                                     vocab.topics[a.topic % params.topics_per_domain]));
                break;
            case 2:
                corpus.queries.push_back(
                    fmt::format("Compare {} and {} within {}.", a.name, b.name, vocab.label));
                break;
            default: {
                const auto& c = entities[rng.Pick(entities.size())];
                corpus.queries.push_back(
                    fmt::format("Which factors connect {}, {} and {}?", a.name, b.name, c.name));
                break;
            }
        }
    }
    return corpus;
}

}  // namespace strata
