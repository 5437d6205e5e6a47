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

#include "strata/prompts.hpp"

#include <fmt/format.h>

#include "json.hpp"

namespace strata {

namespace {

std::string_view
Trim(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    auto begin = s.find_first_not_of(ws);
    if (begin == std::string_view::npos) {
        return {};
    }
    auto end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
}

// Renders `lines` one per row, stopping once `budget` tokens are used.
std::string
BudgetedList(const std::vector<std::string>& lines, std::size_t budget) {
    std::string out;
    std::size_t used = 0;
    for (const auto& line : lines) {
        std::size_t cost = count_tokens(line) + 1;
        if (used + cost > budget) {
            std::size_t room = budget > used + 1 ? budget - used - 1 : 0;
            if (room > 0) {
                out += "- " + TruncateTokens(line, room) + "\n";
            }
            out += "- [truncated]\n";
            break;
        }
        out += "- " + line + "\n";
        used += cost;
    }
    return out;
}

constexpr std::string_view kEntityPreamble = R"(Role: cluster summariser for a knowledge graph.

You receive a set of related entities (name and description) and the relations observed among them.
Produce ONE aggregate entity that stands for the whole set.

Requirements:
- Use only the information given below. Do not add outside facts.
- The aggregate name must not be identical to the name of any listed entity; name the shared theme, structure or function instead.
- The description must cover the shared traits, structure, functions and significance of the set.
- List structured findings (aim for five or more). Each finding has a short summary and a grounded explanation that refers to the contributing entities.

Reply with a single JSON object and nothing else (no markdown, no commentary), exactly in this shape:
{
  "entity_name": "<name>",
  "entity_description": "<description>",
  "findings": [
    {"summary": "<summary>", "explanation": "<explanation>"}
  ]
}
)";

constexpr std::string_view kRelationPreamble = R"(Role: analyst of relationships between two aggregate entities of a knowledge graph.

Write ONE sentence of at most {limit} words that summarises, at group level, every kind of relationship between the members of Aggregation A and the members of Aggregation B.

Rules:
- Do not name individual member entities; use collective terms.
- Do not use the word "community"; say "aggregation", "group" or "collection".
- Cover the full range of relationship types present, in formal, factual English.
- Reply with the sentence only.
)";

}  // namespace

std::string
RenderEntityAggregationPrompt(const std::vector<EntitySummary>& members,
                              const std::vector<std::string>& intra_relations,
                              std::size_t token_budget) {
    std::vector<std::string> entity_lines;
    entity_lines.reserve(members.size());
    for (const auto& m : members) {
        entity_lines.push_back(fmt::format("{}: {}", m.name, m.description));
    }
    std::string prompt(kEntityPreamble);
    prompt += "\nEntities:\n";
    prompt += BudgetedList(entity_lines, token_budget);
    prompt += "\nRelations among these entities:\n";
    prompt += intra_relations.empty() ? std::string("- (none)\n")
                                      : BudgetedList(intra_relations, token_budget);
    prompt += "\nOutput:\n";
    return prompt;
}

std::string
RenderRelationAggregationPrompt(const EntitySummary& a,
                                const EntitySummary& b,
                                const std::vector<std::string>& cross_relations,
                                int word_limit,
                                std::size_t token_budget) {
    std::string prompt = fmt::format(fmt::runtime(std::string(kRelationPreamble)),
                                     fmt::arg("limit", word_limit));
    prompt += fmt::format("\nAggregation A Name: {}\nAggregation A Description: {}\n", a.name,
                          TruncateTokens(a.description, token_budget));
    prompt += fmt::format("Aggregation B Name: {}\nAggregation B Description: {}\n", b.name,
                          TruncateTokens(b.description, token_budget));
    prompt += "Member relationships:\n";
    prompt += BudgetedList(cross_relations, token_budget);
    prompt += "\nOutput:\n";
    return prompt;
}

std::string
ReformatReminder(PromptTemplate which) {
    if (which == PromptTemplate::kEntityAggregation) {
        return "\nYour previous reply could not be parsed. Reply again with ONLY the JSON object "
               "described above, with non-empty entity_name and entity_description, and a name "
               "that differs from every listed entity.\n";
    }
    return "\nYour previous reply was empty. Reply again with exactly one sentence.\n";
}

std::optional<AggregateEntity>
ParseEntityAggregation(std::string_view raw,
                       const std::vector<EntitySummary>& members,
                       std::string* reason) {
    auto fail = [&](std::string why) -> std::optional<AggregateEntity> {
        if (reason != nullptr) {
            *reason = std::move(why);
        }
        return std::nullopt;
    };
    auto body = Trim(raw);
    auto doc = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
    if (doc.is_discarded()) {
        return fail("reply is not valid JSON");
    }
    if (!doc.is_object()) {
        return fail("reply is not a JSON object");
    }
    for (const char* key : {"entity_name", "entity_description"}) {
        if (!doc.contains(key) || !doc[key].is_string()) {
            return fail(fmt::format("missing string field '{}'", key));
        }
    }
    if (!doc.contains("findings") || !doc["findings"].is_array()) {
        return fail("missing array field 'findings'");
    }
    AggregateEntity out;
    out.name = std::string(Trim(doc["entity_name"].get<std::string>()));
    out.description = std::string(Trim(doc["entity_description"].get<std::string>()));
    if (out.name.empty()) {
        return fail("entity_name is empty");
    }
    if (out.description.empty()) {
        return fail("entity_description is empty");
    }
    for (const auto& m : members) {
        if (m.name == out.name) {
            return fail(fmt::format("entity_name '{}' repeats a member name", out.name));
        }
    }
    for (const auto& finding : doc["findings"]) {
        if (!finding.is_object() || !finding.contains("summary") ||
            !finding["summary"].is_string() || !finding.contains("explanation") ||
            !finding["explanation"].is_string()) {
            return fail("each finding needs string 'summary' and 'explanation'");
        }
        out.findings.push_back(
            {finding["summary"].get<std::string>(), finding["explanation"].get<std::string>()});
    }
    return out;
}

std::optional<std::string>
ParseRelationAggregation(std::string_view raw) {
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        auto end = raw.find('\n', pos);
        auto line = Trim(raw.substr(pos, end == std::string_view::npos ? raw.npos : end - pos));
        if (!line.empty()) {
            return std::string(line);
        }
        if (end == std::string_view::npos) {
            break;
        }
        pos = end + 1;
    }
    return std::nullopt;
}

}  // namespace strata
