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
#include <string_view>
#include <vector>

#include "strata/providers.hpp"

namespace strata {

enum class PromptTemplate {
    kEntityAggregation,
    kRelationAggregation,
};

/// Prompt asking for a JSON object with entity_name, entity_description and
/// findings[{summary, explanation}]. Member and relation listings are capped
/// at `token_budget` whitespace tokens.
std::string RenderEntityAggregationPrompt(const std::vector<EntitySummary>& members,
                                          const std::vector<std::string>& intra_relations,
                                          std::size_t token_budget);

/// Prompt asking for one sentence of at most `word_limit` words.
std::string RenderRelationAggregationPrompt(const EntitySummary& a,
                                            const EntitySummary& b,
                                            const std::vector<std::string>& cross_relations,
                                            int word_limit,
                                            std::size_t token_budget);

/// Appended to a prompt when the previous answer failed to parse.
std::string ReformatReminder(PromptTemplate which);

/// Strict parse of an entity-aggregation answer. Leading and trailing
/// whitespace is tolerated, nothing else. The name must be non-empty and
/// differ from every member name; the description must be non-empty.
/// On failure returns nullopt and, when `reason` is given, explains why.
std::optional<AggregateEntity> ParseEntityAggregation(std::string_view raw,
                                                      const std::vector<EntitySummary>& members,
                                                      std::string* reason = nullptr);

/// First non-blank line, trimmed. nullopt when the text is blank.
std::optional<std::string> ParseRelationAggregation(std::string_view raw);

}  // namespace strata
