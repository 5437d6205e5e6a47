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

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "strata/context.hpp"
#include "strata/kg_model.hpp"
#include "strata/providers.hpp"

namespace strata::testing {

/// Self-deleting scratch directory under the system temp dir.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const {
        return path_;
    }

private:
    std::filesystem::path path_;
};

struct BaseGraph {
    Hierarchy hierarchy;
    ChunkStore chunks;
};

/// Random base layer: `n` entities with topical descriptions, about
/// `avg_degree * n / 2` relations and one chunk per few entities.
BaseGraph RandomBaseGraph(std::size_t n, double avg_degree, std::uint64_t seed);

/// Same graph rendered as ingest JSONL.
std::string ToIngestJsonl(const BaseGraph& g);

/// Random hierarchy built without clustering: `leaves` base entities grouped
/// into random-sized clusters layer by layer (at most `layers` layers, a
/// random number of roots). Upper layers get random inter-cluster relations
/// of the two inter-cluster kinds; the base layer gets random relations.
Hierarchy RandomHierarchy(std::size_t leaves, int layers, std::mt19937_64& rng);

/// Uniform integer in [lo, hi].
std::size_t UniformInt(std::mt19937_64& rng, std::size_t lo, std::size_t hi);

std::string ReadText(const std::filesystem::path& path);
void WriteText(const std::filesystem::path& path, const std::string& text);

/// Directory holding checked-in fixtures.
std::filesystem::path DataDir();

}  // namespace strata::testing
