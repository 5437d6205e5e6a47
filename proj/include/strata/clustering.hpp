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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "strata/kg_model.hpp"
#include "strata/providers.hpp"

namespace strata {

struct GmmParams {
    std::size_t num_components = 1;
    std::uint64_t seed = 0;
    int max_iters = 100;
    double tol = 1e-6;

    bool operator==(const GmmParams&) const = default;
};

/// Disjoint partition of one layer. Members inside a cluster are sorted and
/// clusters are ordered by their smallest member id.
struct ClusterAssignment {
    int layer = 0;
    std::vector<std::vector<EntityId>> clusters;
    /// n x m posterior matrix, rows follow the sorted entity ids and columns
    /// follow `clusters`. Absent after a split or a degenerate fallback.
    std::optional<std::vector<std::vector<double>>> responsibilities;
    GmmParams params;
    /// Log-likelihood after each EM iteration (empty for fallbacks).
    std::vector<double> log_likelihood;
    bool degenerate_fallback = false;
};

/// max(1, ceil(n_entities / cluster_size)).
std::size_t choose_num_components(std::size_t n_entities, std::size_t cluster_size);

/// Fits a diagonal-covariance Gaussian mixture with k-means++ seeded means
/// and assigns each point to its most responsible component (ties go to the
/// lower index). Empty components are repaired by moving the member of the
/// largest cluster that lies farthest from its mean. Inputs are sorted by id
/// before seeding, so the partition does not depend on input order.
///
/// Identical inputs fall back to a round-robin partition over sorted ids.
ClusterAssignment fit_gmm(const std::vector<EntityId>& ids,
                          const std::vector<Embedding>& embeddings,
                          const GmmParams& params);

using EmbeddingLookup = std::function<const Embedding&(const EntityId&)>;

/// Re-fits every cluster larger than `cluster_size` on its own members with
/// ceil(|C| / cluster_size) components, recursively, until all fit.
ClusterAssignment split_oversized(const ClusterAssignment& assignment,
                                  std::size_t cluster_size,
                                  const EmbeddingLookup& lookup);

}  // namespace strata
