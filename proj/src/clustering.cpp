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

#include "strata/clustering.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

#include "strata/error.hpp"

namespace strata {

namespace {

constexpr double kVarianceFloor = 1e-6;
constexpr double kCollapsedMass = 1e-10;

// Portable uniform draw in [0, 1); std::uniform_real_distribution is not
// bit-identical across standard libraries.
double
Uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Mixture {
    std::size_t m = 0;
    std::size_t d = 0;
    std::vector<double> means;      // m x d
    std::vector<double> variances;  // m x d
    std::vector<double> weights;    // m
};

double
SquaredDistance(const double* a, const double* b, std::size_t d) {
    double sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double diff = a[j] - b[j];
        sum += diff * diff;
    }
    return sum;
}

std::vector<std::size_t>
KMeansPlusPlus(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t m,
               std::mt19937_64& rng) {
    std::vector<std::size_t> centers;
    std::vector<bool> chosen(n, false);
    std::size_t first = std::min(n - 1, static_cast<std::size_t>(Uniform01(rng) * n));
    centers.push_back(first);
    chosen[first] = true;
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < m) {
        const double* c = &x[centers.back() * d];
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], SquaredDistance(&x[i * d], c, d));
            total += chosen[i] ? 0.0 : d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            double target = Uniform01(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i] || d2[i] <= 0.0) {
                    continue;
                }
                acc += d2[i];
                pick = i;
                if (acc > target) {
                    break;
                }
            }
        }
        if (pick == n) {
            // Remaining points coincide with existing centres.
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pick);
        chosen[pick] = true;
    }
    return centers;
}

// Per-point log-responsibilities (n x m); returns the total log-likelihood.
double
EStep(const Mixture& mix, const std::vector<double>& x, std::size_t n,
      std::vector<double>& log_resp) {
    const std::size_t m = mix.m;
    const std::size_t d = mix.d;
    std::vector<double> constants(m);
    for (std::size_t k = 0; k < m; ++k) {
        double log_det = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            log_det += std::log(2.0 * std::numbers::pi * mix.variances[k * d + j]);
        }
        double log_w = mix.weights[k] > 0.0 ? std::log(mix.weights[k])
                                            : -std::numeric_limits<double>::infinity();
        constants[k] = log_w - 0.5 * log_det;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = &x[i * d];
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
            double q = 0.0;
            const double* mu = &mix.means[k * d];
            const double* var = &mix.variances[k * d];
            for (std::size_t j = 0; j < d; ++j) {
                double diff = xi[j] - mu[j];
                q += diff * diff / var[j];
            }
            double lp = constants[k] - 0.5 * q;
            log_resp[i * m + k] = lp;
            best = std::max(best, lp);
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            sum += std::exp(log_resp[i * m + k] - best);
        }
        double lse = best + std::log(sum);
        for (std::size_t k = 0; k < m; ++k) {
            log_resp[i * m + k] -= lse;
        }
        total += lse;
    }
    return total;
}

void
MStep(Mixture& mix, const std::vector<double>& x, std::size_t n,
      const std::vector<double>& log_resp) {
    const std::size_t m = mix.m;
    const std::size_t d = mix.d;
    for (std::size_t k = 0; k < m; ++k) {
        double nk = 0.0;
        std::vector<double> mean(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double r = std::exp(log_resp[i * m + k]);
            nk += r;
            for (std::size_t j = 0; j < d; ++j) {
                mean[j] += r * x[i * d + j];
            }
        }
        mix.weights[k] = nk / static_cast<double>(n);
        if (nk < kCollapsedMass) {
            continue;  // keep the previous mean/variance of a collapsed component
        }
        for (auto& v : mean) {
            v /= nk;
        }
        std::vector<double> var(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double r = std::exp(log_resp[i * m + k]);
            for (std::size_t j = 0; j < d; ++j) {
                double diff = x[i * d + j] - mean[j];
                var[j] += r * diff * diff;
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            mix.means[k * d + j] = mean[j];
            mix.variances[k * d + j] = std::max(var[j] / nk, kVarianceFloor);
        }
    }
}

ClusterAssignment
RoundRobin(const std::vector<EntityId>& sorted_ids, const GmmParams& params) {
    ClusterAssignment out;
    out.params = params;
    out.degenerate_fallback = true;
    out.clusters.resize(params.num_components);
    for (std::size_t i = 0; i < sorted_ids.size(); ++i) {
        out.clusters[i % params.num_components].push_back(sorted_ids[i]);
    }
    return out;
}

// Orders clusters by smallest member and permutes responsibility columns to
// match.
void
Canonicalize(ClusterAssignment& a) {
    for (auto& c : a.clusters) {
        std::sort(c.begin(), c.end());
    }
    std::vector<std::size_t> order(a.clusters.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        return a.clusters[l].front() < a.clusters[r].front();
    });
    std::vector<std::vector<EntityId>> clusters;
    clusters.reserve(order.size());
    for (auto k : order) {
        clusters.push_back(std::move(a.clusters[k]));
    }
    a.clusters = std::move(clusters);
    if (a.responsibilities) {
        for (auto& row : *a.responsibilities) {
            std::vector<double> permuted;
            permuted.reserve(order.size());
            for (auto k : order) {
                permuted.push_back(row[k]);
            }
            row = std::move(permuted);
        }
    }
}

}  // namespace

std::size_t
choose_num_components(std::size_t n_entities, std::size_t cluster_size) {
    if (n_entities < 1 || cluster_size < 2) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("choose_num_components needs n >= 1 and cluster_size >= 2 "
                                "(got {}, {})",
                                n_entities, cluster_size));
    }
    return std::max<std::size_t>(1, (n_entities + cluster_size - 1) / cluster_size);
}

ClusterAssignment
fit_gmm(const std::vector<EntityId>& ids, const std::vector<Embedding>& embeddings,
        const GmmParams& params) {
    const std::size_t n = ids.size();
    const std::size_t m = params.num_components;
    if (embeddings.size() != n) {
        throw Error(ErrorCode::kInvalidArgument, "fit_gmm: ids and embeddings differ in length");
    }
    if (n == 0 || m == 0) {
        throw Error(ErrorCode::kInvalidArgument, "fit_gmm: needs at least one point and component");
    }
    if (m > n) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("fit_gmm: {} components requested for {} points", m, n));
    }
    if (params.max_iters < 1 || !(params.tol > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "fit_gmm: max_iters >= 1 and tol > 0 required");
    }
    const std::size_t d = embeddings.front().size();
    if (d == 0) {
        throw Error(ErrorCode::kInvalidArgument, "fit_gmm: zero-dimensional embeddings");
    }
    for (const auto& e : embeddings) {
        if (e.size() != d) {
            throw Error(ErrorCode::kInvalidArgument, "fit_gmm: embeddings differ in dimension");
        }
        for (double v : e) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::kInvalidArgument, "fit_gmm: non-finite embedding value");
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    std::vector<EntityId> sorted_ids;
    sorted_ids.reserve(n);
    std::vector<double> x(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        sorted_ids.push_back(ids[order[i]]);
        std::copy(embeddings[order[i]].begin(), embeddings[order[i]].end(), x.begin() + i * d);
    }
    if (std::adjacent_find(sorted_ids.begin(), sorted_ids.end()) != sorted_ids.end()) {
        throw Error(ErrorCode::kInvalidArgument, "fit_gmm: duplicate entity ids");
    }

    bool all_identical = true;
    for (std::size_t i = 1; i < n && all_identical; ++i) {
        all_identical = std::equal(x.begin() + i * d, x.begin() + (i + 1) * d, x.begin());
    }
    if (all_identical && m > 1) {
        auto out = RoundRobin(sorted_ids, params);
        Canonicalize(out);
        return out;
    }

    std::mt19937_64 rng(params.seed);
    Mixture mix;
    mix.m = m;
    mix.d = d;
    mix.means.resize(m * d);
    mix.variances.resize(m * d);
    mix.weights.assign(m, 1.0 / static_cast<double>(m));
    auto centers = KMeansPlusPlus(x, n, d, m, rng);
    std::vector<double> global_mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            global_mean[j] += x[i * d + j];
        }
    }
    for (auto& v : global_mean) {
        v /= static_cast<double>(n);
    }
    std::vector<double> global_var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double diff = x[i * d + j] - global_mean[j];
            global_var[j] += diff * diff;
        }
    }
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            mix.means[k * d + j] = x[centers[k] * d + j];
            mix.variances[k * d + j] = std::max(global_var[j] / static_cast<double>(n), kVarianceFloor);
        }
    }

    ClusterAssignment out;
    out.params = params;
    std::vector<double> log_resp(n * m);
    for (int iter = 0; iter < params.max_iters; ++iter) {
        double ll = EStep(mix, x, n, log_resp);
        if (!std::isfinite(ll)) {
            auto fallback = RoundRobin(sorted_ids, params);
            Canonicalize(fallback);
            return fallback;
        }
        out.log_likelihood.push_back(ll);
        if (iter > 0 && std::abs(ll - out.log_likelihood[iter - 1]) < params.tol) {
            break;
        }
        if (iter + 1 == params.max_iters) {
            break;  // keep responsibilities consistent with the recorded likelihood
        }
        MStep(mix, x, n, log_resp);
    }

    std::vector<std::size_t> label(n, 0);
    std::vector<std::vector<std::size_t>> members(m);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < m; ++k) {
            if (log_resp[i * m + k] > log_resp[i * m + best]) {
                best = k;
            }
        }
        label[i] = best;
        members[best].push_back(i);
    }
    // Empty-component repair: move the farthest member of the largest cluster.
    for (std::size_t k = 0; k < m; ++k) {
        while (members[k].empty()) {
            std::size_t largest = 0;
            for (std::size_t c = 1; c < m; ++c) {
                if (members[c].size() > members[largest].size()) {
                    largest = c;
                }
            }
            const double* mu = &mix.means[largest * d];
            std::size_t far_pos = 0;
            double far_dist = -1.0;
            for (std::size_t p = 0; p < members[largest].size(); ++p) {
                double dist = SquaredDistance(&x[members[largest][p] * d], mu, d);
                if (dist > far_dist) {
                    far_dist = dist;
                    far_pos = p;
                }
            }
            std::size_t moved = members[largest][far_pos];
            members[largest].erase(members[largest].begin() + static_cast<std::ptrdiff_t>(far_pos));
            members[k].push_back(moved);
            label[moved] = k;
        }
    }

    out.clusters.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        for (auto i : members[k]) {
            out.clusters[k].push_back(sorted_ids[i]);
        }
    }
    std::vector<std::vector<double>> resp(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            resp[i][k] = std::exp(log_resp[i * m + k]);
        }
    }
    out.responsibilities = std::move(resp);
    Canonicalize(out);
    return out;
}

ClusterAssignment
split_oversized(const ClusterAssignment& assignment, std::size_t cluster_size,
                const EmbeddingLookup& lookup) {
    if (cluster_size < 2) {
        throw Error(ErrorCode::kInvalidArgument, "split_oversized: cluster_size must be >= 2");
    }
    ClusterAssignment out;
    out.layer = assignment.layer;
    out.params = assignment.params;
    out.log_likelihood = assignment.log_likelihood;
    out.degenerate_fallback = assignment.degenerate_fallback;
    bool changed = false;

    std::vector<std::vector<EntityId>> pending(assignment.clusters.rbegin(), assignment.clusters.rend());
    while (!pending.empty()) {
        auto cluster = std::move(pending.back());
        pending.pop_back();
        if (cluster.size() <= cluster_size) {
            out.clusters.push_back(std::move(cluster));
            continue;
        }
        changed = true;
        std::vector<Embedding> vectors;
        vectors.reserve(cluster.size());
        for (const auto& id : cluster) {
            vectors.push_back(lookup(id));
        }
        GmmParams sub = assignment.params;
        sub.num_components = choose_num_components(cluster.size(), cluster_size);
        auto refit = fit_gmm(cluster, vectors, sub);
        out.degenerate_fallback = out.degenerate_fallback || refit.degenerate_fallback;
        for (auto it = refit.clusters.rbegin(); it != refit.clusters.rend(); ++it) {
            pending.push_back(std::move(*it));
        }
    }
    if (changed) {
        out.responsibilities.reset();
    } else {
        out.responsibilities = assignment.responsibilities;
    }
    std::sort(out.clusters.begin(), out.clusters.end(),
              [](const auto& l, const auto& r) { return l.front() < r.front(); });
    if (!changed) {
        // Columns already follow the canonical order of the input.
        out.clusters = assignment.clusters;
    }
    return out;
}

}  // namespace strata
