#pragma once

#include "dcm/config.hpp"
#include "dcm/llm.hpp"
#include "dcm/store.hpp"
#include "dcm/types.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dcm {

// K nodes with the highest similarity(e_new, e_m); ties by lower node id.
std::vector<NodeId> instance_retrieve(const Embedding& query, const MemoryStore& store, int k);

// K modeling clusters with the highest centroid similarity; ties by lower id.
std::vector<ClusterId> cluster_retrieve(const Embedding& query, const MemoryStore& store, int k);

// Modeling clusters of `instances` followed by `clusters`, first occurrence kept.
std::vector<ClusterId> merge_candidates(const MemoryStore& store, std::span<const NodeId> instances,
                                        std::span<const ClusterId> clusters);

// Top-K coding neighbours of each candidate by edge weight, deduplicated, in
// candidate order.
std::vector<SolutionPath> expand_paths(std::span<const ClusterId> candidates, const BipartiteGraph& graph, int k);

// The `count` heaviest edges of the whole graph (ties by modeling id, then coding id).
std::vector<SolutionPath> global_fallback_paths(const BipartiteGraph& graph, std::size_t count);

// Descending weight, then descending prior, then ids. Stable and total.
std::vector<SolutionPath> fallback_order(std::vector<SolutionPath> pool);

// Fills each path's prior with the query's similarity to its modeling centroid.
void score_priors(std::vector<SolutionPath>& pool, const Embedding& query, const MemoryStore& store);

// Selector text for one path: "[i] M3 -> C1 | modeling: ... | coding: ...".
std::string describe_path(const SolutionPath& path, std::size_t index, const MemoryStore& store);

struct RankResult {
    std::vector<SolutionPath> queue;
    bool selector_called = false;
    bool selector_fallback = false; // malformed selector output, fallback order used
};

// Queue of min(M, |P|) paths. A single path skips the selector. Indices the
// selector leaves out are filled from the fallback order.
RankResult rank_paths(std::span<const SolutionPath> pool, const std::string& problem_text, int m,
                      const MemoryStore& store, const Gateway& gateway, CallLog* log = nullptr);

struct Plan {
    std::vector<NodeId> instances;
    std::vector<ClusterId> clusters;
    std::vector<ClusterId> candidates;
    std::vector<SolutionPath> pool;
    std::vector<SolutionPath> queue;
    bool global_fallback = false;
    bool selector_called = false;
    bool selector_fallback = false;
};

// Dual retrieval -> merge -> expansion (global fallback when empty) -> ranking.
Plan plan_paths(const Problem& problem, const Embedding& query, const MemoryStore& store, const Gateway& gateway,
                const Config& config, CallLog* log = nullptr);

} // namespace dcm
