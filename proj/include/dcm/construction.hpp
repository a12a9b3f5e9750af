#pragma once

#include "dcm/config.hpp"
#include "dcm/llm.hpp"
#include "dcm/parse.hpp"
#include "dcm/sandbox.hpp"
#include "dcm/store.hpp"
#include "dcm/types.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcm {

// Append-only line-delimited records: one per ingested node, one per dropped
// problem, one per synthesis attempt.
class ConstructionLog {
public:
    void append(std::string json_line) { lines_.push_back(std::move(json_line)); }
    const std::vector<std::string>& lines() const { return lines_; }
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> lines_;
};

// One memory-free generate -> decompose -> execute -> judge round. Provider
// failures and undecomposable replies become incorrect attempts.
AttemptRecord baseline_attempt(const Gateway& gateway, Executor& executor, const Problem& problem, int round,
                               const Config& config, CallLog* log = nullptr);

// Attempts per problem, in corpus order. A first-round success is confirmed by
// one more attempt; a success after failures stops the loop; failures continue
// until max_classification_rounds. Throws InputError for a problem without
// ground truth.
std::vector<std::vector<AttemptRecord>> collect_trajectories(const Gateway& gateway, Executor& executor,
                                                             std::span<const Problem> corpus, const Config& config,
                                                             CallLog* log = nullptr);

// Labeled two-section split, else an extractor split. Empty when neither yields
// two non-empty sections.
std::optional<SplitSolution> decompose(const Gateway& gateway, std::string_view solution, CallLog* log = nullptr);

// Instance knowledge with the tier sources fixed by sample type: A keeps
// approach and checklist, C keeps pitfalls, B keeps all three. `success` is
// required for A and B, `failures` must be non-empty for B and C.
Knowledge extract_phi(const Gateway& gateway, const Problem& problem, SampleType type,
                      const AttemptRecord* success, std::span<const AttemptRecord> failures,
                      CallLog* log = nullptr);

struct BuildStats {
    std::size_t type_a = 0;
    std::size_t type_b = 0;
    std::size_t type_c = 0;
    std::size_t dropped = 0;
    std::size_t synthesis_events = 0;
    std::size_t synthesis_failures = 0;
    std::size_t verifier_fallbacks = 0; // malformed verifier replies treated as NO_MATCH
};

struct Assignment {
    ClusterId cluster{};
    bool created = false;
    std::vector<ClusterId> candidates;
};

// Single writer over a MemoryStore.
class MemoryBuilder {
public:
    MemoryBuilder(MemoryStore& store, const Gateway& gateway, const Config& config,
                  ConstructionLog* log = nullptr, CallLog* calls = nullptr);

    // Exhaustive top-K clusters of `space` by similarity to `embedding`.
    std::vector<ClusterId> candidate_clusters(Space space, const Embedding& embedding) const;

    // Verifier-checked assignment of an already added node; creates a cluster on
    // NO_MATCH, an empty space, or a malformed verifier.
    Assignment assign_cluster(Space space, NodeId node);

    // Adds the node, assigns both spaces, bumps the edge and queues phi on both
    // clusters, synthesizing where the queue reaches N.
    NodeId ingest_node(ExperienceNode node);

    // Merges pending phis into K. Returns false (and changes nothing) when the
    // synthesizer reply stays malformed.
    bool synthesize_knowledge(Space space, ClusterId id);

    // Verifier evidence for the candidates: K approach head and two member
    // snippets each, within the configured character budget.
    std::string cluster_summary(Space space, std::span<const ClusterId> candidates) const;

    const BuildStats& stats() const { return stats_; }
    BuildStats& mutable_stats() { return stats_; }

private:
    MemoryStore& store_;
    const Gateway& gateway_;
    const Config& config_;
    ConstructionLog* log_;
    CallLog* calls_;
    BuildStats stats_;
};

struct BuildResult {
    MemoryStore store;
    BuildStats stats;
    ConstructionLog log;
    std::vector<std::string> warnings;
};

// Trajectories -> classification -> decomposition -> phi -> ingest, in corpus order.
BuildResult construct_memory(std::span<const Problem> corpus, const Gateway& gateway, Executor& executor,
                             const Config& config);

// Instruction text given to the generator for a full memory-free solve.
std::string_view solve_instructions();

} // namespace dcm
