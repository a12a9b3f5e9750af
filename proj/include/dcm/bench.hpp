#pragma once

#include "dcm/config.hpp"
#include "dcm/construction.hpp"
#include "dcm/inference.hpp"
#include "dcm/llm.hpp"
#include "dcm/sandbox.hpp"
#include "dcm/store.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcm {

// Stub or harness executor per config.
std::unique_ptr<Executor> make_executor(const Config& config);

// Throws InputError listing every id present in both sets.
void check_disjoint(std::span<const Problem> corpus, std::span<const Problem> eval);

// Refuses an empty corpus and, when `eval` is given, any id overlap.
BuildResult build_memory(std::span<const Problem> corpus, std::span<const Problem> eval, const Gateway& gateway,
                         Executor& executor, const Config& config);

std::string format_build_report(const BuildResult& result);

struct ProblemResult {
    std::string id;
    Verdict verdict = Verdict::failed_all_paths;
    bool correct = false;
    int executions = 0;
    int backtracks = 0;
    double wall_time = 0.0;
    std::optional<ExtractedAnswer> answer;
};

struct EvalReport {
    std::string mode; // "dcm" or "baseline"
    std::vector<ProblemResult> results; // sorted by id
    std::size_t solved = 0;
    std::size_t total = 0;
    double mean_wall_time_solved = 0.0;
    double total_wall_time = 0.0;

    // solved/total as a percentage with two decimals, e.g. "70.00%".
    std::string accuracy_text() const;
    std::string results_jsonl() const;
};

std::string format_percent(std::size_t numerator, std::size_t denominator);

// DCM mode when `store` is given, baseline otherwise. Problems run on
// config.workers threads; each needs ground truth. Traces are handed to
// `on_trace` (serialized, in id order) when set.
EvalReport evaluate(std::span<const Problem> problems, const MemoryStore* store, const Gateway& gateway,
                    Executor& executor, const Config& config,
                    const std::function<void(const SolveTrace&)>& on_trace = {});

std::string format_eval_table(std::span<const EvalReport> reports);

struct AblationRow {
    double ratio = 1.0;
    std::size_t nodes = 0;
    std::size_t modeling_clusters = 0;
    std::size_t coding_clusters = 0;
    EvalReport report;
};

struct AblationTable {
    std::vector<AblationRow> rows;
    std::optional<EvalReport> baseline;
    bool monotone = true; // accuracy never decreases with budget
};

AblationTable ablate(const MemoryStore& store, std::span<const double> ratios, std::uint64_t seed,
                     std::span<const Problem> benchmark, const Gateway& gateway, Executor& executor,
                     const Config& config, bool with_baseline);

std::string format_ablation_table(const AblationTable& table);

struct TransferRow {
    std::string memory_model;    // provenance of the store ("unknown" when missing)
    std::string inference_model; // chat model used now
    EvalReport report;
    std::vector<std::string> warnings;
};

TransferRow transfer(const MemoryStore& store, std::span<const Problem> benchmark, const Gateway& gateway,
                     Executor& executor, const Config& config);

std::string format_transfer_row(const TransferRow& row);

// Node, type, cluster and edge statistics of a store.
std::string inspect_store(const MemoryStore& store);

} // namespace dcm
