#pragma once

#include "dcm/config.hpp"
#include "dcm/llm.hpp"
#include "dcm/planner.hpp"
#include "dcm/sandbox.hpp"
#include "dcm/store.hpp"
#include "dcm/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dcm {

enum class Verdict { solved, failed_all_paths };

std::string_view to_string(Verdict verdict);

enum class StepKind { generate_model, verify_model, generate_code, verify_code, execute, repair, abandon };

std::string_view to_string(StepKind kind);

struct TraceStep {
    StepKind kind = StepKind::generate_model;
    std::string outcome;                 // "ok", "pass", "fail", "revised", "malformed", "empty", status names ...
    std::string text;                    // generated or revised text, fixer output, abandon reason
    std::optional<ExecutionResult> execution;
};

struct PathTrace {
    SolutionPath path;
    std::vector<TraceStep> steps;
    int executions = 0;
    int repairs = 0;
    bool solved = false;
};

struct SolveTrace {
    std::string problem_id;
    bool baseline = false;
    std::vector<NodeId> retrieved_instances;
    std::vector<ClusterId> retrieved_clusters;
    std::vector<ClusterId> candidates;
    std::size_t pool_size = 0;
    bool global_fallback = false;
    bool selector_fallback = false;
    std::vector<SolutionPath> queue;
    std::vector<PathTrace> paths;
    Verdict verdict = Verdict::failed_all_paths;
    std::optional<ExtractedAnswer> answer;
    double total_wall_time = 0.0;
    std::vector<ChatRecord> chats; // every chat call in order

    int executions() const;
    int backtracks() const; // paths abandoned before the last attempted one
};

// One JSON object per line: a header, one line per path, then one per chat call
// when `include_chats` is set.
std::string trace_to_jsonl(const SolveTrace& trace, bool include_chats);

// Runs the path queue over a fixed memory snapshot.
class InferenceEngine {
public:
    InferenceEngine(const MemoryStore& store, const Gateway& gateway, Executor& executor, const Config& config);

    // Throws NoMemoryError on an empty store. Provider failures end the current
    // path and are recorded; they do not escape.
    SolveTrace solve(const Problem& problem) const;

    std::string generate_model(const Problem& problem, const Knowledge& k, CallLog* log) const;
    // Returns the model to use and records the verdict in `step`.
    std::string verify_model(const std::string& model, const Knowledge& k, TraceStep& step, CallLog* log) const;
    std::string generate_code(const Problem& problem, const std::string& model, const Knowledge& k, CallLog* log) const;
    std::string verify_code(const std::string& code, const Knowledge& k, TraceStep& step, CallLog* log) const;
    // Empty optional when the fixer reply stays malformed.
    std::optional<std::string> repair(const std::string& code, const std::string& error, const Knowledge& k,
                                      CallLog* log) const;

private:
    PathTrace run_path(const Problem& problem, const SolutionPath& path, CallLog* log) const;
    ExecutionResult execute(const std::string& code) const;

    const MemoryStore& store_;
    const Gateway& gateway_;
    Executor& executor_;
    const Config& config_;
};

// Memory-free single attempt: generate, decompose, execute. No repair.
SolveTrace solve_baseline(const Problem& problem, const Gateway& gateway, Executor& executor, const Config& config);

// "- item" lines, or "(none)" for an empty tier.
std::string render_tier(const std::vector<std::string>& items);

} // namespace dcm
