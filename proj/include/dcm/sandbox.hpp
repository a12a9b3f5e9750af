#pragma once

#include "dcm/types.hpp"

#include <cstddef>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace dcm {

// Sentinel-delimited answer block printed by generated scripts:
//
//   =====DCM-ANSWER-BEGIN=====
//   objective=<number>
//   <requirement>=<number>
//   =====DCM-ANSWER-END=====
//
// `objective` must be the first line. Exactly one block per output.
inline constexpr std::string_view kAnswerBegin = "=====DCM-ANSWER-BEGIN=====";
inline constexpr std::string_view kAnswerEnd = "=====DCM-ANSWER-END=====";

std::string format_answer_block(const ExtractedAnswer& answer);
std::optional<ExtractedAnswer> parse_answer_block(std::string_view output);

// Harness exit codes.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitScriptError = 2;
inline constexpr int kExitTimeout = 3;
inline constexpr int kExitNonNumeric = 4;

inline constexpr std::string_view kTimeoutMarker = "TIMEOUT: execution exceeded the time limit";
inline constexpr std::string_view kTruncationMarker = "\n[output truncated]";

struct SandboxPolicy {
    double timeout_seconds = 60.0;
    std::size_t max_output_bytes = 1 << 20;
    bool allow_network = false;
    std::vector<std::string> allowed_libraries = default_allowed_libraries();

    static std::vector<std::string> default_allowed_libraries();
};

// Top-level modules the script imports (`import a.b`, `from a import b`).
std::vector<std::string> scan_imports(std::string_view script);

// Imports that are neither allowed libraries nor always-available support modules.
std::vector<std::string> disallowed_imports(std::string_view script, const std::vector<std::string>& allowed);

class Executor {
public:
    virtual ~Executor() = default;
    virtual ExecutionResult run(std::string_view script) = 0;
};

// Decodes a `STUB:` directive comment instead of running anything:
//   # STUB: success objective=5 units=2
//   # STUB: runtime_error message=ZeroDivisionError: division by zero
//   # STUB: timeout
//   # STUB: non_numeric
ExecutionResult stub_execute(std::string_view script);

class StubExecutor : public Executor {
public:
    explicit StubExecutor(std::vector<std::string> allowed = SandboxPolicy::default_allowed_libraries());
    ExecutionResult run(std::string_view script) override;

private:
    std::vector<std::string> allowed_;
};

// Runs `<harness> <script> <timeout>` in a fresh temporary directory.
class HarnessExecutor : public Executor {
public:
    HarnessExecutor(std::string harness_path, SandboxPolicy policy, int max_parallel = 4);
    ExecutionResult run(std::string_view script) override;

private:
    std::string harness_path_;
    SandboxPolicy policy_;
    std::counting_semaphore<> slots_;
};

// Objective and every ground-truth requirement must match within
// max(rel_tol * max(|a|, |b|), abs_floor).
bool judge(const ExtractedAnswer& extracted, const GroundTruth& truth, double rel_tol, double abs_floor = 1e-6);

bool numbers_match(double a, double b, double rel_tol, double abs_floor);

} // namespace dcm
