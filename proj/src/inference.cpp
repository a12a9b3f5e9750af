#include "dcm/inference.hpp"

#include "dcm/construction.hpp"
#include "dcm/error.hpp"
#include "dcm/parse.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>

namespace dcm {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kModelInstructions =
    "Formulate the problem as a mathematical model: decision variables, objective, constraints. Follow the "
    "guidance where it applies. Reply with the model in one ```model fenced block.";

constexpr std::string_view kCodeInstructions =
    "Write a Python script that implements the model below with gurobipy, pulp, ortools, scipy or networkx. "
    "Follow the guidance where it applies. The script must print exactly one answer block:\n"
    "=====DCM-ANSWER-BEGIN=====\nobjective=<number>\n<requirement>=<number>\n=====DCM-ANSWER-END=====\n"
    "Reply with the script in one ```python fenced block.";

constexpr std::string_view kCheckInstructions =
    "Check the candidate against every item of the reference checklist. Reply \"PASS\" if it satisfies all "
    "of them. Otherwise reply \"FAIL\" followed by the complete corrected candidate in one fenced block.";

std::string reference_checklist(const Knowledge& k) {
    return "Checklist:\n" + render_tier(k.checklist);
}

ojson answer_json(const ExtractedAnswer& a) {
    ojson j;
    j["objective"] = a.objective;
    ojson req = ojson::object();
    for (const auto& [name, value] : a.requirements) req[name] = value;
    j["requirements"] = req;
    return j;
}

ojson execution_json(const ExecutionResult& r) {
    ojson j;
    j["status"] = std::string(to_string(r.status));
    j["stdout"] = r.stdout_text;
    j["stderr"] = r.stderr_text;
    j["wall_time"] = r.wall_time;
    j["answer"] = r.extracted ? answer_json(*r.extracted) : ojson(nullptr);
    return j;
}

ojson path_json(const SolutionPath& p) {
    ojson j;
    j["modeling"] = format_cluster(Space::modeling, p.modeling);
    j["coding"] = format_cluster(Space::coding, p.coding);
    j["weight"] = p.weight;
    j["prior"] = p.prior;
    j["selector_rank"] = p.selector_rank;
    j["origin"] = p.origin == PathOrigin::expanded ? "expanded" : "global_fallback";
    return j;
}

} // namespace

std::string_view to_string(Verdict verdict) {
    return verdict == Verdict::solved ? "solved" : "failed_all_paths";
}

std::string_view to_string(StepKind kind) {
    switch (kind) {
    case StepKind::generate_model: return "generate_model";
    case StepKind::verify_model: return "verify_model";
    case StepKind::generate_code: return "generate_code";
    case StepKind::verify_code: return "verify_code";
    case StepKind::execute: return "execute";
    case StepKind::repair: return "repair";
    case StepKind::abandon: return "abandon";
    }
    return "unknown";
}

std::string render_tier(const std::vector<std::string>& items) {
    if (items.empty()) return "(none)";
    std::string out;
    for (const auto& item : items) out += "- " + item + "\n";
    return out;
}

int SolveTrace::executions() const {
    int total = 0;
    for (const auto& p : paths) total += p.executions;
    return total;
}

int SolveTrace::backtracks() const {
    if (paths.empty()) return 0;
    return static_cast<int>(paths.size()) - 1;
}

std::string trace_to_jsonl(const SolveTrace& trace, bool include_chats) {
    ojson header;
    header["type"] = "solve";
    header["problem_id"] = trace.problem_id;
    header["mode"] = trace.baseline ? "baseline" : "dcm";
    header["verdict"] = std::string(to_string(trace.verdict));
    header["answer"] = trace.answer ? answer_json(*trace.answer) : ojson(nullptr);
    header["executions"] = trace.executions();
    header["backtracks"] = trace.backtracks();
    header["total_wall_time"] = trace.total_wall_time;
    ojson instances = ojson::array();
    for (auto n : trace.retrieved_instances) instances.push_back(format_node(n));
    header["retrieved_instances"] = instances;
    ojson clusters = ojson::array();
    for (auto c : trace.retrieved_clusters) clusters.push_back(format_cluster(Space::modeling, c));
    header["retrieved_clusters"] = clusters;
    ojson candidates = ojson::array();
    for (auto c : trace.candidates) candidates.push_back(format_cluster(Space::modeling, c));
    header["candidates"] = candidates;
    header["pool_size"] = trace.pool_size;
    header["global_fallback"] = trace.global_fallback;
    header["selector_fallback"] = trace.selector_fallback;
    ojson queue = ojson::array();
    for (const auto& p : trace.queue) queue.push_back(path_json(p));
    header["queue"] = queue;

    std::string out = header.dump() + "\n";
    for (std::size_t i = 0; i < trace.paths.size(); ++i) {
        const auto& p = trace.paths[i];
        ojson line;
        line["type"] = "path";
        line["index"] = i;
        line["path"] = trace.baseline ? ojson(nullptr) : path_json(p.path);
        line["solved"] = p.solved;
        line["executions"] = p.executions;
        line["repairs"] = p.repairs;
        ojson steps = ojson::array();
        for (const auto& s : p.steps) {
            ojson step;
            step["kind"] = std::string(to_string(s.kind));
            step["outcome"] = s.outcome;
            step["text"] = s.text;
            if (s.execution) step["execution"] = execution_json(*s.execution);
            steps.push_back(step);
        }
        line["steps"] = steps;
        out += line.dump() + "\n";
    }
    if (include_chats) {
        for (std::size_t i = 0; i < trace.chats.size(); ++i) {
            const auto& c = trace.chats[i];
            ojson line;
            line["type"] = "chat";
            line["index"] = i;
            line["role"] = std::string(to_string(c.role));
            line["retry"] = c.retry;
            line["prompt"] = c.prompt;
            line["response"] = c.response;
            out += line.dump() + "\n";
        }
    }
    return out;
}

InferenceEngine::InferenceEngine(const MemoryStore& store, const Gateway& gateway, Executor& executor,
                                 const Config& config)
    : store_(store), gateway_(gateway), executor_(executor), config_(config) {}

std::string InferenceEngine::generate_model(const Problem& problem, const Knowledge& k, CallLog* log) const {
    Slots slots{{"instructions", std::string(kModelInstructions)},
                {"problem", problem.text},
                {"task", "model"},
                {"attempt", "1"}};
    if (!k.approach.empty()) slots["guidance"] = "Approach:\n" + render_tier(k.approach);
    auto block = gateway_.chat_parsed(LlmRole::generator, slots, [](std::string_view raw) { return parse_block(raw); }, log);
    return block ? *block : std::string{};
}

std::string InferenceEngine::verify_model(const std::string& model, const Knowledge& k, TraceStep& step,
                                          CallLog* log) const {
    if (k.checklist.empty()) {
        step.outcome = "pass";
        step.text = "empty checklist";
        return model;
    }
    Slots slots{{"mode", "check"},
                {"instructions", std::string(kCheckInstructions)},
                {"candidate", model},
                {"cluster_summary", reference_checklist(k)}};
    auto verdict = gateway_.chat_parsed(LlmRole::verifier, slots, [](std::string_view raw) { return parse_check(raw); }, log);
    if (!verdict) {
        step.outcome = "pass";
        step.text = "malformed verifier reply";
        return model;
    }
    if (verdict->pass) {
        step.outcome = "pass";
        return model;
    }
    step.outcome = "revised";
    step.text = verdict->revision;
    return verdict->revision;
}

std::string InferenceEngine::generate_code(const Problem& problem, const std::string& model, const Knowledge& k,
                                           CallLog* log) const {
    Slots slots{{"instructions", std::string(kCodeInstructions)},
                {"problem", problem.text},
                {"task", "code"},
                {"attempt", "1"},
                {"context", "Model:\n" + model}};
    if (!k.approach.empty()) slots["guidance"] = "Approach:\n" + render_tier(k.approach);
    auto block = gateway_.chat_parsed(LlmRole::generator, slots, [](std::string_view raw) { return parse_block(raw); }, log);
    return block ? *block : std::string{};
}

std::string InferenceEngine::verify_code(const std::string& code, const Knowledge& k, TraceStep& step,
                                         CallLog* log) const {
    const auto violations = disallowed_imports(code, SandboxPolicy::default_allowed_libraries());
    if (k.checklist.empty() && violations.empty()) {
        step.outcome = "pass";
        step.text = "empty checklist";
        return code;
    }
    std::string reference = reference_checklist(k);
    if (!violations.empty()) {
        std::string names;
        for (const auto& v : violations) names += (names.empty() ? "" : ", ") + v;
        reference += "\n- Import only gurobipy, pulp, ortools, scipy or networkx for solving. Disallowed imports found: " + names + "\n";
    }
    Slots slots{{"mode", "check"},
                {"instructions", std::string(kCheckInstructions)},
                {"candidate", code},
                {"cluster_summary", reference}};
    auto verdict = gateway_.chat_parsed(LlmRole::verifier, slots, [](std::string_view raw) { return parse_check(raw); }, log);
    if (verdict && !verdict->pass) {
        step.outcome = "revised";
        step.text = verdict->revision;
        return verdict->revision;
    }
    if (!violations.empty()) {
        step.outcome = "fail";
        step.text = "disallowed imports";
        return code;
    }
    step.outcome = "pass";
    if (!verdict) step.text = "malformed verifier reply";
    return code;
}

std::optional<std::string> InferenceEngine::repair(const std::string& code, const std::string& error,
                                                   const Knowledge& k, CallLog* log) const {
    Slots slots{{"code", code}, {"error", error}, {"pitfall", render_tier(k.pitfall)}, {"checklist", render_tier(k.checklist)}};
    auto block = gateway_.chat_parsed(LlmRole::fixer, slots, [](std::string_view raw) { return parse_block(raw); }, log);
    if (block && trim(*block).empty()) return std::nullopt;
    return block;
}

ExecutionResult InferenceEngine::execute(const std::string& code) const {
    auto result = executor_.run(code);
    if (config_.deterministic_clock) result.wall_time = 0.0;
    return result;
}

PathTrace InferenceEngine::run_path(const Problem& problem, const SolutionPath& path, CallLog* log) const {
    PathTrace trace;
    trace.path = path;
    const auto& k_model = store_.cluster(Space::modeling, path.modeling).knowledge;
    const auto& k_code = store_.cluster(Space::coding, path.coding).knowledge;
    auto abandon = [&trace](std::string reason) {
        trace.steps.push_back({StepKind::abandon, "abandoned", std::move(reason), std::nullopt});
    };
    try {
        auto model = generate_model(problem, k_model, log);
        trace.steps.push_back({StepKind::generate_model, model.empty() ? "empty" : "ok", model, std::nullopt});
        if (trim(model).empty()) {
            abandon("empty model generation");
            return trace;
        }
        TraceStep verify{StepKind::verify_model, {}, {}, std::nullopt};
        model = verify_model(model, k_model, verify, log);
        trace.steps.push_back(std::move(verify));

        auto code = generate_code(problem, model, k_code, log);
        trace.steps.push_back({StepKind::generate_code, code.empty() ? "empty" : "ok", code, std::nullopt});
        if (trim(code).empty()) {
            abandon("empty code generation");
            return trace;
        }
        TraceStep verify_c{StepKind::verify_code, {}, {}, std::nullopt};
        code = verify_code(code, k_code, verify_c, log);
        trace.steps.push_back(std::move(verify_c));

        auto result = execute(code);
        ++trace.executions;
        trace.steps.push_back({StepKind::execute, std::string(to_string(result.status)), {}, result});
        while (result.status != ExecStatus::success) {
            if (trace.repairs >= config_.repair_limit) {
                abandon("repair budget exhausted");
                return trace;
            }
            ++trace.repairs;
            auto fixed = repair(code, result.error_payload(), k_code, log);
            if (!fixed) {
                trace.steps.push_back({StepKind::repair, "malformed", {}, std::nullopt});
                continue;
            }
            code = *fixed;
            trace.steps.push_back({StepKind::repair, "ok", code, std::nullopt});
            result = execute(code);
            ++trace.executions;
            trace.steps.push_back({StepKind::execute, std::string(to_string(result.status)), {}, result});
        }
        trace.solved = true;
    } catch (const ProviderError& e) {
        abandon(std::string("provider error: ") + e.what());
    }
    return trace;
}

SolveTrace InferenceEngine::solve(const Problem& problem) const {
    if (store_.nodes().empty()) throw NoMemoryError("memory store is empty; run build-memory first");
    const auto start = std::chrono::steady_clock::now();
    SolveTrace trace;
    trace.problem_id = problem.id;
    CallLog log;
    try {
        const auto query = gateway_.embed(problem.text);
        auto plan = plan_paths(problem, query, store_, gateway_, config_, &log);
        trace.retrieved_instances = std::move(plan.instances);
        trace.retrieved_clusters = std::move(plan.clusters);
        trace.candidates = std::move(plan.candidates);
        trace.pool_size = plan.pool.size();
        trace.global_fallback = plan.global_fallback;
        trace.selector_fallback = plan.selector_fallback;
        trace.queue = std::move(plan.queue);
    } catch (const ProviderError& e) {
        trace.paths.push_back({{}, {{StepKind::abandon, "abandoned", std::string("provider error: ") + e.what(), std::nullopt}}, 0, 0, false});
    }
    for (const auto& path : trace.queue) {
        trace.paths.push_back(run_path(problem, path, &log));
        const auto& last = trace.paths.back();
        if (last.solved) {
            trace.verdict = Verdict::solved;
            trace.answer = last.steps.back().execution->extracted;
            break;
        }
    }
    trace.chats = log.records();
    if (!config_.deterministic_clock) {
        trace.total_wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return trace;
}

SolveTrace solve_baseline(const Problem& problem, const Gateway& gateway, Executor& executor, const Config& config) {
    const auto start = std::chrono::steady_clock::now();
    SolveTrace trace;
    trace.problem_id = problem.id;
    trace.baseline = true;
    CallLog log;
    const auto attempt = baseline_attempt(gateway, executor, problem, 1, config, &log);
    PathTrace path;
    path.steps.push_back({StepKind::generate_model, attempt.modeling_text.empty() ? "empty" : "ok", attempt.modeling_text, std::nullopt});
    if (!attempt.coding_text.empty()) {
        path.steps.push_back({StepKind::generate_code, "ok", attempt.coding_text, std::nullopt});
        path.steps.push_back({StepKind::execute, std::string(to_string(attempt.execution.status)), {}, attempt.execution});
        path.executions = 1;
    } else {
        path.steps.push_back({StepKind::abandon, "abandoned", attempt.execution.stderr_text, std::nullopt});
    }
    path.solved = attempt.execution.status == ExecStatus::success && path.executions == 1;
    trace.paths.push_back(std::move(path));
    if (trace.paths.back().solved) {
        trace.verdict = Verdict::solved;
        trace.answer = attempt.execution.extracted;
    }
    trace.chats = log.records();
    if (!config.deterministic_clock) {
        trace.total_wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return trace;
}

} // namespace dcm
