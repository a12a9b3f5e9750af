#include "dcm/construction.hpp"

#include "dcm/classify.hpp"
#include "dcm/error.hpp"
#include "dcm/similarity.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace dcm {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kSolveInstructions =
    "Formulate the problem as a mathematical model and write a Python script that solves it.\n"
    "Reply with two fenced blocks: first ```model with variables, objective and constraints, then ```python "
    "with the script. Use only gurobipy, pulp, ortools, scipy or networkx for solving. The script must print "
    "exactly one answer block:\n" 
    "=====DCM-ANSWER-BEGIN=====\nobjective=<number>\n<requirement>=<number>\n=====DCM-ANSWER-END=====";

constexpr std::string_view kSplitInstructions =
    "Separate the material into its mathematical model and its solver code. Reply with a ```model block and a "
    "```python block, copying both parts verbatim.";

constexpr std::string_view kSuccessInstructions =
    "The material solved the problem correctly. Extract reusable knowledge: APPROACH items describe how the "
    "problem was formulated, CHECKLIST items describe what to verify in such a formulation. Reply with the "
    "sections APPROACH: and CHECKLIST:, one \"- \" item per line.";

constexpr std::string_view kFailureInstructions =
    "The material failed to solve the problem. Extract PITFALL items: the concrete mistake or runtime failure "
    "and how to avoid it. Reply with the section PITFALL:, one \"- \" item per line.";

std::string last_nonempty_line(std::string_view text) {
    const auto lines = split_lines(text);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        auto t = trim(*it);
        if (!t.empty()) return t;
    }
    return {};
}

std::string truncate(std::string text, std::size_t limit) {
    if (text.size() > limit) text.resize(limit);
    return text;
}

std::string answer_text(const ExtractedAnswer& answer) {
    std::string out = "objective=" + format_number(answer.objective);
    for (const auto& [name, value] : answer.requirements) out += " " + name + "=" + format_number(value);
    return out;
}

std::string failure_material(const AttemptRecord& attempt) {
    std::string out = attempt.modeling_text + "\n" + attempt.coding_text + "\n";
    if (attempt.execution.status == ExecStatus::success && attempt.execution.extracted) {
        out += "Result: " + answer_text(*attempt.execution.extracted) + " (does not match the expected answer)\n";
    } else {
        out += "Error: " + last_nonempty_line(attempt.execution.error_payload()) + "\n";
    }
    return out;
}

ExecutionResult failed_execution(std::string message) {
    ExecutionResult r;
    r.status = ExecStatus::runtime_error;
    r.stderr_text = std::move(message);
    return r;
}

} // namespace

std::string_view solve_instructions() {
    return kSolveInstructions;
}

void ConstructionLog::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write construction log " + path.string());
    for (const auto& line : lines_) out << line << '\n';
}

std::optional<SplitSolution> decompose(const Gateway& gateway, std::string_view solution, CallLog* log) {
    if (auto split = parse_split(solution)) return split;
    Slots slots{{"instructions", std::string(kSplitInstructions)}, {"task", "split"}, {"solution", std::string(solution)}};
    return gateway.chat_parsed(LlmRole::extractor, slots, [](std::string_view raw) { return parse_split(raw); }, log);
}

AttemptRecord baseline_attempt(const Gateway& gateway, Executor& executor, const Problem& problem, int round,
                               const Config& config, CallLog* log) {
    AttemptRecord record;
    record.problem_id = problem.id;
    record.round_index = round;
    try {
        Slots slots{{"instructions", std::string(kSolveInstructions)},
                    {"problem", problem.text},
                    {"task", "solve"},
                    {"attempt", std::to_string(round)}};
        const auto reply = gateway.chat(LlmRole::generator, slots, log);
        auto split = decompose(gateway, reply, log);
        if (!split) {
            record.modeling_text = trim(reply);
            record.execution = failed_execution("undecomposable solution: no separate model and code sections");
            return record;
        }
        record.modeling_text = split->modeling;
        record.coding_text = split->coding;
        record.execution = executor.run(split->coding);
    } catch (const ProviderError& e) {
        record.execution = failed_execution(std::string("provider error: ") + e.what());
        record.provider_failure = true;
    }
    if (config.deterministic_clock) record.execution.wall_time = 0.0;
    record.correct = record.execution.status == ExecStatus::success && record.execution.extracted &&
                     problem.ground_truth &&
                     judge(*record.execution.extracted, *problem.ground_truth, config.numeric_rel_tolerance,
                           config.numeric_abs_floor);
    return record;
}

std::vector<std::vector<AttemptRecord>> collect_trajectories(const Gateway& gateway, Executor& executor,
                                                             std::span<const Problem> corpus, const Config& config,
                                                             CallLog* log) {
    std::vector<std::vector<AttemptRecord>> out;
    out.reserve(corpus.size());
    const int rounds = config.max_classification_rounds;
    for (const auto& problem : corpus) {
        if (!problem.ground_truth) throw InputError("construction problem '" + problem.id + "' has no ground truth");
        std::vector<AttemptRecord> attempts;
        for (int round = 1; round <= rounds; ++round) {
            attempts.push_back(baseline_attempt(gateway, executor, problem, round, config, log));
            if (!attempts.back().correct) continue;
            if (round == 1 && rounds > 1) {
                attempts.push_back(baseline_attempt(gateway, executor, problem, 2, config, log));
            }
            break;
        }
        out.push_back(std::move(attempts));
    }
    return out;
}

Knowledge extract_phi(const Gateway& gateway, const Problem& problem, SampleType type, const AttemptRecord* success,
                      std::span<const AttemptRecord> failures, CallLog* log) {
    const bool wants_success = type != SampleType::C;
    const bool wants_failure = type != SampleType::A;
    if (wants_success && !success) throw InputError("extract_phi: type " + std::string(to_string(type)) + " needs a successful attempt");
    if (wants_failure && failures.empty()) throw InputError("extract_phi: type " + std::string(to_string(type)) + " needs a failed attempt");

    auto parse = [](std::string_view raw) { return parse_knowledge(raw); };
    Knowledge phi;
    if (wants_success) {
        Slots slots{{"instructions", std::string(kSuccessInstructions)},
                    {"task", "success"},
                    {"problem", problem.text},
                    {"solution", success->modeling_text + "\n" + success->coding_text}};
        if (auto k = gateway.chat_parsed(LlmRole::extractor, slots, parse, log)) {
            phi.approach = k->approach;
            phi.checklist = k->checklist;
        }
    }
    if (wants_failure) {
        for (const auto& failure : failures) {
            Slots slots{{"instructions", std::string(kFailureInstructions)},
                        {"task", "failure"},
                        {"problem", problem.text},
                        {"solution", failure_material(failure)}};
            if (auto k = gateway.chat_parsed(LlmRole::extractor, slots, parse, log)) {
                phi = merge_union(phi, Knowledge{{}, {}, k->pitfall});
            }
        }
    }
    return phi;
}

MemoryBuilder::MemoryBuilder(MemoryStore& store, const Gateway& gateway, const Config& config, ConstructionLog* log,
                             CallLog* calls)
    : store_(store), gateway_(gateway), config_(config), log_(log), calls_(calls) {}

std::vector<ClusterId> MemoryBuilder::candidate_clusters(Space space, const Embedding& embedding) const {
    const auto& clusters = store_.clusters(space);
    const auto top = top_k(clusters.size(), static_cast<std::size_t>(config_.top_k),
                           [&](std::size_t i) { return similarity(embedding, clusters[i].centroid); });
    std::vector<ClusterId> out;
    out.reserve(top.size());
    for (auto i : top) out.push_back(clusters[i].id);
    return out;
}

std::string MemoryBuilder::cluster_summary(Space space, std::span<const ClusterId> candidates) const {
    if (candidates.empty()) return {};
    const std::size_t per_cluster = std::max<std::size_t>(config_.verifier_char_budget / candidates.size(), 64);
    std::string out;
    for (auto id : candidates) {
        const auto& c = store_.cluster(space, id);
        std::string block = "### " + format_cluster(space, id) + "\n";
        for (std::size_t i = 0; i < std::min<std::size_t>(2, c.knowledge.approach.size()); ++i) {
            block += "Approach: " + c.knowledge.approach[i] + "\n";
        }
        for (std::size_t i = 0; i < std::min<std::size_t>(2, c.members.size()); ++i) {
            const auto& n = store_.node(c.members[i]);
            const auto& text = space == Space::modeling ? n.modeling_text : n.coding_text;
            const auto lines = split_lines(text);
            for (std::size_t l = 0; l < std::min<std::size_t>(3, lines.size()); ++l) {
                auto t = trim(lines[l]);
                if (!t.empty()) block += truncate(t, 160) + "\n";
            }
        }
        if (block.size() > per_cluster) {
            // Cut at a line boundary so the verifier never sees half a line.
            auto cut = block.rfind('\n', per_cluster);
            block.resize(cut == std::string::npos ? per_cluster : cut + 1);
        }
        out += block + "\n";
    }
    return out;
}

Assignment MemoryBuilder::assign_cluster(Space space, NodeId node_id) {
    const auto& node = store_.node(node_id);
    const auto& embedding = space == Space::modeling ? node.e_m : node.e_c;
    Assignment result;
    result.candidates = candidate_clusters(space, embedding);
    if (!result.candidates.empty()) {
        std::vector<std::string> labels;
        for (auto id : result.candidates) labels.push_back(format_cluster(space, id));
        Slots slots{{"mode", "match"},
                    {"candidate", space == Space::modeling ? node.modeling_text : node.coding_text},
                    {"cluster_summary", cluster_summary(space, result.candidates)}};
        auto verdict = gateway_.chat_parsed(
            LlmRole::verifier, slots, [&labels](std::string_view raw) { return parse_match(raw, labels); }, calls_);
        if (!verdict) ++stats_.verifier_fallbacks;
        if (verdict && verdict->matched) {
            auto chosen = result.candidates.front();
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == verdict->cluster_label) {
                    chosen = result.candidates[i];
                    break;
                }
            }
            store_.join_cluster(space, chosen, node_id);
            result.cluster = chosen;
            return result;
        }
    }
    result.cluster = store_.create_cluster(space, node_id);
    result.created = true;
    return result;
}

bool MemoryBuilder::synthesize_knowledge(Space space, ClusterId id) {
    auto& cluster = store_.mutable_cluster(space, id);
    std::string batch;
    for (std::size_t i = 0; i < cluster.pending_phis.size(); ++i) {
        batch += "Instance " + std::to_string(i + 1) + ":\n" + render_knowledge(cluster.pending_phis[i]) + "\n";
    }
    Slots slots{{"version", std::to_string(cluster.knowledge_version)},
                {"current", render_knowledge(cluster.knowledge)},
                {"batch", batch}};
    auto merged = gateway_.chat_parsed(LlmRole::synthesizer, slots,
                                       [](std::string_view raw) { return parse_knowledge(raw); }, calls_);
    auto& target = store_.mutable_cluster(space, id);
    ojson record;
    record["event"] = "synthesis";
    record["space"] = std::string(to_string(space));
    record["cluster"] = format_cluster(space, id);
    record["batch"] = target.pending_phis.size();
    if (!merged) {
        ++stats_.synthesis_failures;
        record["ok"] = false;
        record["version"] = target.knowledge_version;
        if (log_) log_->append(record.dump());
        return false;
    }
    target.knowledge = std::move(*merged);
    target.pending_phis.clear();
    ++target.knowledge_version;
    ++stats_.synthesis_events;
    record["ok"] = true;
    record["version"] = target.knowledge_version;
    if (log_) log_->append(record.dump());
    return true;
}

NodeId MemoryBuilder::ingest_node(ExperienceNode node) {
    const auto phi = node.phi;
    const auto id = store_.add_node(std::move(node));
    const auto m = assign_cluster(Space::modeling, id);
    store_.mutable_node(id).modeling_cluster = m.cluster;
    const auto c = assign_cluster(Space::coding, id);
    store_.mutable_node(id).coding_cluster = c.cluster;
    store_.mutable_graph().increment(m.cluster, c.cluster);

    const auto& stored = store_.node(id);
    ojson record;
    record["event"] = "node";
    record["node"] = format_node(id);
    record["problem_id"] = stored.problem_id;
    record["sample_type"] = std::string(to_string(stored.sample_type));
    record["modeling_cluster"] = format_cluster(Space::modeling, m.cluster);
    record["modeling_created"] = m.created;
    record["coding_cluster"] = format_cluster(Space::coding, c.cluster);
    record["coding_created"] = c.created;
    record["edge_weight"] = store_.graph().weight(m.cluster, c.cluster);
    if (log_) log_->append(record.dump());

    for (auto [space, cid] : {std::pair{Space::modeling, m.cluster}, std::pair{Space::coding, c.cluster}}) {
        auto& cluster = store_.mutable_cluster(space, cid);
        cluster.pending_phis.push_back(phi);
        if (static_cast<int>(cluster.pending_phis.size()) >= config_.update_threshold) synthesize_knowledge(space, cid);
    }
    return id;
}

BuildResult construct_memory(std::span<const Problem> corpus, const Gateway& gateway, Executor& executor,
                             const Config& config) {
    if (corpus.empty()) throw InputError("construction corpus is empty");
    BuildResult result{MemoryStore(gateway.dim(), config.update_threshold), {}, {}, {}};
    result.store.provenance = {gateway.chat_model(), gateway.embed_model(), config.seed};
    result.store.config_snapshot = config.to_kv();

    const auto trajectories = collect_trajectories(gateway, executor, corpus, config);
    const bool provider_down = std::all_of(trajectories.begin(), trajectories.end(), [](const auto& attempts) {
        return std::all_of(attempts.begin(), attempts.end(), [](const AttemptRecord& a) { return a.provider_failure; });
    });
    if (provider_down) throw ProviderError("every generation call failed: " + trajectories.front().front().execution.stderr_text);
    MemoryBuilder builder(result.store, gateway, config, &result.log);

    for (std::size_t p = 0; p < corpus.size(); ++p) {
        const auto& problem = corpus[p];
        const auto& attempts = trajectories[p];
        auto drop = [&](const std::string& reason) {
            ++builder.mutable_stats().dropped;
            result.warnings.push_back("dropped " + problem.id + ": " + reason);
            ojson record;
            record["event"] = "dropped";
            record["problem_id"] = problem.id;
            record["reason"] = reason;
            result.log.append(record.dump());
        };

        SampleType type;
        try {
            type = classify_trajectory(attempts, config.max_classification_rounds);
        } catch (const Error& e) {
            drop(e.what());
            continue;
        }

        const AttemptRecord* representative = nullptr;
        const AttemptRecord* success = nullptr;
        std::vector<AttemptRecord> failures;
        for (const auto& a : attempts) {
            if (a.correct) success = &a;
            else failures.push_back(a);
        }
        if (type == SampleType::A) success = &attempts.front();
        representative = type == SampleType::C ? &attempts.back() : success;
        if (trim(representative->modeling_text).empty() || trim(representative->coding_text).empty()) {
            drop("solution has no separable model and code sections");
            continue;
        }
        auto& stats = builder.mutable_stats();
        (type == SampleType::A ? stats.type_a : type == SampleType::B ? stats.type_b : stats.type_c)++;

        ExperienceNode node;
        node.problem_id = problem.id;
        node.sample_type = type;
        node.modeling_text = representative->modeling_text;
        node.coding_text = representative->coding_text;
        node.phi = extract_phi(gateway, problem, type, type == SampleType::C ? nullptr : success, failures);
        node.e_m = gateway.embed(node.modeling_text);
        node.e_c = gateway.embed(node.coding_text);
        builder.ingest_node(std::move(node));
    }
    result.stats = builder.stats();
    result.store.check_invariants();
    return result;
}

} // namespace dcm
