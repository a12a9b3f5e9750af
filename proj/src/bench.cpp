#include "dcm/bench.hpp"

#include "dcm/error.hpp"
#include "dcm/parse.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <set>
#include <thread>

namespace dcm {

using ojson = nlohmann::ordered_json;

namespace {

std::string pad(std::string text, std::size_t width) {
    if (text.size() < width) text.append(width - text.size(), ' ');
    return text;
}

std::string seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", s);
    return buf;
}

} // namespace

std::unique_ptr<Executor> make_executor(const Config& config) {
    if (config.executor == "stub") return std::make_unique<StubExecutor>();
    if (config.executor == "harness") {
        SandboxPolicy policy;
        policy.timeout_seconds = config.exec_timeout_seconds;
        policy.max_output_bytes = config.max_output_bytes;
        policy.allow_network = config.allow_network;
        return std::make_unique<HarnessExecutor>(config.harness_path, policy, config.max_parallel_executions);
    }
    throw InputError("executor must be stub or harness, got '" + config.executor + "'");
}

void check_disjoint(std::span<const Problem> corpus, std::span<const Problem> eval) {
    std::set<std::string> ids;
    for (const auto& p : eval) ids.insert(p.id);
    std::vector<std::string> shared;
    for (const auto& p : corpus) {
        if (ids.contains(p.id)) shared.push_back(p.id);
    }
    if (shared.empty()) return;
    std::string list;
    for (const auto& id : shared) list += (list.empty() ? "" : ", ") + id;
    throw InputError("construction corpus and evaluation set share problem ids: " + list);
}

BuildResult build_memory(std::span<const Problem> corpus, std::span<const Problem> eval, const Gateway& gateway,
                         Executor& executor, const Config& config) {
    if (corpus.empty()) throw InputError("construction corpus is empty");
    check_disjoint(corpus, eval);
    return construct_memory(corpus, gateway, executor, config);
}

std::string format_build_report(const BuildResult& result) {
    const auto& s = result.stats;
    const auto& store = result.store;
    std::string out;
    out += "nodes                 " + std::to_string(store.nodes().size()) + "\n";
    out += "type_a                " + std::to_string(s.type_a) + "\n";
    out += "type_b                " + std::to_string(s.type_b) + "\n";
    out += "type_c                " + std::to_string(s.type_c) + "\n";
    out += "dropped               " + std::to_string(s.dropped) + "\n";
    out += "modeling_clusters     " + std::to_string(store.clusters(Space::modeling).size()) + "\n";
    out += "coding_clusters       " + std::to_string(store.clusters(Space::coding).size()) + "\n";
    out += "edges                 " + std::to_string(store.graph().edge_count()) + "\n";
    out += "synthesis_events      " + std::to_string(s.synthesis_events) + "\n";
    out += "synthesis_failures    " + std::to_string(s.synthesis_failures) + "\n";
    out += "verifier_fallbacks    " + std::to_string(s.verifier_fallbacks) + "\n";
    for (const auto& w : result.warnings) out += "warning: " + w + "\n";
    return out;
}

std::string format_percent(std::size_t numerator, std::size_t denominator) {
    if (denominator == 0) return "n/a";
    // Hundredths of a percent, rounded half up, in integer arithmetic.
    const auto hundredths = (numerator * 20000 + denominator) / (2 * denominator);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%zu.%02zu%%", hundredths / 100, hundredths % 100);
    return buf;
}

std::string EvalReport::accuracy_text() const {
    return format_percent(solved, total);
}

std::string EvalReport::results_jsonl() const {
    std::string out;
    for (const auto& r : results) {
        ojson j;
        j["id"] = r.id;
        j["mode"] = mode;
        j["verdict"] = std::string(to_string(r.verdict));
        j["correct"] = r.correct;
        j["executions"] = r.executions;
        j["backtracks"] = r.backtracks;
        j["wall_time"] = r.wall_time;
        if (r.answer) {
            ojson a;
            a["objective"] = r.answer->objective;
            ojson req = ojson::object();
            for (const auto& [name, value] : r.answer->requirements) req[name] = value;
            a["requirements"] = req;
            j["answer"] = a;
        } else {
            j["answer"] = nullptr;
        }
        out += j.dump() + "\n";
    }
    return out;
}

EvalReport evaluate(std::span<const Problem> problems, const MemoryStore* store, const Gateway& gateway,
                    Executor& executor, const Config& config, const std::function<void(const SolveTrace&)>& on_trace) {
    if (problems.empty()) throw InputError("benchmark has no problems");
    for (const auto& p : problems) {
        if (!p.ground_truth) throw InputError("benchmark problem '" + p.id + "' has no ground truth");
    }
    if (store && store->nodes().empty()) throw NoMemoryError("memory store is empty; run build-memory first");

    std::vector<SolveTrace> traces(problems.size());
    std::optional<InferenceEngine> engine;
    if (store) engine.emplace(*store, gateway, executor, config);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= problems.size()) return;
            try {
                traces[i] = engine ? engine->solve(problems[i]) : solve_baseline(problems[i], gateway, executor, config);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = problems.size();
                return;
            }
        }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, config.workers));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(workers, problems.size()); ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<std::size_t> order(problems.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return problems[a].id < problems[b].id; });

    EvalReport report;
    report.mode = store ? "dcm" : "baseline";
    report.total = problems.size();
    double solved_time = 0.0;
    for (auto i : order) {
        const auto& trace = traces[i];
        ProblemResult r;
        r.id = problems[i].id;
        r.verdict = trace.verdict;
        r.answer = trace.answer;
        r.executions = trace.executions();
        r.backtracks = trace.backtracks();
        r.wall_time = trace.total_wall_time;
        r.correct = trace.verdict == Verdict::solved && trace.answer &&
                    judge(*trace.answer, *problems[i].ground_truth, config.numeric_rel_tolerance, config.numeric_abs_floor);
        if (r.correct) {
            ++report.solved;
            solved_time += r.wall_time;
        }
        report.total_wall_time += r.wall_time;
        report.results.push_back(std::move(r));
        if (on_trace) on_trace(trace);
    }
    if (report.solved > 0) report.mean_wall_time_solved = solved_time / static_cast<double>(report.solved);
    return report;
}

std::string format_eval_table(std::span<const EvalReport> reports) {
    std::string out = pad("mode", 10) + pad("solved", 8) + pad("total", 7) + pad("accuracy", 10) +
                      pad("mean_time_solved_s", 20) + "total_time_s\n";
    for (const auto& r : reports) {
        out += pad(r.mode, 10) + pad(std::to_string(r.solved), 8) + pad(std::to_string(r.total), 7) +
               pad(r.accuracy_text(), 10) + pad(seconds(r.mean_wall_time_solved), 20) + seconds(r.total_wall_time) + "\n";
    }
    return out;
}

AblationTable ablate(const MemoryStore& store, std::span<const double> ratios, std::uint64_t seed,
                     std::span<const Problem> benchmark, const Gateway& gateway, Executor& executor,
                     const Config& config, bool with_baseline) {
    if (ratios.empty()) throw InputError("ablation needs at least one ratio");
    AblationTable table;
    std::vector<double> sorted(ratios.begin(), ratios.end());
    std::sort(sorted.begin(), sorted.end());
    for (double ratio : sorted) {
        const auto reduced = subsample(store, ratio, seed);
        AblationRow row;
        row.ratio = ratio;
        row.nodes = reduced.nodes().size();
        row.modeling_clusters = reduced.clusters(Space::modeling).size();
        row.coding_clusters = reduced.clusters(Space::coding).size();
        row.report = evaluate(benchmark, &reduced, gateway, executor, config);
        if (!table.rows.empty() && row.report.solved < table.rows.back().report.solved) table.monotone = false;
        table.rows.push_back(std::move(row));
    }
    if (with_baseline) table.baseline = evaluate(benchmark, nullptr, gateway, executor, config);
    return table;
}

std::string format_ablation_table(const AblationTable& table) {
    std::string out = pad("budget", 9) + pad("nodes", 7) + pad("modeling_clusters", 19) + pad("coding_clusters", 17) +
                      pad("solved", 8) + pad("total", 7) + "accuracy\n";
    if (table.baseline) {
        out += pad("baseline", 9) + pad("0", 7) + pad("0", 19) + pad("0", 17) + pad(std::to_string(table.baseline->solved), 8) +
               pad(std::to_string(table.baseline->total), 7) + table.baseline->accuracy_text() + "\n";
    }
    for (const auto& row : table.rows) {
        char budget[16];
        std::snprintf(budget, sizeof budget, "%.0f%%", row.ratio * 100.0);
        out += pad(budget, 9) + pad(std::to_string(row.nodes), 7) + pad(std::to_string(row.modeling_clusters), 19) +
               pad(std::to_string(row.coding_clusters), 17) + pad(std::to_string(row.report.solved), 8) +
               pad(std::to_string(row.report.total), 7) + row.report.accuracy_text() + "\n";
    }
    out += std::string("monotone: ") + (table.monotone ? "yes" : "no") + "\n";
    return out;
}

TransferRow transfer(const MemoryStore& store, std::span<const Problem> benchmark, const Gateway& gateway,
                     Executor& executor, const Config& config) {
    TransferRow row;
    row.memory_model = store.provenance.chat_model;
    if (row.memory_model.empty()) {
        row.memory_model = "unknown";
        row.warnings.push_back("store has no provenance; the constructing model is unknown");
    }
    row.inference_model = gateway.chat_model();
    row.report = evaluate(benchmark, &store, gateway, executor, config);
    return row;
}

std::string format_transfer_row(const TransferRow& row) {
    std::string out = pad("memory_from", 16) + pad("inference", 16) + pad("solved", 8) + pad("total", 7) + "accuracy\n";
    out += pad(row.memory_model, 16) + pad(row.inference_model, 16) + pad(std::to_string(row.report.solved), 8) +
           pad(std::to_string(row.report.total), 7) + row.report.accuracy_text() + "\n";
    for (const auto& w : row.warnings) out += "warning: " + w + "\n";
    return out;
}

std::string inspect_store(const MemoryStore& store) {
    std::map<SampleType, std::size_t> types;
    for (const auto& n : store.nodes()) ++types[n.sample_type];
    std::string out;
    out += "dim                " + std::to_string(store.dim()) + "\n";
    out += "provenance         chat=" + store.provenance.chat_model + " embed=" + store.provenance.embed_model +
           " seed=" + std::to_string(store.provenance.seed) + "\n";
    out += "nodes              " + std::to_string(store.nodes().size()) + " (A " + std::to_string(types[SampleType::A]) +
           ", B " + std::to_string(types[SampleType::B]) + ", C " + std::to_string(types[SampleType::C]) + ")\n";
    out += "modeling_clusters  " + std::to_string(store.clusters(Space::modeling).size()) + "\n";
    out += "coding_clusters    " + std::to_string(store.clusters(Space::coding).size()) + "\n";
    out += "edges              " + std::to_string(store.graph().edge_count()) + " (total weight " +
           std::to_string(store.graph().total_weight()) + ")\n";
    for (auto space : {Space::modeling, Space::coding}) {
        for (const auto& c : store.clusters(space)) {
            const auto& k = c.knowledge;
            out += "  " + pad(format_cluster(space, c.id), 6) + "members=" + std::to_string(c.members.size()) +
                   " version=" + std::to_string(c.knowledge_version) + " pending=" + std::to_string(c.pending_phis.size()) +
                   " K=" + std::to_string(k.approach.size()) + "/" + std::to_string(k.checklist.size()) + "/" +
                   std::to_string(k.pitfall.size());
            if (!k.approach.empty()) out += " | " + k.approach.front();
            out += "\n";
        }
    }
    for (const auto& [key, w] : store.graph().edges()) {
        out += "  edge " + format_cluster(Space::modeling, key.first) + " -> " + format_cluster(Space::coding, key.second) +
               " w=" + std::to_string(w) + "\n";
    }
    return out;
}

} // namespace dcm
