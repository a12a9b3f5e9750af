// dcm: build dual-cluster memories, solve problems with them, and run the
// evaluation harnesses. Exit codes are listed in usage_footer below.

#include "dcm/bench.hpp"
#include "dcm/corpus.hpp"
#include "dcm/error.hpp"
#include "dcm/http_backend.hpp"
#include "dcm/parse.hpp"
#include "dcm/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitStore = 3;
constexpr int kExitProvider = 4;
constexpr int kExitEnvironment = 5;
constexpr int kExitOther = 6;
constexpr int kExitUnsolved = 10;

constexpr const char* usage_footer =
    "Exit codes: 0 ok, 1 usage, 2 invalid input or id overlap, 3 store missing/corrupt/version,\n"
    "4 provider failure, 5 execution environment, 6 other error, 10 solve ended failed_all_paths.";

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string wire_log;
};

dcm::Config load_config(const Common& c) {
    std::string text;
    if (!c.config_path.empty()) {
        std::ifstream in(c.config_path);
        if (!in) throw dcm::InputError("cannot read config file " + c.config_path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        text = buffer.str();
    }
    for (const auto& o : c.overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw dcm::InputError("--set expects key=value, got '" + o + "'");
        text += "\n" + o.substr(0, eq) + " = " + o.substr(eq + 1);
    }
    auto config = dcm::Config::parse(text);
    config.validate();
    return config;
}

struct Session {
    dcm::Config config;
    std::shared_ptr<std::ofstream> wire;
    std::optional<dcm::Gateway> gateway;
    std::unique_ptr<dcm::Executor> executor;
};

Session open_session(const Common& c) {
    Session s;
    s.config = load_config(c);
    dcm::WireLog wire_log;
    if (!c.wire_log.empty()) {
        s.wire = std::make_shared<std::ofstream>(c.wire_log, std::ios::app);
        wire_log = [w = s.wire](std::string_view direction, std::string_view body) {
            *w << direction << '\t' << body << '\n';
        };
    }
    s.gateway.emplace(dcm::make_gateway(s.config, wire_log));
    s.executor = dcm::make_executor(s.config);
    return s;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config_path, "Config file (flat key = value)");
    cmd->add_option("--set", c.overrides, "Override a config key, key=value (repeatable)");
    cmd->add_option("--wire-log", c.wire_log, "Append HTTP request/response bodies here (provider.log_wire = true)");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw dcm::InputError("cannot write " + path);
    out << text;
}

std::vector<double> parse_ratios(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        auto value = dcm::parse_number(part);
        if (!value) throw dcm::InputError("bad ratio '" + part + "'");
        out.push_back(*value);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-cluster memory agent for optimization modeling"};
    app.footer(usage_footer);
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic problem corpus");
    std::size_t synth_count = 20;
    std::uint64_t synth_seed = 42;
    std::string synth_prefix = "syn", synth_out, synth_scenario;
    synth->add_option("--count", synth_count, "Number of problems")->capture_default_str();
    synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
    synth->add_option("--prefix", synth_prefix, "Id prefix")->capture_default_str();
    synth->add_option("--scenario", synth_scenario, "Fixed scenario set instead: memory | benchmark")
        ->check(CLI::IsMember({"memory", "benchmark"}));
    synth->add_option("-o,--out", synth_out, "Output problem file")->required();

    // build-memory
    auto* build = app.add_subcommand("build-memory", "Construct a memory store from a solved corpus");
    Common build_common;
    std::string build_corpus, build_out, build_eval, build_log;
    add_common(build, build_common);
    build->add_option("--corpus", build_corpus, "Construction problems with ground truth")->required();
    build->add_option("-o,--out", build_out, "Store directory")->required();
    build->add_option("--eval", build_eval, "Evaluation set that must not share ids with the corpus");
    build->add_option("--log", build_log, "Write the construction log here");

    // solve
    auto* solve = app.add_subcommand("solve", "Solve one problem with a memory store");
    Common solve_common;
    std::string solve_problem, solve_store, solve_id, solve_trace;
    bool solve_baseline = false;
    add_common(solve, solve_common);
    solve->add_option("--problem", solve_problem, "Problem file (first record, or --id)")->required();
    solve->add_option("--id", solve_id, "Problem id within the file");
    solve->add_option("--store", solve_store, "Store directory");
    solve->add_option("--trace", solve_trace, "Write the solve trace here");
    solve->add_flag("--baseline", solve_baseline, "Memory-free single attempt");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate accuracy on a benchmark");
    Common eval_common;
    std::string eval_bench, eval_store, eval_results, eval_traces;
    bool eval_baseline = false, eval_compare = false;
    add_common(eval, eval_common);
    eval->add_option("--benchmark", eval_bench, "Benchmark problems with ground truth")->required();
    eval->add_option("--store", eval_store, "Store directory (DCM mode)");
    eval->add_flag("--baseline", eval_baseline, "Baseline mode only");
    eval->add_flag("--compare", eval_compare, "Run baseline as well as DCM mode");
    eval->add_option("--results", eval_results, "Per-problem results file");
    eval->add_option("--traces", eval_traces, "Per-problem solve traces, one JSONL file");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Accuracy under memory budgets");
    Common ablate_common;
    std::string ablate_store, ablate_bench, ablate_ratios = "0.1,0.4,0.7,1.0";
    std::uint64_t ablate_seed = 42;
    bool ablate_baseline = false;
    add_common(ablate_cmd, ablate_common);
    ablate_cmd->add_option("--store", ablate_store, "Store directory")->required();
    ablate_cmd->add_option("--benchmark", ablate_bench, "Benchmark problems")->required();
    ablate_cmd->add_option("--ratios", ablate_ratios, "Comma separated budgets in (0,1]")->capture_default_str();
    ablate_cmd->add_option("--seed", ablate_seed, "Subsampling seed")->capture_default_str();
    ablate_cmd->add_flag("--baseline", ablate_baseline, "Add a baseline row");

    // transfer
    auto* transfer_cmd = app.add_subcommand("transfer", "Evaluate a store built by another model");
    Common transfer_common;
    std::string transfer_store, transfer_bench;
    add_common(transfer_cmd, transfer_common);
    transfer_cmd->add_option("--store", transfer_store, "Store directory")->required();
    transfer_cmd->add_option("--benchmark", transfer_bench, "Benchmark problems")->required();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Cluster and graph statistics of a store");
    std::string inspect_store_dir;
    inspect->add_option("--store", inspect_store_dir, "Store directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth) {
            std::vector<dcm::Problem> problems;
            if (synth_scenario == "memory") problems = dcm::scenario_memory_corpus();
            else if (synth_scenario == "benchmark") problems = dcm::scenario_benchmark();
            else problems = dcm::synthetic_corpus(synth_count, synth_seed, synth_prefix);
            dcm::write_problems(synth_out, problems);
            std::cout << "wrote " << problems.size() << " problems to " << synth_out << "\n";
            return kExitOk;
        }
        if (*build) {
            auto session = open_session(build_common);
            const auto corpus = dcm::read_problems(build_corpus);
            std::vector<dcm::Problem> eval_set;
            if (!build_eval.empty()) eval_set = dcm::read_problems(build_eval);
            auto result = dcm::build_memory(corpus, eval_set, *session.gateway, *session.executor, session.config);
            dcm::save_store(result.store, build_out);
            if (!build_log.empty()) result.log.write(build_log);
            std::cout << dcm::format_build_report(result);
            return kExitOk;
        }
        if (*solve) {
            auto session = open_session(solve_common);
            const auto problems = dcm::read_problems(solve_problem);
            if (problems.empty()) throw dcm::InputError("problem file is empty");
            const dcm::Problem* problem = &problems.front();
            if (!solve_id.empty()) {
                auto it = std::find_if(problems.begin(), problems.end(), [&](const dcm::Problem& p) { return p.id == solve_id; });
                if (it == problems.end()) throw dcm::InputError("no problem with id '" + solve_id + "'");
                problem = &*it;
            }
            dcm::SolveTrace trace;
            if (solve_baseline) {
                trace = dcm::solve_baseline(*problem, *session.gateway, *session.executor, session.config);
            } else {
                if (solve_store.empty()) throw dcm::InputError("--store is required unless --baseline is given");
                const auto store = dcm::load_store(solve_store);
                dcm::InferenceEngine engine(store, *session.gateway, *session.executor, session.config);
                trace = engine.solve(*problem);
            }
            if (!solve_trace.empty()) write_text(solve_trace, dcm::trace_to_jsonl(trace, session.config.verbose_trace));
            std::cout << "problem     " << trace.problem_id << "\n";
            std::cout << "verdict     " << dcm::to_string(trace.verdict) << "\n";
            if (trace.answer) {
                std::cout << "objective   " << dcm::format_number(trace.answer->objective) << "\n";
                for (const auto& [name, value] : trace.answer->requirements) {
                    std::cout << name << " = " << dcm::format_number(value) << "\n";
                }
            }
            std::cout << "executions  " << trace.executions() << "\n";
            std::cout << "backtracks  " << trace.backtracks() << "\n";
            std::cout << "wall_time_s " << trace.total_wall_time << "\n";
            return trace.verdict == dcm::Verdict::solved ? kExitOk : kExitUnsolved;
        }
        if (*eval) {
            auto session = open_session(eval_common);
            const auto bench = dcm::read_problems(eval_bench);
            std::vector<dcm::EvalReport> reports;
            std::string traces;
            auto collect = [&](const dcm::SolveTrace& t) { traces += dcm::trace_to_jsonl(t, session.config.verbose_trace); };
            std::function<void(const dcm::SolveTrace&)> on_trace;
            if (!eval_traces.empty()) on_trace = collect;
            if (eval_baseline || eval_compare) {
                reports.push_back(dcm::evaluate(bench, nullptr, *session.gateway, *session.executor, session.config, on_trace));
            }
            if (!eval_baseline) {
                if (eval_store.empty()) throw dcm::InputError("--store is required unless --baseline is given");
                const auto store = dcm::load_store(eval_store);
                reports.push_back(dcm::evaluate(bench, &store, *session.gateway, *session.executor, session.config, on_trace));
            }
            if (!eval_results.empty()) {
                std::string all;
                for (const auto& r : reports) all += r.results_jsonl();
                write_text(eval_results, all);
            }
            if (!eval_traces.empty()) write_text(eval_traces, traces);
            std::cout << dcm::format_eval_table(reports);
            return kExitOk;
        }
        if (*ablate_cmd) {
            auto session = open_session(ablate_common);
            const auto store = dcm::load_store(ablate_store);
            const auto bench = dcm::read_problems(ablate_bench);
            const auto ratios = parse_ratios(ablate_ratios);
            const auto table = dcm::ablate(store, ratios, ablate_seed, bench, *session.gateway, *session.executor,
                                           session.config, ablate_baseline);
            std::cout << dcm::format_ablation_table(table);
            return kExitOk;
        }
        if (*transfer_cmd) {
            auto session = open_session(transfer_common);
            const auto store = dcm::load_store(transfer_store);
            const auto bench = dcm::read_problems(transfer_bench);
            const auto row = dcm::transfer(store, bench, *session.gateway, *session.executor, session.config);
            for (const auto& w : row.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << dcm::format_transfer_row(row);
            return kExitOk;
        }
        if (*inspect) {
            std::cout << dcm::inspect_store(dcm::load_store(inspect_store_dir));
            return kExitOk;
        }
    } catch (const dcm::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const dcm::DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const dcm::StoreError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStore;
    } catch (const dcm::NoMemoryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStore;
    } catch (const dcm::ProviderError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const dcm::EnvironmentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEnvironment;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return kExitUsage;
}
