#include "catch_amalgamated.hpp"

#include "dcm/bench.hpp"
#include "dcm/corpus.hpp"
#include "dcm/error.hpp"
#include "dcm/synthetic.hpp"

#include "support.hpp"

#include <cstdlib>
#include <random>

using namespace dcm;
using namespace dcm::test;

namespace {

struct Scenario {
    Config config = mock_config();
    MockWorld world{config};
    StubExecutor exec;
    std::vector<Problem> corpus = scenario_memory_corpus();
    std::vector<Problem> bench = scenario_benchmark();
    BuildResult built = build_memory(corpus, bench, world.gateway, exec, config);
};

std::string results_without_times(const EvalReport& r) {
    return r.results_jsonl(); // deterministic_clock zeroes every wall time
}

} // namespace

TEST_CASE("the scenario benchmark: memory 70.00%, baseline 40.00%") {
    Scenario s;
    const auto dcm = evaluate(s.bench, &s.built.store, s.world.gateway, s.exec, s.config);
    const auto base = evaluate(s.bench, nullptr, s.world.gateway, s.exec, s.config);
    CHECK(dcm.total == 10);
    CHECK(dcm.solved == 7);
    CHECK(dcm.accuracy_text() == "70.00%");
    CHECK(base.solved == 4);
    CHECK(base.accuracy_text() == "40.00%");
    CHECK(dcm.mode == "dcm");
    CHECK(base.mode == "baseline");
    const std::vector<EvalReport> both{dcm, base};
    const auto table = format_eval_table(both);
    CHECK(table.find("70.00%") != std::string::npos);
    CHECK(table.find("40.00%") != std::string::npos);
}

TEST_CASE("format_percent rounds to two decimals") {
    CHECK(format_percent(7, 10) == "70.00%");
    CHECK(format_percent(1, 3) == "33.33%");
    CHECK(format_percent(2, 3) == "66.67%");
    CHECK(format_percent(0, 5) == "0.00%");
    CHECK(format_percent(5, 5) == "100.00%");
    CHECK(format_percent(1, 8) == "12.50%");
    CHECK(format_percent(0, 0) == "n/a");
}

TEST_CASE("evaluation refuses empty benchmarks and missing ground truth") {
    Scenario s;
    CHECK_THROWS_AS(evaluate({}, nullptr, s.world.gateway, s.exec, s.config), InputError);
    auto bench = s.bench;
    bench[3].ground_truth.reset();
    CHECK_THROWS_AS(evaluate(bench, nullptr, s.world.gateway, s.exec, s.config), InputError);
    const MemoryStore empty(s.config.embedding_dim);
    CHECK_THROWS_AS(evaluate(s.bench, &empty, s.world.gateway, s.exec, s.config), NoMemoryError);
}

TEST_CASE("construction refuses corpora overlapping the evaluation set") {
    const Config config = mock_config();
    MockWorld world(config);
    StubExecutor exec;
    auto corpus = synthetic_corpus(4, 1, "x");
    auto eval = synthetic_corpus(3, 2, "x");
    try {
        build_memory(corpus, eval, world.gateway, exec, config);
        FAIL("overlap accepted");
    } catch (const InputError& e) {
        const std::string what = e.what();
        CHECK(what.find("x-001") != std::string::npos);
        CHECK(what.find("x-003") != std::string::npos);
    }
    CHECK_THROWS_AS(build_memory({}, {}, world.gateway, exec, config), InputError);
    CHECK_NOTHROW(check_disjoint(synthetic_corpus(3, 1, "a"), synthetic_corpus(3, 1, "b")));
}

TEST_CASE("ablation yields one row per budget and the full budget matches plain evaluation") {
    Scenario s;
    const std::vector<double> ratios{1.0, 0.25, 0.5, 0.75};
    const auto table = ablate(s.built.store, ratios, 11, s.bench, s.world.gateway, s.exec, s.config, true);
    REQUIRE(table.rows.size() == 4);
    CHECK(table.rows[0].ratio == 0.25);
    CHECK(table.rows[3].ratio == 1.0);
    for (const auto& row : table.rows) {
        CHECK(row.nodes == static_cast<std::size_t>(std::ceil(row.ratio * static_cast<double>(s.built.store.nodes().size()))));
        CHECK(row.modeling_clusters >= 1);
        CHECK(row.report.total == 10);
    }
    const auto full = evaluate(s.bench, &s.built.store, s.world.gateway, s.exec, s.config);
    CHECK(results_without_times(table.rows[3].report) == results_without_times(full));
    REQUIRE(table.baseline);
    CHECK(table.baseline->solved == 4);
    const auto text = format_ablation_table(table);
    CHECK(text.find("25%") != std::string::npos);
    CHECK(text.find("baseline") != std::string::npos);
    CHECK(text.find("monotone: ") != std::string::npos);
    CHECK_THROWS_AS(ablate(s.built.store, {}, 1, s.bench, s.world.gateway, s.exec, s.config, false), InputError);
}

TEST_CASE("transfer runs a stored memory under another chat model") {
    Config config = mock_config();
    StubExecutor exec;
    MockWorld builder_world(config, SelectorRule::overlap, "mock-A");
    const auto bench = scenario_benchmark();
    const auto built = build_memory(scenario_memory_corpus(), bench, builder_world.gateway, exec, config);
    CHECK(built.store.provenance.chat_model == "mock-A");

    MockWorld other(config, SelectorRule::overlap, "mock-B");
    const auto row = transfer(built.store, bench, other.gateway, exec, config);
    CHECK(row.memory_model == "mock-A");
    CHECK(row.inference_model == "mock-B");
    CHECK(row.warnings.empty());
    CHECK(row.report.total == 10);
    CHECK(format_transfer_row(row).find("mock-A") != std::string::npos);

    const auto self = transfer(built.store, bench, builder_world.gateway, exec, config);
    const auto plain = evaluate(bench, &built.store, builder_world.gateway, exec, config);
    CHECK(results_without_times(self.report) == results_without_times(plain));

    auto anonymous = built.store;
    anonymous.provenance = {};
    const auto unknown = transfer(anonymous, bench, other.gateway, exec, config);
    CHECK(unknown.memory_model == "unknown");
    REQUIRE(unknown.warnings.size() == 1);
    CHECK(format_transfer_row(unknown).find("warning: ") != std::string::npos);
}

TEST_CASE("inspect reports per-space cluster counts and edges") {
    Scenario s;
    const auto text = inspect_store(s.built.store);
    CHECK(text.find("modeling_clusters  " + std::to_string(s.built.store.clusters(Space::modeling).size())) != std::string::npos);
    CHECK(text.find("coding_clusters    " + std::to_string(s.built.store.clusters(Space::coding).size())) != std::string::npos);
    CHECK(text.find("total weight " + std::to_string(s.built.store.nodes().size())) != std::string::npos);
    CHECK(text.find("chat=mock-chat") != std::string::npos);
}

TEST_CASE("build report for a fixed synthetic corpus matches the golden file") {
    const Config config = mock_config();
    MockWorld world(config);
    StubExecutor exec;
    const auto corpus = synthetic_corpus(20, 1);
    const auto report = format_build_report(build_memory(corpus, {}, world.gateway, exec, config));
    const auto golden = fixture("synthetic20_build_report.golden");
    if (std::getenv("DCM_UPDATE_GOLDEN")) write_file(golden, report);
    CHECK(report == read_file(golden));
}

TEST_CASE("build and solve are byte-identical across runs") {
    std::vector<std::string> outputs;
    for (int run = 0; run < 2; ++run) {
        Scenario s;
        ScratchDir dir("bench-det");
        save_store(s.built.store, dir.path());
        std::string text;
        for (const char* f : {"manifest.json", "nodes.jsonl", "clusters.jsonl", "graph.jsonl"}) text += read_file(dir / f);
        evaluate(s.bench, &s.built.store, s.world.gateway, s.exec, s.config,
                 [&text](const SolveTrace& t) { text += trace_to_jsonl(t, true); });
        outputs.push_back(text);
    }
    CHECK(outputs[0] == outputs[1]);
}

TEST_CASE("parallel evaluation gives the same results as sequential") {
    Scenario s;
    const auto one = evaluate(s.bench, &s.built.store, s.world.gateway, s.exec, s.config);
    Config parallel = s.config;
    parallel.workers = 4;
    std::vector<std::string> traces;
    const auto four = evaluate(s.bench, &s.built.store, s.world.gateway, s.exec, parallel,
                               [&traces](const SolveTrace& t) { traces.push_back(t.problem_id); });
    CHECK(one.results_jsonl() == four.results_jsonl());
    CHECK(std::is_sorted(traces.begin(), traces.end()));
    CHECK(traces.size() == 10);
}

TEST_CASE("the bag-mix case: integer optimum 70, relaxation 60.8") {
    const auto c = bag_mix_case();
    const auto opt = cover_optimum(c);
    CHECK(opt.objective == 70.0);
    CHECK(opt.requirements == NamedValues{{"bags_a", 2.0}, {"bags_b", 1.0}});
    CHECK(std::fabs(cover_relaxation(c).objective - 60.8) <= kLpTol);
    const GroundTruth truth{70.0, {{"bags_a", 2.0}, {"bags_b", 1.0}}};
    CHECK_FALSE(judge(cover_relaxation(c), truth, kJudgeRelTol, kJudgeAbsFloor));
}

TEST_CASE("synthetic optima agree with independent solvers") {
    std::mt19937_64 rng(123);
    auto uniform = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int trial = 0; trial < 200; ++trial) {
        INFO("trial " << trial);
        // Knapsack: capacity DP.
        KnapsackInstance k;
        const int n = uniform(1, 8);
        for (int i = 0; i < n; ++i) {
            k.weights.push_back(uniform(1, 15));
            k.values.push_back(uniform(1, 30));
        }
        k.capacity = uniform(1, 40);
        std::vector<int> dp(static_cast<std::size_t>(k.capacity) + 1, 0);
        for (int i = 0; i < n; ++i) {
            for (int w = k.capacity; w >= k.weights[static_cast<std::size_t>(i)]; --w) {
                dp[static_cast<std::size_t>(w)] = std::max(dp[static_cast<std::size_t>(w)],
                    dp[static_cast<std::size_t>(w - k.weights[static_cast<std::size_t>(i)])] + k.values[static_cast<std::size_t>(i)]);
            }
        }
        const auto ko = knapsack_optimum(k);
        CHECK(ko.objective == dp.back());
        CHECK(ko.requirements[0].second <= k.capacity);
        CHECK(knapsack_fractional(k).objective >= ko.objective - kLpTol);

        // Cover: for each count of A bags, the fewest B bags.
        CoverInstance c{uniform(1, 60), uniform(1, 12), uniform(1, 40), uniform(1, 20), uniform(1, 60)};
        int best = std::numeric_limits<int>::max();
        for (int a = 0; a * c.supply_a < c.requirement + c.supply_a; ++a) {
            const int rest = std::max(0, c.requirement - a * c.supply_a);
            const int b = (rest + c.supply_b - 1) / c.supply_b;
            best = std::min(best, a * c.cost_a + b * c.cost_b);
        }
        const auto co = cover_optimum(c);
        CHECK(co.objective == best);
        CHECK(co.requirements[0].second * c.supply_a + co.requirements[1].second * c.supply_b >= c.requirement);
        CHECK(cover_relaxation(c).objective <= co.objective + kLpTol);

        // Assignment: bitmask DP.
        const int size = uniform(1, 6);
        AssignmentInstance a;
        a.cost.assign(static_cast<std::size_t>(size), std::vector<int>(static_cast<std::size_t>(size)));
        for (auto& row : a.cost) {
            for (auto& x : row) x = uniform(0, 50);
        }
        std::vector<int> memo(1u << size, std::numeric_limits<int>::max());
        memo[0] = 0;
        for (std::uint32_t mask = 0; mask < (1u << size); ++mask) {
            if (memo[mask] == std::numeric_limits<int>::max()) continue;
            const auto worker = static_cast<std::size_t>(std::popcount(mask));
            if (worker == static_cast<std::size_t>(size)) continue;
            for (int task = 0; task < size; ++task) {
                if (mask & (1u << task)) continue;
                auto& next = memo[mask | (1u << task)];
                next = std::min(next, memo[mask] + a.cost[worker][static_cast<std::size_t>(task)]);
            }
        }
        CHECK(assignment_optimum(a).objective == memo.back());
        CHECK(assignment_row_minima(a).objective <= memo.back());

        // Shortest path: Bellman-Ford over a graph with a guaranteed 0 -> n-1 route.
        ShortestPathInstance sp;
        sp.nodes = uniform(2, 7);
        for (int v = 0; v + 1 < sp.nodes; ++v) sp.arcs.emplace_back(v, v + 1, uniform(1, 20));
        for (int e = uniform(0, 8); e > 0; --e) {
            const int from = uniform(0, sp.nodes - 1), to = uniform(0, sp.nodes - 1);
            if (from != to) sp.arcs.emplace_back(from, to, uniform(1, 20));
        }
        std::vector<long> dist(static_cast<std::size_t>(sp.nodes), std::numeric_limits<long>::max() / 4);
        dist[0] = 0;
        for (int round = 0; round < sp.nodes; ++round) {
            for (const auto& [from, to, len] : sp.arcs) {
                dist[static_cast<std::size_t>(to)] = std::min(dist[static_cast<std::size_t>(to)], dist[static_cast<std::size_t>(from)] + len);
            }
        }
        CHECK(shortest_path_optimum(sp).objective == static_cast<double>(dist.back()));

        // Production LP: optimum is feasible and no grid point beats it.
        ProductionInstance p{uniform(1, 20), uniform(1, 20), uniform(1, 6), uniform(1, 6), uniform(5, 60),
                             uniform(1, 6), uniform(1, 6), uniform(5, 60)};
        const auto po = production_optimum(p);
        const double x = po.requirements[0].second, y = po.requirements[1].second;
        CHECK(x >= -kLpTol);
        CHECK(y >= -kLpTol);
        CHECK(p.use1_a * x + p.use1_b * y <= p.limit1 + kLpTol);
        CHECK(p.use2_a * x + p.use2_b * y <= p.limit2 + kLpTol);
        CHECK(std::fabs(p.profit_a * x + p.profit_b * y - po.objective) <= kLpTol);
        const double x_max = std::min(double(p.limit1) / p.use1_a, double(p.limit2) / p.use2_a);
        const double y_max = std::min(double(p.limit1) / p.use1_b, double(p.limit2) / p.use2_b);
        for (int i = 0; i <= 40; ++i) {
            for (int j = 0; j <= 40; ++j) {
                const double gx = x_max * i / 40.0, gy = y_max * j / 40.0;
                if (p.use1_a * gx + p.use1_b * gy > p.limit1 || p.use2_a * gx + p.use2_b * gy > p.limit2) continue;
                REQUIRE(p.profit_a * gx + p.profit_b * gy <= po.objective + kLpTol);
            }
        }
    }
}

TEST_CASE("generated problems carry their optimum as ground truth") {
    for (auto family : {Family::knapsack, Family::cover, Family::assignment, Family::shortest_path, Family::production}) {
        const auto sp = make_problem(family, "g", 42, {});
        REQUIRE(sp.problem.ground_truth);
        CHECK(sp.script.answer.objective == sp.problem.ground_truth->objective);
        CHECK(sp.problem.text.find("[mock]") != std::string::npos);
        CHECK(family_from_string(to_string(family)) == family);
    }
    CHECK(synthetic_corpus(7, 3).size() == 7);
    CHECK(problems_to_jsonl(synthetic_corpus(7, 3)) == problems_to_jsonl(synthetic_corpus(7, 3)));
}

TEST_CASE("problem JSONL round-trips and rejects bad input") {
    const auto problems = synthetic_corpus(6, 9);
    const auto text = problems_to_jsonl(problems);
    const auto parsed = parse_problems(text);
    REQUIRE(parsed.size() == problems.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].id == problems[i].id);
        CHECK(parsed[i].text == problems[i].text);
        REQUIRE(parsed[i].ground_truth);
        CHECK(parsed[i].ground_truth->objective == problems[i].ground_truth->objective);
        CHECK(parsed[i].ground_truth->requirements == problems[i].ground_truth->requirements);
    }
    CHECK(problems_to_jsonl(parsed) == text);

    const auto open = parse_problems(R"({"id": "a", "text": "t", "objective": null})" "\n\n");
    REQUIRE(open.size() == 1);
    CHECK_FALSE(open[0].ground_truth);

    CHECK_THROWS_AS(parse_problems("{not json}\n"), InputError);
    CHECK_THROWS_AS(parse_problems(R"({"id": "a", "text": ""})"), InputError);
    CHECK_THROWS_AS(parse_problems(R"({"text": "t"})"), InputError);
    CHECK_THROWS_AS(parse_problems("{\"id\": \"a\", \"text\": \"t\"}\n{\"id\": \"a\", \"text\": \"u\"}\n"), InputError);
    CHECK_THROWS_AS(parse_problems(R"({"id": "a", "text": "t", "objective": "seventy"})"), InputError);
    CHECK_THROWS_AS(read_problems("/nonexistent/problems.jsonl"), InputError);

    ScratchDir dir("corpus");
    write_problems(dir / "p.jsonl", problems);
    CHECK(problems_to_jsonl(read_problems(dir / "p.jsonl")) == text);
}
