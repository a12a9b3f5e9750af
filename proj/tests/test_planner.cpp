#include "catch_amalgamated.hpp"

#include "dcm/error.hpp"
#include "dcm/planner.hpp"
#include "dcm/similarity.hpp"

#include "support.hpp"

#include <random>
#include <set>

using namespace dcm;
using namespace dcm::test;

namespace {

ClusterId M(std::uint32_t i) { return ClusterId{i}; }
ClusterId C(std::uint32_t i) { return ClusterId{i}; }

std::vector<NodeId> oracle_instances(const Embedding& q, const MemoryStore& store, std::size_t k) {
    std::vector<double> scores;
    for (const auto& n : store.nodes()) scores.push_back(oracle_cosine(q.values(), n.e_m.values()));
    std::vector<NodeId> out;
    for (auto i : oracle_top_k(scores, k)) out.push_back(NodeId{static_cast<std::uint32_t>(i)});
    return out;
}

std::vector<ClusterId> oracle_clusters(const Embedding& q, const MemoryStore& store, std::size_t k) {
    std::vector<double> scores;
    for (const auto& c : store.clusters(Space::modeling)) scores.push_back(oracle_cosine(q.values(), c.centroid.values()));
    std::vector<ClusterId> out;
    for (auto i : oracle_top_k(scores, k)) out.push_back(ClusterId{static_cast<std::uint32_t>(i)});
    return out;
}

using Pair = std::pair<ClusterId, ClusterId>;

// Per candidate: all incident edges, stable-sorted by weight over coding-id order, first k kept.
std::vector<Pair> oracle_expand(const std::vector<ClusterId>& candidates, const BipartiteGraph& g, std::size_t k) {
    std::vector<Pair> out;
    for (auto m : candidates) {
        std::vector<std::pair<ClusterId, std::uint64_t>> incident;
        for (const auto& [key, w] : g.edges()) {
            if (key.first == m) incident.emplace_back(key.second, w);
        }
        std::stable_sort(incident.begin(), incident.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        for (std::size_t i = 0; i < std::min(k, incident.size()); ++i) {
            Pair p{m, incident[i].first};
            if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
        }
    }
    return out;
}

std::vector<Pair> pairs(const std::vector<SolutionPath>& paths) {
    std::vector<Pair> out;
    for (const auto& p : paths) out.emplace_back(p.modeling, p.coding);
    return out;
}

std::vector<SolutionPath> make_pool(std::size_t n) {
    std::vector<SolutionPath> pool;
    for (std::uint32_t i = 0; i < n; ++i) {
        SolutionPath p;
        p.modeling = M(i % 3);
        p.coding = C(i);  // every pair exists in wide_store()
        p.weight = 1 + i % 4;
        p.prior = 0.1 * i;
        pool.push_back(p);
    }
    return pool;
}

// Nine nodes: M(i % 3) -> C(i).
MemoryStore wide_store() {
    std::vector<HandNode> specs;
    for (int i = 0; i < 9; ++i) specs.emplace_back(i % 3, i, std::vector<double>{1.0 + i, 1, 0});
    return hand_store(3, specs);
}

// M0 -> C0 once; M1 -> C1 x5, C2 x2, C3 x1.
MemoryStore fan_store() {
    std::vector<HandNode> specs{{0, 0, {1, 0, 0}}, {1, 1, {0, 1, 0}}, {1, 2, {0, 1, 0}}, {1, 3, {0, 1, 0}}};
    for (int i = 0; i < 4; ++i) specs.push_back({1, 1, {0, 1, 0}});
    specs.push_back({1, 2, {0, 1, 0}});
    return hand_store(3, specs);
}

} // namespace

TEST_CASE("retrieval from a single-node memory returns that node and its cluster") {
    const auto store = hand_store(3, {{0, 0, {1, 2, 3}}});
    const auto q = Embedding::unit({-1, 0, 0});
    CHECK(instance_retrieve(q, store, 3) == std::vector<NodeId>{NodeId{0}});
    CHECK(cluster_retrieve(q, store, 3) == std::vector<ClusterId>{M(0)});
}

TEST_CASE("a node queried with its own embedding ranks first") {
    std::mt19937_64 rng(4);
    const auto store = random_store(rng, {.nodes = 30, .dim = 8, .duplicate_rate = 0.0});
    for (const auto& n : store.nodes()) CHECK(instance_retrieve(n.e_m, store, 3).front() == n.id);
}

TEST_CASE("K=3 over ten nodes in six clusters matches exhaustive search") {
    std::mt19937_64 rng(10);
    std::vector<HandNode> specs;
    const int clusters[] = {0, 1, 2, 0, 3, 4, 1, 5, 2, 5};
    int created = 0;
    for (int c : clusters) {
        const int index = c < created ? c : created++;
        specs.push_back({index, 0, random_vector(rng, 5)});
    }
    const auto store = hand_store(5, specs);
    REQUIRE(store.clusters(Space::modeling).size() == 6);
    for (int trial = 0; trial < 50; ++trial) {
        const auto q = random_unit(rng, 5);
        CHECK(instance_retrieve(q, store, 3) == oracle_instances(q, store, 3));
        CHECK(cluster_retrieve(q, store, 3) == oracle_clusters(q, store, 3));
    }
}

TEST_CASE("merge keeps the first occurrence, instance clusters first") {
    const auto store = hand_store(2, {{0, 0, {1, 0}}, {1, 0, {0, 1}}, {2, 0, {1, 1}}});
    const std::vector<NodeId> instances{NodeId{2}, NodeId{0}, NodeId{2}};
    const std::vector<ClusterId> clusters{M(0), M(1), M(2)};
    CHECK(merge_candidates(store, instances, clusters) == std::vector<ClusterId>{M(2), M(0), M(1)});
    CHECK(merge_candidates(store, {}, {}).empty());
}

TEST_CASE("expansion takes the K heaviest coding neighbours") {
    const auto store = fan_store();
    const std::vector<ClusterId> m1{M(1)};
    const auto paths = expand_paths(m1, store.graph(), 2);
    REQUIRE(paths.size() == 2);
    CHECK(pairs(paths) == std::vector<Pair>{{M(1), C(1)}, {M(1), C(2)}});
    CHECK(paths[0].weight == 5);
    CHECK(paths[1].weight == 2);

    BipartiteGraph lonely;
    lonely.increment(M(0), C(0));
    const std::vector<ClusterId> isolated{M(7)};
    CHECK(expand_paths(isolated, lonely, 3).empty());

    const std::vector<ClusterId> both{M(0), M(1), M(0)};
    const auto all = expand_paths(both, store.graph(), 3);
    CHECK(all.size() == 4);
    CHECK(all.size() <= 3 * both.size());
}

TEST_CASE("ranking a single path skips the selector") {
    const Config config = mock_config(3);
    MockWorld world(config);
    const auto store = fan_store();
    const auto pool = expand_paths(std::vector<ClusterId>{M(0)}, store.graph(), 3);
    REQUIRE(pool.size() == 1);
    const auto r = rank_paths(pool, "problem", 3, store, world.gateway);
    CHECK(r.queue.size() == 1);
    CHECK_FALSE(r.selector_called);
    CHECK(world.chat->calls(LlmRole::selector) == 0);
}

TEST_CASE("the selector's order is the queue order") {
    const Config config = mock_config(3);
    MockWorld world(config, SelectorRule::reverse);
    const auto store = fan_store();
    const auto pool = expand_paths(std::vector<ClusterId>{M(0), M(1)}, store.graph(), 3);
    REQUIRE(pool.size() == 4);
    const auto r = rank_paths(pool, "problem", 3, store, world.gateway);
    CHECK(pairs(r.queue) == std::vector<Pair>{pairs(pool)[3], pairs(pool)[2], pairs(pool)[1]});
    for (int i = 0; i < 3; ++i) CHECK(r.queue[static_cast<std::size_t>(i)].selector_rank == i);
    CHECK_FALSE(r.selector_fallback);
}

TEST_CASE("queue length is min(M, |P|)") {
    const Config config = mock_config(3);
    MockWorld world(config, SelectorRule::identity);
    const auto store = wide_store();
    const auto pool = make_pool(9);
    CHECK(rank_paths(pool, "p", 3, store, world.gateway).queue.size() == 3);
    CHECK(rank_paths(pool, "p", 20, store, world.gateway).queue.size() == 9);
    CHECK(rank_paths(pool, "p", 0, store, world.gateway).queue.empty());
    CHECK(rank_paths({}, "p", 3, store, world.gateway).queue.empty());
}

TEST_CASE("malformed selector output falls back to weight, prior, id order") {
    const Config config = mock_config(3);
    MockWorld world(config);
    const auto store = wide_store();
    const auto pool = make_pool(9);
    world.chat->script(LlmRole::selector, "I like the second one best");
    world.chat->script(LlmRole::selector, "RANK: 42");
    const auto r = rank_paths(pool, "p", 3, store, world.gateway);
    CHECK(r.selector_fallback);
    const auto expected = pairs(fallback_order(pool));
    CHECK(pairs(r.queue) == std::vector<Pair>(expected.begin(), expected.begin() + 3));
    CHECK(world.chat->calls(LlmRole::selector) == 2);
}

TEST_CASE("a provider failure during ranking also uses the fallback order") {
    const Config config = mock_config(3);
    MockWorld world(config);
    const auto store = wide_store();
    const auto pool = make_pool(4);
    world.chat->script(LlmRole::selector, "");
    const auto r = rank_paths(pool, "p", 2, store, world.gateway);
    CHECK(r.selector_fallback);
    const auto expected = pairs(fallback_order(pool));
    CHECK(pairs(r.queue) == std::vector<Pair>(expected.begin(), expected.begin() + 2));
}

TEST_CASE("indices the selector omits are filled from the fallback order") {
    const Config config = mock_config(3);
    MockWorld world(config);
    const auto store = wide_store();
    const auto pool = make_pool(6);
    world.chat->script(LlmRole::selector, "RANK: 5");
    const auto r = rank_paths(pool, "p", 3, store, world.gateway);
    REQUIRE(r.queue.size() == 3);
    CHECK(r.queue[0].same_pair(pool[5]));
    CHECK(r.queue[0].selector_rank == 0);
    std::vector<SolutionPath> rest;
    for (const auto& p : fallback_order(pool)) {
        if (!p.same_pair(pool[5])) rest.push_back(p);
    }
    CHECK(r.queue[1].same_pair(rest[0]));
    CHECK(r.queue[2].same_pair(rest[1]));
    CHECK(r.queue[1].selector_rank == -1);
}

TEST_CASE("fallback order is total: weight, then prior, then ids") {
    std::vector<SolutionPath> pool(4);
    pool[0] = {M(2), C(0), 3, 0.5};
    pool[1] = {M(1), C(1), 3, 0.9};
    pool[2] = {M(0), C(4), 3, 0.5};
    pool[3] = {M(0), C(2), 7, 0.0};
    CHECK(pairs(fallback_order(pool)) == std::vector<Pair>{{M(0), C(2)}, {M(1), C(1)}, {M(0), C(4)}, {M(2), C(0)}});
}

TEST_CASE("planner stages match brute-force oracles on random memories") {
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 200; ++trial) {
        const auto dim = 2 + rng() % 6;
        const auto store = random_store(rng, {.nodes = 1 + rng() % 120, .dim = dim, .duplicate_rate = 0.3,
                                              .new_cluster_one_in = 1 + static_cast<int>(rng() % 5)});
        const auto k = 1 + static_cast<int>(rng() % 5);
        const auto m = 1 + static_cast<int>(rng() % 6);
        const auto q = rng() % 4 == 0 ? store.nodes()[rng() % store.nodes().size()].e_m : random_unit(rng, dim);
        INFO("trial " << trial << " k " << k << " m " << m);

        const auto instances = instance_retrieve(q, store, k);
        REQUIRE(instances == oracle_instances(q, store, static_cast<std::size_t>(k)));
        const auto clusters = cluster_retrieve(q, store, k);
        REQUIRE(clusters == oracle_clusters(q, store, static_cast<std::size_t>(k)));

        const auto candidates = merge_candidates(store, instances, clusters);
        std::set<ClusterId> want;
        for (auto n : instances) want.insert(store.node(n).modeling_cluster);
        want.insert(clusters.begin(), clusters.end());
        REQUIRE(std::set<ClusterId>(candidates.begin(), candidates.end()) == want);
        REQUIRE(candidates.size() == want.size());

        const auto pool = expand_paths(candidates, store.graph(), k);
        REQUIRE(pairs(pool) == oracle_expand(candidates, store.graph(), static_cast<std::size_t>(k)));
        REQUIRE(pool.size() <= static_cast<std::size_t>(k) * candidates.size());
        for (const auto& p : pool) {
            REQUIRE(store.graph().weight(p.modeling, p.coding) == p.weight);
            REQUIRE(p.weight > 0);
            // Anything left out of this candidate's expansion is no heavier than what was kept.
            const auto neighbors = store.graph().neighbors(p.modeling);
            if (neighbors.size() > static_cast<std::size_t>(k)) {
                REQUIRE(neighbors[static_cast<std::size_t>(k)].second <= p.weight);
            }
        }

        Config config = mock_config(dim);
        config.top_k = k;
        config.planning_candidates = m;
        const auto rule = static_cast<SelectorRule>(rng() % 3);
        MockWorld world(config, rule);
        auto scored = pool;
        score_priors(scored, q, store);
        const auto ranked = rank_paths(scored, "choose wisely", m, store, world.gateway);
        REQUIRE(ranked.queue.size() == std::min(static_cast<std::size_t>(m), pool.size()));
        std::set<Pair> seen;
        const auto pool_pairs = pairs(pool);
        for (const auto& path : ranked.queue) {
            REQUIRE(std::find(pool_pairs.begin(), pool_pairs.end(), Pair{path.modeling, path.coding}) != pool_pairs.end());
            REQUIRE(seen.insert({path.modeling, path.coding}).second);
        }

        const auto plan = plan_paths(Problem{"q", "choose wisely", {}, ""}, q, store, world.gateway, config);
        REQUIRE(pairs(plan.pool) == pairs(pool));
        REQUIRE(pairs(plan.queue) == pairs(ranked.queue));
        REQUIRE_FALSE(plan.global_fallback);
    }
}

TEST_CASE("global fallback takes the heaviest edges of the whole graph") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto store = random_store(rng, {.nodes = 1 + rng() % 60, .dim = 3});
        const auto count = 1 + rng() % 6;
        std::vector<std::pair<Pair, std::uint64_t>> all(store.graph().edges().begin(), store.graph().edges().end());
        std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        all.resize(std::min<std::size_t>(count, all.size()));
        const auto paths = global_fallback_paths(store.graph(), count);
        REQUIRE(paths.size() == all.size());
        for (std::size_t i = 0; i < paths.size(); ++i) {
            CHECK(Pair{paths[i].modeling, paths[i].coding} == all[i].first);
            CHECK(paths[i].weight == all[i].second);
            CHECK(paths[i].origin == PathOrigin::global_fallback);
        }
    }
}

TEST_CASE("planning over an empty memory is refused") {
    const Config config = mock_config(3);
    MockWorld world(config);
    const MemoryStore store(3);
    CHECK_THROWS_AS(plan_paths(Problem{"q", "text", {}, ""}, Embedding::unit({1, 0, 0}), store, world.gateway, config),
                    NoMemoryError);
}

TEST_CASE("describe_path prefers synthesized approach text") {
    auto store = fan_store();
    SolutionPath p{M(1), C(2), 2, 0.0};
    CHECK(describe_path(p, 4, store) == "[4] M1 -> C2 | modeling: Paradigm: hand | coding: import pulp");
    store.mutable_cluster(Space::modeling, M(1)).knowledge.approach = {"Binary variables per item"};
    CHECK(describe_path(p, 0, store) == "[0] M1 -> C2 | modeling: Binary variables per item | coding: import pulp");
}
