#include "catch_amalgamated.hpp"

#include "dcm/error.hpp"
#include "dcm/store.hpp"

#include "support.hpp"

#include <json.hpp>

#include <cmath>
#include <random>

using namespace dcm;
using namespace dcm::test;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kStoreFiles{"manifest.json", "nodes.jsonl", "clusters.jsonl", "graph.jsonl"};

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& f : kStoreFiles) out[f] = read_file(dir / f);
    return out;
}

// Applies `edit` to the JSON record on line `line` of `file`.
void tamper(const fs::path& dir, const std::string& file, std::size_t line,
            const std::function<void(nlohmann::ordered_json&)>& edit) {
    std::istringstream in(read_file(dir / file));
    std::string text, out;
    for (std::size_t i = 0; std::getline(in, text); ++i) {
        if (i == line) {
            auto j = nlohmann::ordered_json::parse(text);
            edit(j);
            text = j.dump();
        }
        out += text + "\n";
    }
    write_file(dir / file, out);
}

MemoryStore small_store(std::uint64_t seed, std::size_t nodes = 12) {
    std::mt19937_64 rng(seed);
    return random_store(rng, {.nodes = nodes, .dim = 6});
}

} // namespace

TEST_CASE("save, load, save is byte-identical") {
    ScratchDir a("store-a"), b("store-b");
    const auto store = small_store(1);
    store.check_invariants();
    save_store(store, a.path());
    const auto loaded = load_store(a.path());
    CHECK(loaded == store);
    save_store(loaded, b.path());
    CHECK(snapshot(a.path()) == snapshot(b.path()));
}

TEST_CASE("saving twice over the same directory leaves no temporary files") {
    ScratchDir dir("store-twice");
    const auto store = small_store(2);
    save_store(store, dir.path());
    const auto first = snapshot(dir.path());
    save_store(store, dir.path());
    CHECK(snapshot(dir.path()) == first);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir.path())) {
        ++files;
        CHECK(entry.path().extension() != ".tmp");
    }
    CHECK(files == kStoreFiles.size());
}

TEST_CASE("manifest counts match the store") {
    ScratchDir dir("store-manifest");
    const auto store = small_store(3, 3);
    const auto m = save_store(store, dir.path());
    CHECK(m.node_count == 3);
    CHECK(m.modeling_cluster_count == store.clusters(Space::modeling).size());
    CHECK(m.coding_cluster_count == store.clusters(Space::coding).size());
    CHECK(m.edge_count == store.graph().edge_count());
    CHECK(m.format_version == kStoreFormatVersion);
    const auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    CHECK(j["counts"]["nodes"] == 3);
    CHECK(j["dim"] == 6);
    CHECK(j["provenance"]["chat_model"] == store.provenance.chat_model);
}

TEST_CASE("load surfaces the provenance of the constructing provider") {
    ScratchDir dir("store-provenance");
    auto store = small_store(4);
    store.provenance = {"provider-x", "embed-x", 99};
    save_store(store, dir.path());
    CHECK(load_store(dir.path()).provenance == Provenance{"provider-x", "embed-x", 99});
}

TEST_CASE("round trip holds for random stores") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        ScratchDir a("rt-a"), b("rt-b");
        const auto store = random_store(rng, {.nodes = 1 + rng() % 40, .dim = 1 + rng() % 12});
        save_store(store, a.path());
        const auto loaded = load_store(a.path());
        REQUIRE(loaded == store);
        save_store(loaded, b.path());
        REQUIRE(snapshot(a.path()) == snapshot(b.path()));
    }
}

TEST_CASE("load rejects missing and empty stores") {
    ScratchDir dir("store-missing");
    CHECK_THROWS_AS(load_store(dir.path()), StoreError);
    CHECK_THROWS_AS(load_store(dir / "does-not-exist"), StoreError);
    save_store(small_store(5), dir.path());
    fs::remove(dir / "manifest.json");
    CHECK_THROWS_AS(load_store(dir.path()), StoreError);
}

TEST_CASE("load rejects a missing data file") {
    ScratchDir dir("store-nofile");
    save_store(small_store(6), dir.path());
    fs::remove(dir / "graph.jsonl");
    CHECK_THROWS_AS(load_store(dir.path()), StoreError);
}

TEST_CASE("load rejects another format version") {
    ScratchDir dir("store-version");
    save_store(small_store(7), dir.path());
    tamper(dir.path(), "manifest.json", 0, [](auto& j) { j["format_version"] = kStoreFormatVersion + 1; });
    CHECK_THROWS_AS(load_store(dir.path()), FormatVersionError);
}

TEST_CASE("corruption fixtures are rejected with the violated invariant") {
    struct Case {
        const char* name;
        const char* file;
        std::size_t line;
        std::function<void(nlohmann::ordered_json&)> edit;
        const char* invariant;
    };
    const std::vector<Case> cases{
        {"edge weight inflated", "graph.jsonl", 0, [](auto& j) { j["weight"] = j["weight"].template get<int>() + 1; },
         "sum of edge weights"},
        {"node moved to another cluster", "nodes.jsonl", 0, [](auto& j) { j["modeling_cluster"] = "M1"; }, ""},
        {"embedding not unit length", "nodes.jsonl", 1, [](auto& j) { j["e_m"][0] = 5.0; }, "unit-normalized"},
        {"embedding dim wrong", "nodes.jsonl", 1, [](auto& j) { j["e_c"].push_back(0.0); }, "dim"},
        {"centroid drifted", "clusters.jsonl", 0, [](auto& j) { j["centroid"][0] = -j["centroid"][0].template get<double>(); },
         "centroid"},
        {"type A node with a pitfall", "nodes.jsonl", 2,
         [](auto& j) {
             j["sample_type"] = "A";
             j["phi"]["pitfall"] = {"x"};
         },
         "Type A"},
        {"empty knowledge item", "clusters.jsonl", 0, [](auto& j) { j["knowledge"]["approach"] = {""}; }, "non-empty"},
        {"manifest count off", "manifest.json", 0, [](auto& j) { j["counts"]["nodes"] = 999; }, "manifest counts"},
        {"edge to a missing cluster", "graph.jsonl", 0, [](auto& j) { j["coding"] = "C999"; }, ""},
    };
    for (const auto& c : cases) {
        INFO(c.name);
        ScratchDir dir("corrupt");
        save_store(small_store(8, 15), dir.path());
        tamper(dir.path(), c.file, c.line, c.edit);
        try {
            load_store(dir.path());
            FAIL("corrupt store was accepted");
        } catch (const CorruptStore& e) {
            CHECK(std::string(e.what()).find(c.invariant) != std::string::npos);
        }
    }
}

TEST_CASE("truncated or garbled lines are rejected") {
    ScratchDir dir("store-garbled");
    save_store(small_store(9), dir.path());
    auto text = read_file(dir / "nodes.jsonl");
    write_file(dir / "nodes.jsonl", text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_store(dir.path()), CorruptStore);
}

TEST_CASE("check_invariants catches an uncounted edge") {
    auto store = small_store(10);
    store.mutable_graph().increment(ClusterId{0}, ClusterId{0});
    CHECK_THROWS_AS(store.check_invariants(), CorruptStore);
}

TEST_CASE("add_node enforces the store dim") {
    MemoryStore store(4);
    ExperienceNode n;
    n.e_m = Embedding::unit({1, 0, 0});
    n.e_c = Embedding::unit({1, 0, 0, 0});
    CHECK_THROWS_AS(store.add_node(n), DimensionMismatch);
}

TEST_CASE("centroid is the normalized mean, falling back to the first member on cancellation") {
    MemoryStore store(2);
    auto add = [&store](std::vector<double> v) {
        ExperienceNode n;
        n.e_m = Embedding::unit(v);
        n.e_c = Embedding::unit(v);
        return store.add_node(n);
    };
    const auto a = add({1, 0});
    const auto b = add({0, 1});
    const auto c = add({-1, 0});
    const auto m = store.create_cluster(Space::modeling, a);
    store.join_cluster(Space::modeling, m, b);
    const auto centroid = store.cluster(Space::modeling, m).centroid.values();
    CHECK(std::fabs(centroid[0] - std::sqrt(0.5)) <= kCentroidTol);
    CHECK(std::fabs(centroid[1] - std::sqrt(0.5)) <= kCentroidTol);

    const auto x = store.create_cluster(Space::coding, a);
    store.join_cluster(Space::coding, x, c);
    CHECK(store.cluster(Space::coding, x).centroid == store.node(a).e_c);
}

TEST_CASE("subsample examples") {
    const auto store = small_store(11, 10);
    const auto full = subsample(store, 1.0, 3);
    CHECK(full == store);

    const auto half = subsample(store, 0.5, 3);
    CHECK(half.nodes().size() == 5);
    CHECK(half.graph().total_weight() == 5);
    CHECK_NOTHROW(half.check_invariants());

    CHECK_THROWS_AS(subsample(store, 0.0, 1), InputError);
    CHECK_THROWS_AS(subsample(store, 1.5, 1), InputError);
    CHECK_THROWS_AS(subsample(store, -0.1, 1), InputError);
}

TEST_CASE("subsample keeps invariants, sizes and knowledge for all ratios and seeds") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ratio_dist(0.001, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto store = random_store(rng, {.nodes = 1 + rng() % 60, .dim = 5});
        const double ratio = ratio_dist(rng);
        const auto seed = rng();
        const auto reduced = subsample(store, ratio, seed);
        INFO("trial " << trial << " ratio " << ratio);
        REQUIRE_NOTHROW(reduced.check_invariants());
        const auto expected = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(store.nodes().size()) - 1e-9));
        CHECK(reduced.nodes().size() == expected);
        CHECK(reduced.graph().total_weight() == expected);
        CHECK(reduced.graph().edges() == recount_edges(reduced));
        CHECK(subsample(store, ratio, seed) == reduced);
        CHECK(reduced.provenance == store.provenance);

        // Every surviving node is an original node, in original order.
        std::size_t cursor = 0;
        for (const auto& n : reduced.nodes()) {
            while (cursor < store.nodes().size() && store.nodes()[cursor].problem_id != n.problem_id) ++cursor;
            REQUIRE(cursor < store.nodes().size());
            CHECK(store.nodes()[cursor].e_m == n.e_m);
            CHECK(store.nodes()[cursor].phi == n.phi);
        }
        // Surviving clusters keep the knowledge of the cluster they came from.
        for (const auto& c : reduced.clusters(Space::modeling)) {
            const auto& first = reduced.node(c.members.front());
            const auto original = std::find_if(store.nodes().begin(), store.nodes().end(),
                                               [&](const auto& n) { return n.problem_id == first.problem_id; });
            const auto& source = store.cluster(Space::modeling, original->modeling_cluster);
            CHECK(c.knowledge == source.knowledge);
            CHECK(c.knowledge_version == source.knowledge_version);
        }
    }
}
