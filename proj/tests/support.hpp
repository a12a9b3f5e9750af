#pragma once

// Helpers shared by the unit tests and the acceptance binary: mock wiring,
// random stores, scripted executors and brute-force oracles.

#include "dcm/config.hpp"
#include "dcm/llm.hpp"
#include "dcm/mock.hpp"
#include "dcm/sandbox.hpp"
#include "dcm/store.hpp"
#include "dcm/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace dcm::test {

// Every floating-point comparison in the suite uses one of these.
inline constexpr double kUnitNormTol = 1e-9;
inline constexpr double kCentroidTol = 1e-9;
inline constexpr double kSimilarityTol = 1e-12;
inline constexpr double kJudgeRelTol = 1e-4;
inline constexpr double kJudgeAbsFloor = 1e-6;
inline constexpr double kLpTol = 1e-6;

inline Config mock_config(std::size_t dim = 64) {
    Config c;
    c.embedding_dim = dim;
    c.deterministic_clock = true;
    return c;
}

struct MockWorld {
    std::shared_ptr<MockChatBackend> chat;
    std::shared_ptr<MockEmbedder> embedder;
    Gateway gateway;

    explicit MockWorld(const Config& config, SelectorRule rule = SelectorRule::overlap,
                       std::string chat_model = "mock-chat")
        : chat(std::make_shared<MockChatBackend>(std::move(chat_model), rule)),
          embedder(std::make_shared<MockEmbedder>(config.embedding_dim, config.provider.mock_seed)),
          gateway(chat, embedder, PromptTemplates::defaults(), config.embedding_dim) {}
};

// Returns queued results in order; once drained, repeats `fallback`.
class ScriptedExecutor : public Executor {
public:
    explicit ScriptedExecutor(ExecutionResult fallback = ok(0.0)) : fallback_(std::move(fallback)) {}

    void push(ExecutionResult r) { queue_.push_back(std::move(r)); }
    ExecutionResult run(std::string_view script) override {
        scripts.emplace_back(script);
        if (queue_.empty()) return fallback_;
        auto r = std::move(queue_.front());
        queue_.pop_front();
        return r;
    }
    std::vector<std::string> scripts;

    static ExecutionResult ok(double objective) {
        ExecutionResult r;
        r.status = ExecStatus::success;
        r.extracted = ExtractedAnswer{objective, {}};
        r.stdout_text = format_answer_block(*r.extracted);
        return r;
    }
    static ExecutionResult error(std::string message) {
        ExecutionResult r;
        r.status = ExecStatus::runtime_error;
        r.stderr_text = std::move(message);
        return r;
    }
    static ExecutionResult timed_out() {
        ExecutionResult r;
        r.status = ExecStatus::timeout;
        r.stderr_text = std::string(kTimeoutMarker);
        return r;
    }

private:
    ExecutionResult fallback_;
    std::deque<ExecutionResult> queue_;
};

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    return v;
}

inline Embedding random_unit(std::mt19937_64& rng, std::size_t dim) {
    return Embedding::unit(random_vector(rng, dim));
}

inline std::string random_word(std::mt19937_64& rng) {
    static const char* words[] = {"integrality", "capacity", "edge direction", "one-to-one", "binary",
                                  "cost", "flow", "assignment", "cover", "knapsack", "bound", "slack"};
    return words[rng() % std::size(words)];
}

inline Knowledge random_knowledge(std::mt19937_64& rng, SampleType type) {
    Knowledge k;
    const auto n = [&rng] { return 1 + rng() % 3; };
    if (type != SampleType::C) {
        for (std::size_t i = 0, e = n(); i < e; ++i) k.approach.push_back("Approach " + random_word(rng) + " " + std::to_string(rng() % 100));
        for (std::size_t i = 0, e = n(); i < e; ++i) k.checklist.push_back("Check " + random_word(rng));
    }
    if (type != SampleType::A) {
        for (std::size_t i = 0, e = n(); i < e; ++i) k.pitfall.push_back("Avoid \"" + random_word(rng) + "\"\twith tab");
    }
    return k;
}

struct RandomStoreOptions {
    std::size_t nodes = 20;
    std::size_t dim = 8;
    int update_threshold = 5;
    double duplicate_rate = 0.15; // fraction of nodes reusing an earlier embedding (forces ties)
    int new_cluster_one_in = 3;
};

// A valid store built through the builder interface without any LLM.
inline MemoryStore random_store(std::mt19937_64& rng, const RandomStoreOptions& o) {
    MemoryStore store(o.dim, o.update_threshold);
    store.provenance = {"mock-" + std::to_string(rng() % 10), "mock-embed", rng() % 1000};
    store.config_snapshot = {{"top_k", "3"}, {"seed", std::to_string(rng() % 1000)}};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < o.nodes; ++i) {
        ExperienceNode n;
        n.problem_id = "p-" + std::to_string(i);
        n.sample_type = static_cast<SampleType>(rng() % 3);
        n.modeling_text = "Paradigm: " + random_word(rng) + "\nline two \"quoted\"";
        n.coding_text = "import pulp\nprint(" + std::to_string(i) + ")";
        if (i > 0 && unit(rng) < o.duplicate_rate) {
            const auto& other = store.node(NodeId{static_cast<std::uint32_t>(rng() % i)});
            n.e_m = other.e_m;
            n.e_c = other.e_c;
        } else {
            n.e_m = random_unit(rng, o.dim);
            n.e_c = random_unit(rng, o.dim);
        }
        n.phi = random_knowledge(rng, n.sample_type);
        const auto id = store.add_node(std::move(n));
        ClusterId assigned[2]{};
        for (auto space : {Space::modeling, Space::coding}) {
            const auto& list = store.clusters(space);
            ClusterId c;
            if (list.empty() || rng() % static_cast<std::uint64_t>(o.new_cluster_one_in) == 0) {
                c = store.create_cluster(space, id);
            } else {
                c = ClusterId{static_cast<std::uint32_t>(rng() % list.size())};
                store.join_cluster(space, c, id);
            }
            assigned[space == Space::modeling ? 0 : 1] = c;
            if (space == Space::modeling) store.mutable_node(id).modeling_cluster = c;
            else store.mutable_node(id).coding_cluster = c;
        }
        store.mutable_graph().increment(assigned[0], assigned[1]);
    }
    for (auto space : {Space::modeling, Space::coding}) {
        for (std::size_t i = 0; i < store.clusters(space).size(); ++i) {
            auto& c = store.mutable_cluster(space, ClusterId{static_cast<std::uint32_t>(i)});
            c.knowledge_version = static_cast<int>(rng() % 4);
            if (c.knowledge_version > 0) c.knowledge = random_knowledge(rng, SampleType::B);
            const auto pending = rng() % static_cast<std::uint64_t>(o.update_threshold);
            for (std::uint64_t p = 0; p < pending; ++p) c.pending_phis.push_back(random_knowledge(rng, SampleType::A));
        }
    }
    return store;
}

struct HandNode {
    HandNode(int m, int c, std::vector<double> em, std::vector<double> ec = {})
        : modeling(m), coding(c), e_m(std::move(em)), e_c(std::move(ec)) {}

    int modeling; // cluster index; equal to the current count creates the cluster
    int coding;
    std::vector<double> e_m;
    std::vector<double> e_c; // defaults to e_m
    std::string modeling_text = "Paradigm: hand";
    std::string coding_text = "import pulp";
};

// Store with exactly the given memberships, in order.
inline MemoryStore hand_store(std::size_t dim, const std::vector<HandNode>& specs) {
    MemoryStore store(dim);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        ExperienceNode n;
        n.problem_id = "h-" + std::to_string(i);
        n.modeling_text = s.modeling_text;
        n.coding_text = s.coding_text;
        n.e_m = Embedding::unit(s.e_m);
        n.e_c = Embedding::unit(s.e_c.empty() ? s.e_m : s.e_c);
        const auto id = store.add_node(std::move(n));
        ClusterId assigned[2]{};
        for (auto space : {Space::modeling, Space::coding}) {
            const auto index = static_cast<std::size_t>(space == Space::modeling ? s.modeling : s.coding);
            ClusterId c;
            if (index == store.clusters(space).size()) c = store.create_cluster(space, id);
            else store.join_cluster(space, c = ClusterId{static_cast<std::uint32_t>(index)}, id);
            assigned[space == Space::modeling ? 0 : 1] = c;
        }
        store.mutable_node(id).modeling_cluster = assigned[0];
        store.mutable_node(id).coding_cluster = assigned[1];
        store.mutable_graph().increment(assigned[0], assigned[1]);
    }
    return store;
}

// Cosine written out independently of the library, in the same operation order
// so equal inputs give bit-equal scores.
inline double oracle_cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// Full stable sort of every index by descending score: ties keep index order.
inline std::vector<std::size_t> oracle_top_k(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(k, order.size()));
    return order;
}

// Edge weights recounted from node memberships.
inline std::map<std::pair<ClusterId, ClusterId>, std::uint64_t> recount_edges(const MemoryStore& store) {
    std::map<std::pair<ClusterId, ClusterId>, std::uint64_t> counts;
    for (const auto& n : store.nodes()) ++counts[{n.modeling_cluster, n.coding_cluster}];
    return counts;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("dcm-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(DCM_FIXTURE_DIR) / name;
}

} // namespace dcm::test
