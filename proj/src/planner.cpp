#include "dcm/planner.hpp"

#include "dcm/error.hpp"
#include "dcm/parse.hpp"
#include "dcm/similarity.hpp"

#include <algorithm>
#include <set>

namespace dcm {

std::vector<NodeId> instance_retrieve(const Embedding& query, const MemoryStore& store, int k) {
    const auto& nodes = store.nodes();
    std::vector<NodeId> out;
    for (auto i : top_k(nodes.size(), static_cast<std::size_t>(std::max(k, 0)),
                        [&](std::size_t i) { return similarity(query, nodes[i].e_m); })) {
        out.push_back(nodes[i].id);
    }
    return out;
}

std::vector<ClusterId> cluster_retrieve(const Embedding& query, const MemoryStore& store, int k) {
    const auto& clusters = store.clusters(Space::modeling);
    std::vector<ClusterId> out;
    for (auto i : top_k(clusters.size(), static_cast<std::size_t>(std::max(k, 0)),
                        [&](std::size_t i) { return similarity(query, clusters[i].centroid); })) {
        out.push_back(clusters[i].id);
    }
    return out;
}

std::vector<ClusterId> merge_candidates(const MemoryStore& store, std::span<const NodeId> instances,
                                        std::span<const ClusterId> clusters) {
    std::vector<ClusterId> out;
    auto add = [&out](ClusterId id) {
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    };
    for (auto n : instances) add(store.node(n).modeling_cluster);
    for (auto c : clusters) add(c);
    return out;
}

std::vector<SolutionPath> expand_paths(std::span<const ClusterId> candidates, const BipartiteGraph& graph, int k) {
    std::vector<SolutionPath> out;
    for (auto m : candidates) {
        const auto neighbors = graph.neighbors(m);
        const auto take = std::min(neighbors.size(), static_cast<std::size_t>(std::max(k, 0)));
        for (std::size_t i = 0; i < take; ++i) {
            SolutionPath path;
            path.modeling = m;
            path.coding = neighbors[i].first;
            path.weight = neighbors[i].second;
            const bool seen = std::any_of(out.begin(), out.end(), [&](const SolutionPath& p) { return p.same_pair(path); });
            if (!seen) out.push_back(path);
        }
    }
    return out;
}

std::vector<SolutionPath> global_fallback_paths(const BipartiteGraph& graph, std::size_t count) {
    std::vector<SolutionPath> all;
    for (const auto& [key, w] : graph.edges()) {
        SolutionPath path;
        path.modeling = key.first;
        path.coding = key.second;
        path.weight = w;
        path.origin = PathOrigin::global_fallback;
        all.push_back(path);
    }
    // edges() iterates in (modeling, coding) order, so a stable sort on weight keeps the id tie-break.
    std::stable_sort(all.begin(), all.end(), [](const SolutionPath& a, const SolutionPath& b) { return a.weight > b.weight; });
    if (all.size() > count) all.resize(count);
    return all;
}

std::vector<SolutionPath> fallback_order(std::vector<SolutionPath> pool) {
    std::sort(pool.begin(), pool.end(), [](const SolutionPath& a, const SolutionPath& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        if (a.prior != b.prior) return a.prior > b.prior;
        if (a.modeling != b.modeling) return a.modeling < b.modeling;
        return a.coding < b.coding;
    });
    return pool;
}

void score_priors(std::vector<SolutionPath>& pool, const Embedding& query, const MemoryStore& store) {
    for (auto& path : pool) path.prior = similarity(query, store.cluster(Space::modeling, path.modeling).centroid);
}

namespace {

std::string headline(const MemoryStore& store, Space space, ClusterId id) {
    const auto& c = store.cluster(space, id);
    if (!c.knowledge.approach.empty()) return c.knowledge.approach.front();
    const auto& n = store.node(c.members.front());
    for (const auto& line : split_lines(space == Space::modeling ? n.modeling_text : n.coding_text)) {
        auto t = trim(line);
        if (!t.empty()) return t;
    }
    return "(no summary)";
}

} // namespace

std::string describe_path(const SolutionPath& path, std::size_t index, const MemoryStore& store) {
    return "[" + std::to_string(index) + "] " + format_cluster(Space::modeling, path.modeling) + " -> " +
           format_cluster(Space::coding, path.coding) + " | modeling: " + headline(store, Space::modeling, path.modeling) +
           " | coding: " + headline(store, Space::coding, path.coding);
}

RankResult rank_paths(std::span<const SolutionPath> pool, const std::string& problem_text, int m,
                      const MemoryStore& store, const Gateway& gateway, CallLog* log) {
    RankResult result;
    const std::size_t size = std::min(pool.size(), static_cast<std::size_t>(std::max(m, 0)));
    if (pool.empty() || size == 0) return result;
    const auto fallback = fallback_order({pool.begin(), pool.end()});
    if (pool.size() == 1) {
        result.queue = {pool.front()};
        return result;
    }

    std::string lines;
    for (std::size_t i = 0; i < pool.size(); ++i) lines += describe_path(pool[i], i, store) + "\n";
    Slots slots{{"problem", problem_text}, {"paths", lines}, {"count", std::to_string(size)}};
    result.selector_called = true;
    std::optional<std::vector<std::size_t>> ranked;
    try {
        ranked = gateway.chat_parsed(
            LlmRole::selector, slots, [n = pool.size()](std::string_view raw) { return parse_rank(raw, n); }, log);
    } catch (const ProviderError&) {
        ranked.reset();
    }
    if (!ranked) {
        result.selector_fallback = true;
        result.queue.assign(fallback.begin(), fallback.begin() + static_cast<std::ptrdiff_t>(size));
        return result;
    }
    for (auto index : *ranked) {
        if (result.queue.size() == size) break;
        auto path = pool[index];
        path.selector_rank = static_cast<int>(result.queue.size());
        result.queue.push_back(path);
    }
    for (const auto& path : fallback) {
        if (result.queue.size() == size) break;
        const bool taken = std::any_of(result.queue.begin(), result.queue.end(),
                                       [&](const SolutionPath& q) { return q.same_pair(path); });
        if (!taken) result.queue.push_back(path);
    }
    return result;
}

Plan plan_paths(const Problem& problem, const Embedding& query, const MemoryStore& store, const Gateway& gateway,
                const Config& config, CallLog* log) {
    if (store.nodes().empty()) throw NoMemoryError("memory store is empty; run build-memory first");
    Plan plan;
    plan.instances = instance_retrieve(query, store, config.top_k);
    plan.clusters = cluster_retrieve(query, store, config.top_k);
    plan.candidates = merge_candidates(store, plan.instances, plan.clusters);
    plan.pool = expand_paths(plan.candidates, store.graph(), config.top_k);
    if (plan.pool.empty()) {
        plan.global_fallback = true;
        plan.pool = global_fallback_paths(store.graph(), static_cast<std::size_t>(config.planning_candidates));
    }
    score_priors(plan.pool, query, store);
    auto ranked = rank_paths(plan.pool, problem.text, config.planning_candidates, store, gateway, log);
    plan.queue = std::move(ranked.queue);
    plan.selector_called = ranked.selector_called;
    plan.selector_fallback = ranked.selector_fallback;
    return plan;
}

} // namespace dcm
