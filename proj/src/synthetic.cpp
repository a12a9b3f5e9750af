#include "dcm/synthetic.hpp"

#include "dcm/error.hpp"
#include "dcm/parse.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace dcm {

std::string_view to_string(Family family) {
    switch (family) {
    case Family::knapsack: return "knapsack";
    case Family::cover: return "cover";
    case Family::assignment: return "assignment";
    case Family::shortest_path: return "shortest_path";
    case Family::production: return "production";
    }
    return "unknown";
}

Family family_from_string(std::string_view text) {
    for (auto f : {Family::knapsack, Family::cover, Family::assignment, Family::shortest_path, Family::production}) {
        if (to_string(f) == text) return f;
    }
    throw InputError("unknown problem family '" + std::string(text) + "'");
}

std::uint64_t SplitMix::next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

int SplitMix::uniform(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(next() % span);
}

// ---------------------------------------------------------------------------
// Exhaustive optima

ExtractedAnswer knapsack_optimum(const KnapsackInstance& k) {
    const auto n = k.weights.size();
    int best_value = -1, best_weight = 0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        int w = 0, v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                w += k.weights[i];
                v += k.values[i];
            }
        }
        if (w > k.capacity) continue;
        if (v > best_value || (v == best_value && w < best_weight)) {
            best_value = v;
            best_weight = w;
        }
    }
    return {static_cast<double>(best_value), {{"total_weight", static_cast<double>(best_weight)}}};
}

ExtractedAnswer knapsack_fractional(const KnapsackInstance& k) {
    std::vector<std::size_t> order(k.weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return k.values[a] * k.weights[b] > k.values[b] * k.weights[a];
    });
    double room = k.capacity, value = 0.0, used = 0.0;
    for (auto i : order) {
        if (room <= 0) break;
        const double take = std::min<double>(1.0, room / k.weights[i]);
        value += take * k.values[i];
        used += take * k.weights[i];
        room -= take * k.weights[i];
    }
    return {value, {{"total_weight", used}}};
}

namespace {

struct CoverSearch {
    int cost = std::numeric_limits<int>::max();
    int x = 0, y = 0;
    int ties = 0;
};

CoverSearch search_cover(const CoverInstance& c) {
    CoverSearch s;
    const int max_x = (c.requirement + c.supply_a - 1) / c.supply_a;
    const int max_y = (c.requirement + c.supply_b - 1) / c.supply_b;
    for (int x = 0; x <= max_x; ++x) {
        for (int y = 0; y <= max_y; ++y) {
            if (c.supply_a * x + c.supply_b * y < c.requirement) continue;
            const int cost = c.cost_a * x + c.cost_b * y;
            if (cost < s.cost) {
                s = {cost, x, y, 1};
            } else if (cost == s.cost) {
                ++s.ties;
            }
        }
    }
    return s;
}

} // namespace

ExtractedAnswer cover_optimum(const CoverInstance& c) {
    const auto s = search_cover(c);
    return {static_cast<double>(s.cost), {{"bags_a", static_cast<double>(s.x)}, {"bags_b", static_cast<double>(s.y)}}};
}

ExtractedAnswer cover_relaxation(const CoverInstance& c) {
    // Cheaper cost per unit wins the whole requirement.
    if (c.cost_a * c.supply_b <= c.cost_b * c.supply_a) {
        return {static_cast<double>(c.requirement * c.cost_a) / c.supply_a,
                {{"bags_a", static_cast<double>(c.requirement) / c.supply_a}, {"bags_b", 0.0}}};
    }
    return {static_cast<double>(c.requirement * c.cost_b) / c.supply_b,
            {{"bags_a", 0.0}, {"bags_b", static_cast<double>(c.requirement) / c.supply_b}}};
}

CoverInstance bag_mix_case() {
    return {24, 5, 16, 15, 38};
}

ExtractedAnswer assignment_optimum(const AssignmentInstance& a) {
    std::vector<int> perm(a.cost.size());
    std::iota(perm.begin(), perm.end(), 0);
    int best = std::numeric_limits<int>::max();
    do {
        int total = 0;
        for (std::size_t i = 0; i < perm.size(); ++i) total += a.cost[i][static_cast<std::size_t>(perm[i])];
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {static_cast<double>(best), {}};
}

ExtractedAnswer assignment_row_minima(const AssignmentInstance& a) {
    int total = 0;
    for (const auto& row : a.cost) total += *std::min_element(row.begin(), row.end());
    return {static_cast<double>(total), {}};
}

ExtractedAnswer shortest_path_optimum(const ShortestPathInstance& s, bool directed) {
    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(s.nodes));
    for (const auto& [from, to, len] : s.arcs) {
        adj[static_cast<std::size_t>(from)].emplace_back(to, len);
        if (!directed) adj[static_cast<std::size_t>(to)].emplace_back(from, len);
    }
    const int target = s.nodes - 1;
    int best = std::numeric_limits<int>::max(), best_hops = 0;
    std::vector<bool> visited(static_cast<std::size_t>(s.nodes), false);
    std::function<void(int, int, int)> dfs = [&](int at, int length, int hops) {
        if (at == target) {
            if (length < best || (length == best && hops < best_hops)) {
                best = length;
                best_hops = hops;
            }
            return;
        }
        visited[static_cast<std::size_t>(at)] = true;
        for (const auto& [next, len] : adj[static_cast<std::size_t>(at)]) {
            if (!visited[static_cast<std::size_t>(next)]) dfs(next, length + len, hops + 1);
        }
        visited[static_cast<std::size_t>(at)] = false;
    };
    dfs(0, 0, 0);
    if (best == std::numeric_limits<int>::max()) throw InputError("target unreachable");
    return {static_cast<double>(best), {{"hops", static_cast<double>(best_hops)}}};
}

namespace {

struct Vertex {
    double x, y;
};

std::vector<Vertex> production_vertices(const ProductionInstance& p) {
    std::vector<Vertex> out = {{0.0, 0.0}};
    auto add = [&out](double x, double y) { out.push_back({x, y}); };
    add(static_cast<double>(p.limit1) / p.use1_a, 0.0);
    add(0.0, static_cast<double>(p.limit1) / p.use1_b);
    add(static_cast<double>(p.limit2) / p.use2_a, 0.0);
    add(0.0, static_cast<double>(p.limit2) / p.use2_b);
    const double det = static_cast<double>(p.use1_a) * p.use2_b - static_cast<double>(p.use1_b) * p.use2_a;
    if (det != 0.0) {
        add((static_cast<double>(p.limit1) * p.use2_b - static_cast<double>(p.use1_b) * p.limit2) / det,
            (static_cast<double>(p.use1_a) * p.limit2 - static_cast<double>(p.limit1) * p.use2_a) / det);
    }
    std::vector<Vertex> feasible;
    for (const auto& v : out) {
        const double eps = 1e-9;
        if (v.x < -eps || v.y < -eps) continue;
        if (p.use1_a * v.x + p.use1_b * v.y > p.limit1 + eps) continue;
        if (p.use2_a * v.x + p.use2_b * v.y > p.limit2 + eps) continue;
        feasible.push_back(v);
    }
    return feasible;
}

} // namespace

ExtractedAnswer production_optimum(const ProductionInstance& p) {
    double best = -1.0;
    Vertex arg{0.0, 0.0};
    for (const auto& v : production_vertices(p)) {
        const double value = p.profit_a * v.x + p.profit_b * v.y;
        if (value > best) {
            best = value;
            arg = v;
        }
    }
    return {best, {{"product_a", arg.x}, {"product_b", arg.y}}};
}

// ---------------------------------------------------------------------------
// Problem texts

namespace {

template <class T>
T pick(SplitMix& rng, const std::vector<T>& options) {
    return options[static_cast<std::size_t>(rng.uniform(0, static_cast<int>(options.size()) - 1))];
}

std::string num(double v) {
    return format_number(v);
}

MockScript base_script(Family family, const SyntheticOptions& options) {
    MockScript s;
    s.family = std::string(to_string(family));
    s.recover = options.recover;
    s.crash = options.crash;
    switch (family) {
    case Family::knapsack: s.paradigm = "ILP"; s.solver = "pulp"; s.trap = "integrality"; break;
    case Family::cover: s.paradigm = "ILP"; s.solver = "ortools"; s.trap = "integrality"; break;
    case Family::assignment: s.paradigm = "ILP"; s.solver = "scipy"; s.trap = "one-to-one"; break;
    case Family::shortest_path: s.paradigm = "network-flow"; s.solver = "networkx"; s.trap = "edge-direction"; break;
    case Family::production: s.paradigm = "LP"; s.solver = "scipy"; s.trap = "none"; break;
    }
    if (!options.trap) s.trap = "none";
    return s;
}

SyntheticProblem finish(std::string id, std::string text, MockScript script, ExtractedAnswer truth, ExtractedAnswer naive) {
    script.answer = truth;
    script.naive = script.trap == "none" ? truth : naive;
    SyntheticProblem out;
    out.problem.id = std::move(id);
    out.problem.text = text + format_mock_tag(script) + "\n";
    out.problem.ground_truth = GroundTruth{truth.objective, truth.requirements};
    out.problem.source = "synthetic/" + script.family;
    out.script = std::move(script);
    return out;
}

SyntheticProblem knapsack_problem(std::string id, SplitMix& rng, const SyntheticOptions& options) {
    auto script = base_script(Family::knapsack, options);
    for (;;) {
        KnapsackInstance k;
        const int n = rng.uniform(5, 7);
        int total = 0;
        for (int i = 0; i < n; ++i) {
            k.weights.push_back(rng.uniform(2, 9));
            k.values.push_back(rng.uniform(3, 20));
            total += k.weights.back();
        }
        k.capacity = total / 2;
        const auto truth = knapsack_optimum(k);
        const auto naive = knapsack_fractional(k);
        if (std::fabs(truth.objective - naive.objective) < 1e-6) continue;
        const auto who = pick(rng, std::vector<std::string>{"A hiker", "A courier", "A drone operator", "A museum curator"});
        std::string text = who + " fills a container with capacity " + num(k.capacity) + " choosing among " +
                           std::to_string(n) + " items.\nItems (weight, value):";
        for (int i = 0; i < n; ++i) {
            text += " " + std::to_string(i + 1) + ": (" + num(k.weights[static_cast<std::size_t>(i)]) + ", " +
                    num(k.values[static_cast<std::size_t>(i)]) + ")";
        }
        text += "\nEach item is taken whole or left behind. Maximize the total value.\n"
                "Report objective (total value) and total_weight (weight taken).\n";
        return finish(std::move(id), text, script, truth, naive);
    }
}

std::string cover_text(const CoverInstance& c, const std::string& who) {
    return who + " must supply at least " + num(c.requirement) + " kg of protein from two feed bag types.\n" +
           "Bag A holds " + num(c.supply_a) + " kg and costs " + num(c.cost_a) + "; bag B holds " + num(c.supply_b) +
           " kg and costs " + num(c.cost_b) + ".\nBags are bought whole. Minimize the total cost.\n"
           "Report objective (total cost), bags_a and bags_b.\n";
}

SyntheticProblem cover_problem(std::string id, SplitMix& rng, const SyntheticOptions& options) {
    auto script = base_script(Family::cover, options);
    for (;;) {
        CoverInstance c{rng.uniform(15, 80), rng.uniform(3, 20), rng.uniform(5, 40), rng.uniform(3, 20), rng.uniform(5, 40)};
        const auto search = search_cover(c);
        if (search.ties != 1) continue;
        const auto truth = cover_optimum(c);
        const auto naive = cover_relaxation(c);
        if (std::fabs(truth.objective - naive.objective) < 1e-6) continue;
        const auto who = pick(rng, std::vector<std::string>{"A farm", "A ranch", "A stable", "A poultry barn"});
        return finish(std::move(id), cover_text(c, who), script, truth, naive);
    }
}

SyntheticProblem assignment_problem(std::string id, SplitMix& rng, const SyntheticOptions& options) {
    auto script = base_script(Family::assignment, options);
    for (;;) {
        const int n = rng.uniform(3, 5);
        AssignmentInstance a;
        a.cost.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n)));
        for (auto& row : a.cost) {
            for (auto& v : row) v = rng.uniform(1, 20);
        }
        const auto truth = assignment_optimum(a);
        const auto naive = assignment_row_minima(a);
        if (script.trap != "none" && std::fabs(truth.objective - naive.objective) < 1e-6) continue;
        const auto who = pick(rng, std::vector<std::string>{"A dispatcher", "A project lead", "A shift planner"});
        std::string text = who + " assigns " + std::to_string(n) + " workers to " + std::to_string(n) +
                           " tasks.\nCost matrix (rows are workers, columns are tasks):";
        for (const auto& row : a.cost) {
            text += " [";
            for (std::size_t j = 0; j < row.size(); ++j) text += (j ? " " : "") + num(row[j]);
            text += "]";
        }
        text += "\nEvery worker takes exactly one task and every task gets exactly one worker. Minimize the total cost.\n"
                "Report objective (total cost).\n";
        return finish(std::move(id), text, script, truth, naive);
    }
}

SyntheticProblem shortest_path_problem(std::string id, SplitMix& rng, const SyntheticOptions& options) {
    auto script = base_script(Family::shortest_path, options);
    for (;;) {
        ShortestPathInstance s;
        s.nodes = rng.uniform(5, 6);
        for (int i = 0; i < s.nodes; ++i) {
            for (int j = 0; j < s.nodes; ++j) {
                if (i != j && rng.uniform(0, 99) < 30) s.arcs.emplace_back(i, j, rng.uniform(1, 15));
            }
        }
        ExtractedAnswer truth, naive;
        try {
            truth = shortest_path_optimum(s, true);
            naive = shortest_path_optimum(s, false);
        } catch (const InputError&) {
            continue;
        }
        if (script.trap != "none" && std::fabs(truth.objective - naive.objective) < 1e-6) continue;
        const auto who = pick(rng, std::vector<std::string>{"A courier", "A snowplow crew", "A delivery van"});
        std::string text = who + " travels from location 0 to location " + std::to_string(s.nodes - 1) + " across " +
                           std::to_string(s.nodes) + " locations.\nOne-way streets (from->to: length):";
        for (const auto& [from, to, len] : s.arcs) {
            text += " " + std::to_string(from) + "->" + std::to_string(to) + ": " + num(len);
        }
        text += "\nStreets may only be used in their listed direction. Minimize the total length.\n"
                "Report objective (total length) and hops (streets used).\n";
        return finish(std::move(id), text, script, truth, naive);
    }
}

SyntheticProblem production_problem(std::string id, SplitMix& rng, const SyntheticOptions& options) {
    auto script = base_script(Family::production, options);
    for (;;) {
        ProductionInstance p{rng.uniform(2, 12), rng.uniform(2, 12), rng.uniform(1, 6), rng.uniform(1, 6),
                             rng.uniform(20, 60), rng.uniform(1, 6), rng.uniform(1, 6), rng.uniform(20, 60)};
        const auto truth = production_optimum(p);
        int optimal_vertices = 0;
        for (const auto& v : production_vertices(p)) {
            const double value = p.profit_a * v.x + p.profit_b * v.y;
            if (std::fabs(value - truth.objective) < 1e-9) ++optimal_vertices;
        }
        if (optimal_vertices != 1) continue;
        const auto who = pick(rng, std::vector<std::string>{"A workshop", "A bakery", "A small refinery", "A print shop"});
        std::string text = who + " makes two products, A and B.\nEach unit of A earns " + num(p.profit_a) +
                           " and each unit of B earns " + num(p.profit_b) + ".\nResource 1: A uses " + num(p.use1_a) +
                           ", B uses " + num(p.use1_b) + ", " + num(p.limit1) + " available. Resource 2: A uses " +
                           num(p.use2_a) + ", B uses " + num(p.use2_b) + ", " + num(p.limit2) +
                           " available.\nQuantities may be fractional. Maximize the total profit.\n"
                           "Report objective (total profit), product_a and product_b.\n";
        return finish(std::move(id), text, script, truth, truth);
    }
}

} // namespace

SyntheticProblem make_problem(Family family, std::string id, std::uint64_t seed, const SyntheticOptions& options) {
    SplitMix rng(seed);
    switch (family) {
    case Family::knapsack: return knapsack_problem(std::move(id), rng, options);
    case Family::cover: return cover_problem(std::move(id), rng, options);
    case Family::assignment: return assignment_problem(std::move(id), rng, options);
    case Family::shortest_path: return shortest_path_problem(std::move(id), rng, options);
    case Family::production: return production_problem(std::move(id), rng, options);
    }
    throw InputError("unknown family");
}

SyntheticProblem make_bag_mix_problem(std::string id, const SyntheticOptions& options) {
    const auto c = bag_mix_case();
    return finish(std::move(id), cover_text(c, "A farm"), base_script(Family::cover, options), cover_optimum(c),
                  cover_relaxation(c));
}

namespace {

std::string numbered(const std::string& prefix, std::size_t i) {
    std::string digits = std::to_string(i);
    while (digits.size() < 3) digits.insert(digits.begin(), '0');
    return prefix + "-" + digits;
}

} // namespace

std::vector<Problem> synthetic_corpus(std::size_t count, std::uint64_t seed, const std::string& id_prefix) {
    static constexpr Family cycle[] = {Family::knapsack, Family::cover, Family::production, Family::assignment,
                                       Family::shortest_path};
    static constexpr int recover_choices[] = {1, 2, 2, 3, 0};
    SplitMix rng(seed);
    std::vector<Problem> out;
    for (std::size_t i = 0; i < count; ++i) {
        const auto family = cycle[i % std::size(cycle)];
        SyntheticOptions options;
        options.recover = recover_choices[rng.next() % std::size(recover_choices)];
        if (family == Family::knapsack && rng.next() % 4 == 0) options.crash = "capacity-index";
        out.push_back(make_problem(family, numbered(id_prefix, i + 1), rng.next(), options).problem);
    }
    return out;
}

std::vector<Problem> scenario_memory_corpus() {
    struct Entry {
        Family family;
        int recover;
        const char* crash;
    };
    // Interleaved so every family's first five nodes arrive early and synthesize.
    static const Entry entries[] = {
        {Family::knapsack, 2, "capacity-index"}, {Family::cover, 2, "none"},       {Family::production, 0, "none"},
        {Family::assignment, 2, "none"},         {Family::knapsack, 1, "none"},    {Family::cover, 2, "none"},
        {Family::production, 0, "none"},         {Family::assignment, 1, "none"},  {Family::knapsack, 2, "capacity-index"},
        {Family::cover, 1, "none"},              {Family::production, 0, "none"},  {Family::assignment, 2, "none"},
        {Family::knapsack, 3, "none"},           {Family::cover, 2, "none"},       {Family::production, 0, "none"},
        {Family::assignment, 3, "none"},         {Family::knapsack, 2, "none"},    {Family::cover, 0, "none"},
        {Family::production, 0, "none"},         {Family::assignment, 2, "none"},  {Family::knapsack, 0, "none"},
        {Family::cover, 2, "none"},              {Family::production, 0, "none"},  {Family::assignment, 1, "none"},
    };
    std::vector<Problem> out;
    std::size_t i = 0;
    for (const auto& e : entries) {
        ++i;
        SyntheticOptions options{true, e.recover, e.crash};
        out.push_back(make_problem(e.family, numbered("mem", i), 5000 + i, options).problem);
    }
    return out;
}

std::vector<Problem> scenario_benchmark() {
    struct Entry {
        Family family;
        bool trap;
        const char* crash;
    };
    static const Entry entries[] = {
        {Family::production, false, "none"},   {Family::production, false, "none"},
        {Family::assignment, false, "none"},   {Family::assignment, false, "none"},
        {Family::knapsack, true, "none"},      {Family::knapsack, true, "capacity-index"},
        {Family::cover, true, "none"},         {Family::shortest_path, true, "none"},
        {Family::shortest_path, true, "none"}, {Family::shortest_path, true, "none"},
    };
    std::vector<Problem> out;
    std::size_t i = 0;
    for (const auto& e : entries) {
        ++i;
        SyntheticOptions options{e.trap, 0, e.crash};
        if (e.family == Family::cover) {
            out.push_back(make_bag_mix_problem(numbered("eval", i), options).problem);
        } else {
            out.push_back(make_problem(e.family, numbered("eval", i), 9000 + i, options).problem);
        }
    }
    return out;
}

} // namespace dcm
