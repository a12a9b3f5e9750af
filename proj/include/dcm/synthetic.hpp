#pragma once

// Seeded micro-problems with exact optima from exhaustive search, each with a
// "naive" answer that a formulation falling into the family's trap would give.
// Problem texts carry a [mock] tag so the offline chat model can act on them.

#include "dcm/mock.hpp"
#include "dcm/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace dcm {

enum class Family { knapsack, cover, assignment, shortest_path, production };

std::string_view to_string(Family family);
Family family_from_string(std::string_view text);

struct SyntheticOptions {
    bool trap = true;          // ignored for production (no trap)
    int recover = 0;           // attempt from which an unaided retry succeeds; 0 = never
    std::string crash = "none";
};

struct SyntheticProblem {
    Problem problem;
    MockScript script;
};

class SplitMix {
public:
    explicit SplitMix(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    int uniform(int lo, int hi); // inclusive
private:
    std::uint64_t state_;
};

// 0/1 knapsack: maximize value within capacity. Requirement total_weight.
struct KnapsackInstance {
    std::vector<int> weights;
    std::vector<int> values;
    int capacity = 0;
};
ExtractedAnswer knapsack_optimum(const KnapsackInstance& k);   // subset enumeration
ExtractedAnswer knapsack_fractional(const KnapsackInstance& k); // greedy relaxation

// Two bag types covering a requirement at minimum cost. Requirements bags_a, bags_b.
struct CoverInstance {
    int requirement = 0;
    int supply_a = 0, cost_a = 0;
    int supply_b = 0, cost_b = 0;
};
ExtractedAnswer cover_optimum(const CoverInstance& c);   // grid enumeration
ExtractedAnswer cover_relaxation(const CoverInstance& c); // R * min(cost/supply)
// Requirement 24, bag A 5 units at 16, bag B 15 units at 38: integer cost 70, relaxed 60.8.
CoverInstance bag_mix_case();

// Square cost matrix, one task per worker. No requirements.
struct AssignmentInstance {
    std::vector<std::vector<int>> cost;
};
ExtractedAnswer assignment_optimum(const AssignmentInstance& a); // permutation enumeration
ExtractedAnswer assignment_row_minima(const AssignmentInstance& a);

// Directed weighted graph, source 0, target n-1. Requirement hops.
struct ShortestPathInstance {
    int nodes = 0;
    std::vector<std::tuple<int, int, int>> arcs; // from, to, length
};
ExtractedAnswer shortest_path_optimum(const ShortestPathInstance& s, bool directed = true); // simple-path enumeration

// Two-product LP, maximize profit under two resource limits. Requirements product_a, product_b.
struct ProductionInstance {
    int profit_a = 0, profit_b = 0;
    int use1_a = 0, use1_b = 0, limit1 = 0;
    int use2_a = 0, use2_b = 0, limit2 = 0;
};
ExtractedAnswer production_optimum(const ProductionInstance& p); // vertex enumeration

SyntheticProblem make_problem(Family family, std::string id, std::uint64_t seed, const SyntheticOptions& options);
SyntheticProblem make_bag_mix_problem(std::string id, const SyntheticOptions& options);

// Mixed corpus cycling through the trap families with varied recovery rounds,
// so construction sees Type A, B and C trajectories.
std::vector<Problem> synthetic_corpus(std::size_t count, std::uint64_t seed, const std::string& id_prefix = "syn");

// Fixed construction corpus and 10-problem benchmark: four plain problems, three
// integrality-trap problems the memory covers, three edge-direction problems it
// does not.
std::vector<Problem> scenario_memory_corpus();
std::vector<Problem> scenario_benchmark();

} // namespace dcm
