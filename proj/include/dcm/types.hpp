#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dcm {

// Strong ids. A ClusterId indexes into its own space (modeling or coding).
enum class NodeId : std::uint32_t {};
enum class ClusterId : std::uint32_t {};

constexpr std::uint32_t to_index(NodeId id) { return static_cast<std::uint32_t>(id); }
constexpr std::uint32_t to_index(ClusterId id) { return static_cast<std::uint32_t>(id); }

enum class Space { modeling, coding };

std::string_view to_string(Space space);
std::string format_cluster(Space space, ClusterId id); // "M3", "C0"
std::string format_node(NodeId id);                    // "n12"

using NamedValues = std::vector<std::pair<std::string, double>>;

struct GroundTruth {
    double objective = 0.0;
    NamedValues requirements;
};

struct Problem {
    std::string id;
    std::string text;
    std::optional<GroundTruth> ground_truth;
    std::string source;
};

struct ExtractedAnswer {
    double objective = 0.0;
    NamedValues requirements;

    bool operator==(const ExtractedAnswer&) const = default;
};

enum class ExecStatus { success, runtime_error, timeout, non_numeric_output };

std::string_view to_string(ExecStatus status);

struct ExecutionResult {
    ExecStatus status = ExecStatus::runtime_error;
    std::string stdout_text;
    std::string stderr_text;
    std::optional<ExtractedAnswer> extracted; // present iff status == success
    double wall_time = 0.0;

    // Error payload handed to the fixer: stderr, or a marker for timeouts and
    // missing answers.
    std::string error_payload() const;
};

struct AttemptRecord {
    std::string problem_id;
    int round_index = 1;
    std::string modeling_text;
    std::string coding_text;
    ExecutionResult execution;
    bool correct = false;
    bool provider_failure = false; // the chat provider failed; nothing was executed
};

enum class SampleType { A, B, C };

std::string_view to_string(SampleType type);
SampleType sample_type_from_string(std::string_view text);

// Approach / checklist / pitfall tiers. Used both for a node's instance
// knowledge and for a cluster's synthesized knowledge.
struct Knowledge {
    std::vector<std::string> approach;
    std::vector<std::string> checklist;
    std::vector<std::string> pitfall;

    bool empty() const { return approach.empty() && checklist.empty() && pitfall.empty(); }
    bool operator==(const Knowledge&) const = default;
};

// Order-preserving union; later duplicates are dropped.
Knowledge merge_union(const Knowledge& base, const Knowledge& extra);

// Unit-normalized vector.
class Embedding {
public:
    Embedding() = default;

    // Normalizes `values`. Throws InputError on an empty or zero vector.
    static Embedding unit(std::vector<double> values);
    // Takes values as stored, without renormalizing (used when loading).
    static Embedding raw(std::vector<double> values);

    std::size_t dim() const { return values_.size(); }
    std::span<const double> values() const { return values_; }

    bool operator==(const Embedding&) const = default;

private:
    explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}

    std::vector<double> values_;
};

struct ExperienceNode {
    NodeId id{};
    std::string problem_id;
    SampleType sample_type = SampleType::A;
    std::string modeling_text;
    std::string coding_text;
    Embedding e_m;
    Embedding e_c;
    Knowledge phi;
    ClusterId modeling_cluster{};
    ClusterId coding_cluster{};
};

struct Cluster {
    ClusterId id{};
    Space space = Space::modeling;
    Embedding centroid;
    std::vector<NodeId> members;
    Knowledge knowledge;
    int knowledge_version = 0;
    std::vector<Knowledge> pending_phis;
};

// Weighted edges between modeling and coding clusters; weight counts how many
// stored nodes map to the pair.
class BipartiteGraph {
public:
    using Key = std::pair<ClusterId, ClusterId>; // (modeling, coding)

    void increment(ClusterId modeling, ClusterId coding, std::uint64_t by = 1);
    std::uint64_t weight(ClusterId modeling, ClusterId coding) const;
    std::uint64_t total_weight() const;
    std::size_t edge_count() const { return edges_.size(); }
    const std::map<Key, std::uint64_t>& edges() const { return edges_; }

    // Coding neighbours of a modeling cluster, heaviest first, ties by lower coding id.
    std::vector<std::pair<ClusterId, std::uint64_t>> neighbors(ClusterId modeling) const;

    bool operator==(const BipartiteGraph&) const = default;

private:
    std::map<Key, std::uint64_t> edges_;
};

enum class PathOrigin { expanded, global_fallback };

struct SolutionPath {
    ClusterId modeling{};
    ClusterId coding{};
    std::uint64_t weight = 0;    // w_ij at planning time
    double prior = 0.0;          // modeling-centroid similarity to the query
    int selector_rank = -1;      // position assigned by the selector, -1 for fallback order
    PathOrigin origin = PathOrigin::expanded;

    bool same_pair(const SolutionPath& other) const {
        return modeling == other.modeling && coding == other.coding;
    }
};

} // namespace dcm
