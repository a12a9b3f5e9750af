#include "dcm/types.hpp"

#include "dcm/error.hpp"
#include "dcm/sandbox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace dcm {

std::string_view to_string(Space space) {
    return space == Space::modeling ? "modeling" : "coding";
}

std::string format_cluster(Space space, ClusterId id) {
    return (space == Space::modeling ? "M" : "C") + std::to_string(to_index(id));
}

std::string format_node(NodeId id) {
    return "n" + std::to_string(to_index(id));
}

std::string_view to_string(ExecStatus status) {
    switch (status) {
    case ExecStatus::success: return "success";
    case ExecStatus::runtime_error: return "runtime_error";
    case ExecStatus::timeout: return "timeout";
    case ExecStatus::non_numeric_output: return "non_numeric_output";
    }
    return "runtime_error";
}

std::string ExecutionResult::error_payload() const {
    switch (status) {
    case ExecStatus::success: return {};
    case ExecStatus::timeout: return std::string(kTimeoutMarker);
    case ExecStatus::non_numeric_output:
        return "NON_NUMERIC: no parseable answer block in output\n" + stdout_text;
    case ExecStatus::runtime_error: break;
    }
    return stderr_text.empty() ? std::string("runtime error without stderr output") : stderr_text;
}

std::string_view to_string(SampleType type) {
    switch (type) {
    case SampleType::A: return "A";
    case SampleType::B: return "B";
    case SampleType::C: return "C";
    }
    return "A";
}

SampleType sample_type_from_string(std::string_view text) {
    if (text == "A") return SampleType::A;
    if (text == "B") return SampleType::B;
    if (text == "C") return SampleType::C;
    throw InputError("unknown sample type '" + std::string(text) + "'");
}

namespace {

void append_unique(std::vector<std::string>& into, std::set<std::string>& seen, const std::vector<std::string>& items) {
    for (const auto& item : items) {
        if (seen.insert(item).second) into.push_back(item);
    }
}

} // namespace

Knowledge merge_union(const Knowledge& base, const Knowledge& extra) {
    Knowledge out;
    std::set<std::string> seen_a, seen_c, seen_p;
    append_unique(out.approach, seen_a, base.approach);
    append_unique(out.approach, seen_a, extra.approach);
    append_unique(out.checklist, seen_c, base.checklist);
    append_unique(out.checklist, seen_c, extra.checklist);
    append_unique(out.pitfall, seen_p, base.pitfall);
    append_unique(out.pitfall, seen_p, extra.pitfall);
    return out;
}

Embedding Embedding::unit(std::vector<double> values) {
    if (values.empty()) throw InputError("embedding has no components");
    double norm2 = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw InputError("embedding has a non-finite component");
        norm2 += v * v;
    }
    if (norm2 == 0.0) throw InputError("cannot normalize a zero embedding");
    const double norm = std::sqrt(norm2);
    for (double& v : values) v /= norm;
    return Embedding(std::move(values));
}

Embedding Embedding::raw(std::vector<double> values) {
    return Embedding(std::move(values));
}

void BipartiteGraph::increment(ClusterId modeling, ClusterId coding, std::uint64_t by) {
    edges_[{modeling, coding}] += by;
}

std::uint64_t BipartiteGraph::weight(ClusterId modeling, ClusterId coding) const {
    auto it = edges_.find({modeling, coding});
    return it == edges_.end() ? 0 : it->second;
}

std::uint64_t BipartiteGraph::total_weight() const {
    return std::accumulate(edges_.begin(), edges_.end(), std::uint64_t{0},
                           [](std::uint64_t acc, const auto& kv) { return acc + kv.second; });
}

std::vector<std::pair<ClusterId, std::uint64_t>> BipartiteGraph::neighbors(ClusterId modeling) const {
    std::vector<std::pair<ClusterId, std::uint64_t>> out;
    auto it = edges_.lower_bound({modeling, ClusterId{0}});
    for (; it != edges_.end() && it->first.first == modeling; ++it) out.emplace_back(it->first.second, it->second);
    // map order already gives ascending coding id; stable sort keeps it for ties
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

} // namespace dcm
