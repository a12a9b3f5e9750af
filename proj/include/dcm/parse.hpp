#pragma once

// Response formats for each chat role, and the renderers that produce the
// matching prompt fragments.
//
//   extractor / synthesizer   APPROACH: / CHECKLIST: / PITFALL: headers, "- item" lines
//   verifier (match mode)     "MATCH <cluster-id>" or "NO_MATCH"
//   verifier (check mode)     "PASS", or "FAIL" followed by a fenced revision
//   selector                  "RANK: i,j,k" (0-based path indices)
//   generator / fixer         one fenced block; bare text accepted
//
// Replies may be wrapped in a fence. Every parser returns an empty optional on
// malformed input.

#include "dcm/types.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcm {

std::string render_knowledge(const Knowledge& knowledge);
std::optional<Knowledge> parse_knowledge(std::string_view raw);

struct MatchVerdict {
    bool matched = false;
    std::string cluster_label; // label from the summary header; empty for a headerless single candidate
};

// `labels` are the candidate headers shown to the verifier. A bare "MATCH" is
// only accepted with exactly one candidate.
std::optional<MatchVerdict> parse_match(std::string_view raw, const std::vector<std::string>& labels);

struct CheckVerdict {
    bool pass = true;
    std::string revision; // set when !pass
};

std::optional<CheckVerdict> parse_check(std::string_view raw);

// Distinct in-range indices in the order given; at least one.
std::optional<std::vector<std::size_t>> parse_rank(std::string_view raw, std::size_t path_count);

// Body of the first fenced block, or the whole trimmed reply if unfenced.
std::optional<std::string> parse_block(std::string_view raw);

struct SplitSolution {
    std::string modeling;
    std::string coding;
};

// Labeled fences: ```model (or ```math) and ```python (or ```code).
std::optional<SplitSolution> parse_split(std::string_view raw);

std::string render_split(const SplitSolution& split);

// Small text helpers shared by the parsers, the mock and the prompt builders.
std::string trim(std::string_view text);
std::vector<std::string> split_lines(std::string_view text);
bool contains_ci(std::string_view haystack, std::string_view needle);
std::string format_number(double value); // shortest text that parses back to the same double
std::optional<double> parse_number(std::string_view text);

} // namespace dcm
