#pragma once

#include "dcm/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dcm {

// One problem per line:
//   {"id": "...", "text": "...", "objective": 70, "requirements": {"bags_a": 2}, "source": "..."}
// `objective` absent (or null) means no ground truth. Throws InputError on
// malformed lines, empty text, duplicate ids, or non-finite numbers.
std::vector<Problem> parse_problems(std::string_view jsonl, const std::string& origin = "<memory>");
std::vector<Problem> read_problems(const std::filesystem::path& path);

std::string problems_to_jsonl(std::span<const Problem> problems);
void write_problems(const std::filesystem::path& path, std::span<const Problem> problems);

} // namespace dcm
