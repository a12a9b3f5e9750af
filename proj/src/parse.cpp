#include "dcm/parse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

namespace dcm {

std::string trim(std::string_view text) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = text.size();
    while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return lines;
}

namespace {

std::string upper(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

bool starts_with_ci(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    return upper(text.substr(0, prefix.size())) == upper(prefix);
}

bool is_fence(std::string_view line) {
    return trim(line).rfind("```", 0) == 0;
}

// Lines with fence markers removed, trimmed, empty ones dropped.
std::vector<std::string> content_lines(std::string_view raw) {
    std::vector<std::string> out;
    for (const auto& line : split_lines(raw)) {
        if (is_fence(line)) continue;
        auto t = trim(line);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

enum class Tier { none, approach, checklist, pitfall };

Tier header_tier(std::string_view line, std::string& inline_item) {
    std::string t = trim(line);
    while (!t.empty() && (t.front() == '#' || t.front() == '*')) t.erase(0, 1);
    t = trim(t);
    const std::pair<std::string_view, Tier> headers[] = {
        {"APPROACH", Tier::approach}, {"CHECKLIST", Tier::checklist}, {"PITFALL", Tier::pitfall}};
    for (const auto& [name, tier] : headers) {
        if (!starts_with_ci(t, name)) continue;
        std::string rest = trim(std::string_view(t).substr(name.size()));
        if (!rest.empty() && (rest.front() == 'S' || rest.front() == 's')) rest = trim(rest.substr(1)); // plural
        while (!rest.empty() && rest.front() == '*') rest.erase(0, 1);
        if (rest.empty() || rest.front() != ':') continue;
        rest.erase(0, 1);
        while (!rest.empty() && rest.front() == '*') rest.erase(0, 1);
        inline_item = trim(rest);
        return tier;
    }
    return Tier::none;
}

std::string strip_bullet(std::string_view line) {
    std::string t = trim(line);
    if (t.rfind("- ", 0) == 0 || t.rfind("* ", 0) == 0) return trim(t.substr(2));
    std::size_t digits = 0;
    while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) ++digits;
    if (digits > 0 && digits + 1 < t.size() && (t[digits] == '.' || t[digits] == ')') && t[digits + 1] == ' ') {
        return trim(t.substr(digits + 2));
    }
    return t;
}

bool is_none_item(const std::string& item) {
    const auto u = upper(item);
    return u == "(NONE)" || u == "NONE" || u == "N/A" || u == "-";
}

} // namespace

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    return upper(haystack).find(upper(needle)) != std::string::npos;
}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

std::optional<double> parse_number(std::string_view text) {
    std::string t = trim(text);
    if (!t.empty() && t.front() == '+') t.erase(0, 1);
    if (t.empty()) return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string render_knowledge(const Knowledge& knowledge) {
    std::string out;
    auto section = [&out](std::string_view name, const std::vector<std::string>& items) {
        out += name;
        out += ":\n";
        if (items.empty()) out += "- (none)\n";
        for (const auto& item : items) out += "- " + item + "\n";
    };
    section("APPROACH", knowledge.approach);
    section("CHECKLIST", knowledge.checklist);
    section("PITFALL", knowledge.pitfall);
    return out;
}

std::optional<Knowledge> parse_knowledge(std::string_view raw) {
    Knowledge out;
    Tier current = Tier::none;
    bool saw_header = false;
    auto add = [&](const std::string& item) {
        if (item.empty() || is_none_item(item)) return;
        switch (current) {
        case Tier::approach: out.approach.push_back(item); break;
        case Tier::checklist: out.checklist.push_back(item); break;
        case Tier::pitfall: out.pitfall.push_back(item); break;
        case Tier::none: break;
        }
    };
    for (const auto& line : content_lines(raw)) {
        std::string inline_item;
        if (auto tier = header_tier(line, inline_item); tier != Tier::none) {
            current = tier;
            saw_header = true;
            add(strip_bullet(inline_item));
            continue;
        }
        const auto item = strip_bullet(line);
        // Unbulleted "Something:" lines are sub-headings, not items.
        if (item == line && item.back() == ':') continue;
        add(item);
    }
    if (!saw_header) return std::nullopt;
    return out;
}

std::optional<MatchVerdict> parse_match(std::string_view raw, const std::vector<std::string>& labels) {
    for (const auto& line : content_lines(raw)) {
        std::string t = line;
        while (!t.empty() && (t.front() == '*' || t.front() == '#')) t.erase(0, 1);
        t = trim(t);
        if (starts_with_ci(t, "NO_MATCH") || starts_with_ci(t, "NO MATCH")) return MatchVerdict{false, {}};
        if (!starts_with_ci(t, "MATCH")) continue;
        std::string label = trim(std::string_view(t).substr(5));
        auto strip = [](std::string& s) {
            while (!s.empty() && std::string_view(":[(`*").find(s.front()) != std::string_view::npos) s.erase(0, 1);
            while (!s.empty() && std::string_view("])`*.,").find(s.back()) != std::string_view::npos) s.pop_back();
            s = trim(s);
        };
        strip(label);
        if (label.empty()) {
            if (labels.size() == 1) return MatchVerdict{true, labels.front()};
            return std::nullopt;
        }
        for (const auto& candidate : labels) {
            if (upper(candidate) == upper(label)) return MatchVerdict{true, candidate};
        }
        return std::nullopt;
    }
    return std::nullopt;
}

std::optional<CheckVerdict> parse_check(std::string_view raw) {
    const auto lines = split_lines(raw);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_fence(lines[i])) continue;
        std::string t = trim(lines[i]);
        while (!t.empty() && (t.front() == '*' || t.front() == '#')) t.erase(0, 1);
        t = trim(t);
        if (t.empty()) continue;
        if (starts_with_ci(t, "PASS")) return CheckVerdict{true, {}};
        if (starts_with_ci(t, "FAIL")) {
            std::string rest;
            for (std::size_t j = i + 1; j < lines.size(); ++j) rest += lines[j] + "\n";
            auto revision = parse_block(rest);
            if (!revision) return std::nullopt;
            return CheckVerdict{false, *revision};
        }
        return std::nullopt;
    }
    return std::nullopt;
}

std::optional<std::vector<std::size_t>> parse_rank(std::string_view raw, std::size_t path_count) {
    for (const auto& line : content_lines(raw)) {
        const auto u = upper(line);
        const auto at = u.find("RANK:");
        if (at == std::string::npos) continue;
        std::vector<std::size_t> order;
        std::set<std::size_t> seen;
        std::string_view rest = std::string_view(line).substr(at + 5);
        std::size_t i = 0;
        while (i < rest.size()) {
            if (std::isdigit(static_cast<unsigned char>(rest[i]))) {
                std::size_t value = 0;
                auto [ptr, ec] = std::from_chars(rest.data() + i, rest.data() + rest.size(), value);
                if (ec != std::errc{}) return std::nullopt;
                if (value >= path_count || !seen.insert(value).second) return std::nullopt;
                order.push_back(value);
                i = static_cast<std::size_t>(ptr - rest.data());
            } else if (rest[i] == ',' || std::isspace(static_cast<unsigned char>(rest[i]))) {
                ++i;
            } else {
                return std::nullopt;
            }
        }
        if (order.empty()) return std::nullopt;
        return order;
    }
    return std::nullopt;
}

std::optional<std::string> parse_block(std::string_view raw) {
    const auto lines = split_lines(raw);
    std::size_t open = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_fence(lines[i])) {
            open = i;
            break;
        }
    }
    std::string body;
    if (open == lines.size()) {
        body = trim(raw);
    } else {
        for (std::size_t j = open + 1; j < lines.size() && !is_fence(lines[j]); ++j) body += lines[j] + "\n";
        body = trim(body);
    }
    if (body.empty()) return std::nullopt;
    return body;
}

std::optional<SplitSolution> parse_split(std::string_view raw) {
    const auto lines = split_lines(raw);
    SplitSolution out;
    bool have_model = false, have_code = false;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!is_fence(lines[i])) continue;
        const std::string label = upper(trim(trim(lines[i]).substr(3)));
        std::string body;
        std::size_t j = i + 1;
        for (; j < lines.size() && !is_fence(lines[j]); ++j) body += lines[j] + "\n";
        body = trim(body);
        if ((label == "MODEL" || label == "MATH" || label == "MODELING") && !have_model) {
            out.modeling = body;
            have_model = !body.empty();
        } else if ((label == "PYTHON" || label == "CODE" || label == "PY") && !have_code) {
            out.coding = body;
            have_code = !body.empty();
        }
        i = j; // skip past the closing fence
    }
    if (!have_model || !have_code) return std::nullopt;
    return out;
}

std::string render_split(const SplitSolution& split) {
    return "```model\n" + split.modeling + "\n```\n\n```python\n" + split.coding + "\n```\n";
}

} // namespace dcm
