#include "dcm/mock.hpp"

#include "dcm/error.hpp"
#include "dcm/parse.hpp"
#include "dcm/sandbox.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace dcm {

namespace {

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "the", "and", "for", "with", "each", "are", "per", "that", "this", "from", "has", "can",
        "into", "its", "must", "their", "there", "what", "which", "will", "your", "how", "all"};
    return words;
}

std::vector<std::string> words(std::string_view text, std::size_t min_len) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (current.size() >= min_len && !stopwords().contains(current)) out.push_back(current);
        current.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::string slot(const Slots& slots, std::string_view name, std::string fallback = {}) {
    auto it = slots.find(name);
    return it == slots.end() ? fallback : it->second;
}

std::string first_line(std::string_view text) {
    for (const auto& line : split_lines(text)) {
        auto t = trim(line);
        if (!t.empty()) return t;
    }
    return {};
}

// Value after "<prefix>" on the first line that starts with it.
std::optional<std::string> line_value(std::string_view text, std::string_view prefix) {
    for (const auto& line : split_lines(text)) {
        auto t = trim(line);
        if (t.rfind(prefix, 0) == 0) return trim(std::string_view(t).substr(prefix.size()));
    }
    return std::nullopt;
}

std::vector<std::string> line_values(std::string_view text, std::string_view prefix) {
    std::vector<std::string> out;
    for (const auto& line : split_lines(text)) {
        auto t = trim(line);
        if (t.rfind(prefix, 0) == 0) out.push_back(trim(std::string_view(t).substr(prefix.size())));
    }
    return out;
}

std::string format_values(const ExtractedAnswer& answer) {
    std::string out = "objective=" + format_number(answer.objective);
    for (const auto& [name, value] : answer.requirements) out += " " + name + "=" + format_number(value);
    return out;
}

std::optional<ExtractedAnswer> parse_values(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string token;
    ExtractedAnswer out;
    bool have_objective = false;
    while (in >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos) return std::nullopt;
        auto value = parse_number(std::string_view(token).substr(eq + 1));
        if (!value) return std::nullopt;
        const auto key = token.substr(0, eq);
        if (key == "objective") {
            out.objective = *value;
            have_objective = true;
        } else {
            out.requirements.emplace_back(key, *value);
        }
    }
    if (!have_objective) return std::nullopt;
    return out;
}

std::string import_line(std::string_view solver) {
    if (solver == "pulp") return "import pulp";
    if (solver == "ortools") return "from ortools.linear_solver import pywraplp";
    if (solver == "gurobi") return "import gurobipy as gp";
    if (solver == "scipy") return "from scipy.optimize import linprog";
    if (solver == "networkx") return "import networkx as nx";
    return "import math";
}

std::string print_block(const ExtractedAnswer& answer) {
    std::string out;
    for (const auto& line : split_lines(format_answer_block(answer))) {
        if (line.empty()) continue;
        out += "print(\"" + line + "\")\n";
    }
    return out;
}

bool unaided_success(const MockScript& script, int attempt) {
    return script.recover > 0 && attempt >= script.recover;
}

std::string model_text(const MockScript& script, std::string_view problem, std::string_view guidance, int attempt) {
    const bool correct =
        script.trap == "none" || contains_ci(guidance, script.trap) || unaided_success(script, attempt);
    std::string context = first_line(problem);
    if (context.size() > 160) context.resize(160);
    std::string out = "Paradigm: " + script.paradigm + " (" + script.family + ")\n";
    out += "Context: " + context + "\n";
    out += "Variables: one decision variable per choice described in the problem\n";
    out += "Objective: as stated in the problem\n";
    if (script.trap != "none") {
        out += correct ? "Insight: " + script.trap + " enforced\n" : "Assumption: " + script.trap + " ignored\n";
    }
    out += "[mock-model] " + format_values(correct ? script.answer : script.naive) + "\n";
    return out;
}

std::string success_script(const std::string& header, const std::string& imports, const ExtractedAnswer& answer) {
    return header + "\n" + imports + "\n# STUB: success " + format_values(answer) + "\n" + print_block(answer);
}

std::string code_text(const MockScript& script, std::string_view model, std::string_view guidance, int attempt) {
    const std::string header = "# Solver: " + script.solver + " (" + script.paradigm + ")";
    const std::string imports = import_line(script.solver);
    auto values_text = line_value(model, "[mock-model]");
    auto values = values_text ? parse_values(*values_text) : std::nullopt;
    if (!values) {
        return header + "\n" + imports + "\n# STUB: non_numeric\nprint(\"model was not understood\")\n";
    }
    const bool crashes =
        script.crash != "none" && !contains_ci(guidance, script.crash) && !unaided_success(script, attempt);
    if (!crashes) return success_script(header, imports, *values);
    return header + "\n" + imports + "\n# STUB: runtime_error message=KeyError: '" + script.crash + "'\n" +
           "# mock-crash: " + script.crash + "\n" + "# mock-intended: " + format_values(*values) + "\n" +
           "raise KeyError(\"" + script.crash + "\")\n";
}

std::string fenced(std::string_view label, std::string_view body) {
    return "```" + std::string(label) + "\n" + trim(body) + "\n```\n";
}

bool looks_like_code(std::string_view line) {
    const auto t = trim(line);
    for (std::string_view p : {"import ", "from ", "# Solver:", "def ", "print(", "raise "}) {
        if (t.rfind(p, 0) == 0) return true;
    }
    return false;
}

} // namespace

std::optional<MockScript> parse_mock_tag(std::string_view text) {
    for (const auto& line : split_lines(text)) {
        const auto t = trim(line);
        if (t.rfind(kMockTagPrefix, 0) != 0) continue;
        MockScript script;
        std::istringstream in(t.substr(kMockTagPrefix.size()));
        std::string token;
        while (in >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            if (key == "family") script.family = value;
            else if (key == "paradigm") script.paradigm = value;
            else if (key == "solver") script.solver = value;
            else if (key == "trap") script.trap = value;
            else if (key == "crash") script.crash = value;
            else if (key == "recover") script.recover = std::stoi(value);
            else if (key.rfind("answer.", 0) == 0 || key.rfind("naive.", 0) == 0) {
                auto number = parse_number(value);
                if (!number) continue;
                const bool is_answer = key[0] == 'a';
                auto& target = is_answer ? script.answer : script.naive;
                const auto name = key.substr(is_answer ? 7 : 6);
                if (name == "objective") target.objective = *number;
                else target.requirements.emplace_back(name, *number);
            }
        }
        return script;
    }
    return std::nullopt;
}

std::string format_mock_tag(const MockScript& script) {
    std::string out(kMockTagPrefix);
    out += " family=" + script.family + " paradigm=" + script.paradigm + " solver=" + script.solver;
    out += " trap=" + script.trap + " crash=" + script.crash + " recover=" + std::to_string(script.recover);
    auto emit = [&out](std::string_view prefix, const ExtractedAnswer& a) {
        out += " " + std::string(prefix) + "objective=" + format_number(a.objective);
        for (const auto& [name, value] : a.requirements) out += " " + std::string(prefix) + name + "=" + format_number(value);
    };
    emit("answer.", script.answer);
    emit("naive.", script.naive);
    return out;
}

SelectorRule selector_rule_from_string(std::string_view text) {
    if (text == "overlap") return SelectorRule::overlap;
    if (text == "identity") return SelectorRule::identity;
    if (text == "reverse") return SelectorRule::reverse;
    throw InputError("unknown mock selector rule '" + std::string(text) + "'");
}

MockChatBackend::MockChatBackend(std::string model, SelectorRule rule) : model_(std::move(model)), rule_(rule) {}

void MockChatBackend::script(LlmRole role, std::string reply) {
    std::lock_guard lock(mutex_);
    scripted_[static_cast<std::size_t>(role)].push_back(std::move(reply));
}

std::size_t MockChatBackend::calls(LlmRole role) const {
    std::lock_guard lock(mutex_);
    return calls_[static_cast<std::size_t>(role)];
}

std::string MockChatBackend::complete(const ChatRequest& request) {
    {
        std::lock_guard lock(mutex_);
        const auto index = static_cast<std::size_t>(request.role);
        ++calls_[index];
        auto& queue = scripted_[index];
        if (!queue.empty()) {
            auto reply = std::move(queue.front());
            queue.pop_front();
            return reply;
        }
    }
    const auto& s = request.slots;
    switch (request.role) {
    case LlmRole::extractor: return extractor(s);
    case LlmRole::verifier: return verifier(s);
    case LlmRole::synthesizer: return synthesizer(s);
    case LlmRole::selector: return selector(s);
    case LlmRole::generator: return generator(s);
    case LlmRole::fixer: return fixer(s);
    }
    return {};
}

std::string MockChatBackend::generator(const Slots& slots) const {
    const auto task = slot(slots, "task");
    const auto problem = slot(slots, "problem");
    const auto guidance = slot(slots, "guidance");
    const int attempt = std::stoi(slot(slots, "attempt", "1"));
    auto script = parse_mock_tag(problem);
    if (!script) {
        // Not a synthetic problem: produce something shaped right but unusable.
        if (task == "code") return fenced("python", "# STUB: non_numeric\nprint(\"no model\")");
        std::string model = "Paradigm: unknown\nContext: " + first_line(problem);
        if (task == "solve") return render_split({model, "# STUB: non_numeric\nprint(\"no model\")"});
        return fenced("model", model);
    }
    if (task == "model") return fenced("model", model_text(*script, problem, guidance, attempt));
    if (task == "code") return fenced("python", code_text(*script, slot(slots, "context"), guidance, attempt));
    const auto model = model_text(*script, problem, guidance, attempt);
    return render_split({trim(model), trim(code_text(*script, model, guidance, attempt))});
}

std::string MockChatBackend::fixer(const Slots& slots) const {
    const auto code = slot(slots, "code");
    const auto knowledge = slot(slots, "pitfall") + "\n" + slot(slots, "checklist");
    const auto crash = line_value(code, "# mock-crash:");
    const auto intended_text = line_value(code, "# mock-intended:");
    const auto intended = intended_text ? parse_values(*intended_text) : std::nullopt;
    if (crash && intended && contains_ci(knowledge, *crash)) {
        std::string header = line_value(code, "# Solver:").value_or("unknown");
        std::string imports;
        for (const auto& line : split_lines(code)) {
            if (looks_like_code(line) && (trim(line).rfind("import ", 0) == 0 || trim(line).rfind("from ", 0) == 0)) {
                imports += trim(line) + "\n";
            }
        }
        std::string fixed = "# Solver: " + header + "\n" + trim(imports) + "\n# guard: " + *crash +
                            " handled before solving\n# STUB: success " + format_values(*intended) + "\n" +
                            print_block(*intended);
        return fenced("python", fixed);
    }
    const auto patches = line_values(code, "# patch attempt").size();
    return fenced("python", code + "\n# patch attempt " + std::to_string(patches + 1));
}

std::string MockChatBackend::extractor(const Slots& slots) const {
    const auto task = slot(slots, "task");
    const auto material = slot(slots, "solution");
    if (task == "split") {
        const auto lines = split_lines(material);
        std::size_t cut = lines.size();
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (looks_like_code(lines[i])) {
                cut = i;
                break;
            }
        }
        std::string model, code;
        for (std::size_t i = 0; i < lines.size(); ++i) (i < cut ? model : code) += lines[i] + "\n";
        if (trim(model).empty() || trim(code).empty()) return "SPLIT_FAILED";
        return render_split({trim(model), trim(code)});
    }
    if (task == "success") {
        const auto paradigm = line_value(material, "Paradigm:");
        std::string approach = paradigm ? "Formulate as " + *paradigm : "Formulate the model stated in the problem";
        std::string checklist = "Check objective sense and constraint bounds";
        if (paradigm) checklist += " of the " + *paradigm + " model";
        for (const auto& insight : line_values(material, "Insight:")) {
            approach += "; " + insight;
            checklist += "; confirm " + insight;
        }
        return "APPROACH:\n- " + approach + "\nCHECKLIST:\n- " + checklist + "\n";
    }
    if (task == "failure") {
        std::vector<std::string> items;
        auto add = [&items](std::string item) {
            if (std::find(items.begin(), items.end(), item) == items.end()) items.push_back(std::move(item));
        };
        for (const auto& assumption : line_values(material, "Assumption:")) add("Avoid: " + assumption + " (gave a wrong objective)");
        for (const auto& error : line_values(material, "Error:")) add("Runtime failure: " + error);
        if (items.empty()) add("Attempt failed without a diagnosable cause");
        std::string out = "PITFALL:\n";
        for (const auto& item : items) out += "- " + item + "\n";
        return out;
    }
    return "UNSUPPORTED_TASK";
}

std::string MockChatBackend::verifier(const Slots& slots) const {
    if (slot(slots, "mode", "match") == "check") return "PASS";
    const auto signature = first_line(slot(slots, "candidate"));
    std::string label;
    bool in_block = false, headerless = true;
    for (const auto& line : split_lines(slot(slots, "cluster_summary"))) {
        const auto t = trim(line);
        if (t.rfind("### ", 0) == 0) {
            label = trim(std::string_view(t).substr(4));
            in_block = true;
            headerless = false;
            continue;
        }
        if ((in_block || headerless) && !t.empty() && t == signature) {
            return headerless ? "MATCH" : "MATCH " + label;
        }
    }
    return "NO_MATCH";
}

std::string MockChatBackend::synthesizer(const Slots& slots) const {
    auto current = parse_knowledge(slot(slots, "current")).value_or(Knowledge{});
    auto batch = parse_knowledge(slot(slots, "batch")).value_or(Knowledge{});
    return render_knowledge(merge_union(current, batch));
}

std::string MockChatBackend::selector(const Slots& slots) const {
    std::vector<std::string> paths;
    for (const auto& line : split_lines(slot(slots, "paths"))) {
        const auto t = trim(line);
        if (t.size() > 2 && t.front() == '[') paths.push_back(t);
    }
    std::size_t count = paths.size();
    if (auto c = parse_number(slot(slots, "count")); c && *c >= 1) count = std::min(count, static_cast<std::size_t>(*c));
    std::vector<std::size_t> order(paths.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (rule_ == SelectorRule::reverse) {
        std::reverse(order.begin(), order.end());
    } else if (rule_ == SelectorRule::overlap) {
        const auto problem_words = words(slot(slots, "problem"), 4);
        const std::set<std::string> vocabulary(problem_words.begin(), problem_words.end());
        std::vector<std::size_t> score(paths.size(), 0);
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const auto path_words = words(paths[i], 4);
            const std::set<std::string> distinct(path_words.begin(), path_words.end());
            for (const auto& w : distinct) score[i] += vocabulary.contains(w) ? 1 : 0;
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    }
    order.resize(count);
    std::string out = "RANK: ";
    for (std::size_t i = 0; i < order.size(); ++i) out += (i ? "," : "") + std::to_string(order[i]);
    return out;
}

MockEmbedder::MockEmbedder(std::size_t dim, std::uint64_t seed, std::string model)
    : dim_(dim), seed_(seed), model_(std::move(model)) {
    if (dim_ == 0) throw InputError("mock embedder needs dim >= 1");
}

std::vector<double> MockEmbedder::embed(std::string_view text) {
    auto tokens = words(text, 3);
    std::vector<std::pair<std::string, double>> features;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        features.emplace_back(tokens[i], 1.0);
        if (i + 1 < tokens.size()) features.emplace_back(tokens[i] + " " + tokens[i + 1], 0.5);
    }
    if (features.empty()) features.emplace_back(std::string(text), 1.0);

    std::vector<double> acc(dim_, 0.0);
    for (const auto& [feature, weight] : features) {
        std::uint64_t state = fnv1a(feature) ^ (seed_ * 0x9E3779B97F4A7C15ULL);
        for (std::size_t d = 0; d < dim_; ++d) {
            const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53; // [0, 1)
            acc[d] += weight * (2.0 * u - 1.0);
        }
    }
    return acc;
}

} // namespace dcm
