#include "dcm/corpus.hpp"

#include "dcm/error.hpp"
#include "dcm/parse.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace dcm {

using ojson = nlohmann::ordered_json;

namespace {

double finite_number(const ojson& j, const std::string& where) {
    if (!j.is_number()) throw InputError(where + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw InputError(where + ": number is not finite");
    return v;
}

} // namespace

std::vector<Problem> parse_problems(std::string_view jsonl, const std::string& origin) {
    std::vector<Problem> out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    for (const auto& line : split_lines(jsonl)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw InputError(where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") || !j["text"].is_string()) {
            throw InputError(where + ": each record needs string fields id and text");
        }
        Problem p;
        p.id = j["id"].get<std::string>();
        p.text = j["text"].get<std::string>();
        if (p.id.empty()) throw InputError(where + ": empty id");
        if (trim(p.text).empty()) throw InputError(where + ": empty text for '" + p.id + "'");
        if (!ids.insert(p.id).second) throw InputError(where + ": duplicate id '" + p.id + "'");
        if (j.contains("source") && j["source"].is_string()) p.source = j["source"].get<std::string>();
        if (j.contains("objective") && !j["objective"].is_null()) {
            GroundTruth truth;
            truth.objective = finite_number(j["objective"], where + " objective");
            if (j.contains("requirements")) {
                if (!j["requirements"].is_object()) throw InputError(where + ": requirements must be an object");
                for (const auto& [name, value] : j["requirements"].items()) {
                    truth.requirements.emplace_back(name, finite_number(value, where + " requirement " + name));
                }
            }
            p.ground_truth = std::move(truth);
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Problem> read_problems(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read problem file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_problems(buffer.str(), path.string());
}

std::string problems_to_jsonl(std::span<const Problem> problems) {
    std::string out;
    for (const auto& p : problems) {
        ojson j;
        j["id"] = p.id;
        j["text"] = p.text;
        if (p.ground_truth) {
            j["objective"] = p.ground_truth->objective;
            ojson req = ojson::object();
            for (const auto& [name, value] : p.ground_truth->requirements) req[name] = value;
            j["requirements"] = req;
        }
        j["source"] = p.source;
        out += j.dump() + "\n";
    }
    return out;
}

void write_problems(const std::filesystem::path& path, std::span<const Problem> problems) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write problem file " + path.string());
    out << problems_to_jsonl(problems);
}

} // namespace dcm
