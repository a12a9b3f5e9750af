#include "dcm/config.hpp"

#include "dcm/error.hpp"
#include "dcm/parse.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace dcm {

namespace {

template <class T>
T from_text(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
        return text;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (text == "true" || text == "1" || text == "yes") return true;
        if (text == "false" || text == "0" || text == "no") return false;
        throw InputError("config key '" + key + "': expected a boolean, got '" + text + "'");
    } else if constexpr (std::is_floating_point_v<T>) {
        auto v = parse_number(text);
        if (!v) throw InputError("config key '" + key + "': expected a number, got '" + text + "'");
        return static_cast<T>(*v);
    } else {
        T value{};
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            throw InputError("config key '" + key + "': expected an integer, got '" + text + "'");
        }
        return value;
    }
}

template <class T>
std::string to_text(const T& value) {
    if constexpr (std::is_same_v<T, std::string>) {
        return value;
    } else if constexpr (std::is_same_v<T, bool>) {
        return value ? "true" : "false";
    } else if constexpr (std::is_floating_point_v<T>) {
        return format_number(value);
    } else {
        return std::to_string(value);
    }
}

struct Field {
    std::string name;
    std::function<void(Config&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

template <class T>
Field field(std::string name, T Config::*member) {
    return {name, [member, name](Config& c, const std::string& v) { c.*member = from_text<T>(name, v); },
            [member](const Config& c) { return to_text(c.*member); }};
}

template <class T>
Field provider_field(std::string name, T ProviderConfig::*member) {
    return {name,
            [member, name](Config& c, const std::string& v) { c.provider.*member = from_text<T>(name, v); },
            [member](const Config& c) { return to_text(c.provider.*member); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        field("top_k", &Config::top_k),
        field("update_threshold", &Config::update_threshold),
        field("planning_candidates", &Config::planning_candidates),
        field("repair_limit", &Config::repair_limit),
        field("exec_timeout_seconds", &Config::exec_timeout_seconds),
        field("max_classification_rounds", &Config::max_classification_rounds),
        field("numeric_rel_tolerance", &Config::numeric_rel_tolerance),
        field("numeric_abs_floor", &Config::numeric_abs_floor),
        field("embedding_dim", &Config::embedding_dim),
        field("seed", &Config::seed),
        field("verifier_char_budget", &Config::verifier_char_budget),
        field("executor", &Config::executor),
        field("harness_path", &Config::harness_path),
        field("max_output_bytes", &Config::max_output_bytes),
        field("allow_network", &Config::allow_network),
        field("max_parallel_executions", &Config::max_parallel_executions),
        field("workers", &Config::workers),
        field("deterministic_clock", &Config::deterministic_clock),
        field("verbose_trace", &Config::verbose_trace),
        field("template_dir", &Config::template_dir),
        provider_field("provider.kind", &ProviderConfig::kind),
        provider_field("provider.chat_endpoint", &ProviderConfig::chat_endpoint),
        provider_field("provider.chat_model", &ProviderConfig::chat_model),
        provider_field("provider.embed_endpoint", &ProviderConfig::embed_endpoint),
        provider_field("provider.embed_model", &ProviderConfig::embed_model),
        provider_field("provider.temperature", &ProviderConfig::temperature),
        provider_field("provider.max_tokens", &ProviderConfig::max_tokens),
        provider_field("provider.request_timeout_seconds", &ProviderConfig::request_timeout_seconds),
        provider_field("provider.retry_count", &ProviderConfig::retry_count),
        provider_field("provider.api_key_env", &ProviderConfig::api_key_env),
        provider_field("provider.rate_limit_per_second", &ProviderConfig::rate_limit_per_second),
        provider_field("provider.rate_limit_burst", &ProviderConfig::rate_limit_burst),
        provider_field("provider.mock_seed", &ProviderConfig::mock_seed),
        provider_field("provider.mock_selector", &ProviderConfig::mock_selector),
        provider_field("provider.log_wire", &ProviderConfig::log_wire),
    };
    return table;
}

std::string canonical_key(const std::string& key) {
    if (key == "K") return "top_k";
    if (key == "N") return "update_threshold";
    if (key == "M") return "planning_candidates";
    return key;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw InputError("invalid config: " + what);
}

} // namespace

void Config::validate() const {
    require(top_k >= 1, "top_k must be >= 1");
    require(update_threshold >= 1, "update_threshold must be >= 1");
    require(planning_candidates >= 1, "planning_candidates must be >= 1");
    require(repair_limit >= 0, "repair_limit must be >= 0");
    require(max_classification_rounds >= 1, "max_classification_rounds must be >= 1");
    require(exec_timeout_seconds > 0, "exec_timeout_seconds must be > 0");
    require(numeric_rel_tolerance > 0, "numeric_rel_tolerance must be > 0");
    require(numeric_abs_floor >= 0, "numeric_abs_floor must be >= 0");
    require(embedding_dim >= 1, "embedding_dim must be >= 1");
    require(executor == "stub" || executor == "harness", "executor must be 'stub' or 'harness'");
    require(executor != "harness" || !harness_path.empty(), "executor 'harness' needs harness_path");
    require(max_parallel_executions >= 1, "max_parallel_executions must be >= 1");
    require(workers >= 1, "workers must be >= 1");
    require(provider.kind == "mock" || provider.kind == "http", "provider.kind must be 'mock' or 'http'");
    require(provider.retry_count >= 0, "provider.retry_count must be >= 0");
    require(provider.request_timeout_seconds > 0, "provider.request_timeout_seconds must be > 0");
    require(provider.kind != "http" || !provider.chat_endpoint.empty(), "http provider needs provider.chat_endpoint");
}

Config Config::parse(std::string_view text) {
    Config config;
    int line_no = 0;
    for (const auto& raw_line : split_lines(text)) {
        ++line_no;
        std::string line = raw_line;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = canonical_key(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        bool known = false;
        for (const auto& f : fields()) {
            if (f.name == key) {
                f.set(config, value);
                known = true;
                break;
            }
        }
        if (!known) throw InputError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    config.validate();
    return config;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::vector<std::pair<std::string, std::string>> Config::to_kv() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.name, f.get(*this));
    return out;
}

} // namespace dcm
