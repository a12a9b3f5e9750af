#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dcm {

struct ProviderConfig {
    std::string kind = "mock"; // "mock" or "http"
    std::string chat_endpoint;
    std::string chat_model = "mock-chat";
    std::string embed_endpoint;
    std::string embed_model = "mock-embed";
    double temperature = 0.0;
    int max_tokens = 2048;
    double request_timeout_seconds = 60.0;
    int retry_count = 2;
    std::string api_key_env = "DCM_API_KEY";
    double rate_limit_per_second = 0.0; // 0 disables the token bucket
    int rate_limit_burst = 4;
    std::uint64_t mock_seed = 7;
    std::string mock_selector = "overlap"; // overlap | identity | reverse
    bool log_wire = false;
};

struct Config {
    int top_k = 3;                 // K: retrieval width in construction and inference
    int update_threshold = 5;      // N: pending phis before a knowledge synthesis
    int planning_candidates = 3;   // M: size of the path queue
    int repair_limit = 2;
    double exec_timeout_seconds = 60.0;
    int max_classification_rounds = 3;
    double numeric_rel_tolerance = 1e-4;
    double numeric_abs_floor = 1e-6;

    std::size_t embedding_dim = 256;
    std::uint64_t seed = 42;
    std::size_t verifier_char_budget = 1200;

    std::string executor = "stub"; // "stub" or "harness"
    std::string harness_path;
    std::size_t max_output_bytes = 1 << 20;
    bool allow_network = false;
    int max_parallel_executions = 4;

    int workers = 1;
    bool deterministic_clock = false;
    bool verbose_trace = true;
    std::string template_dir; // optional <role>.txt overrides

    ProviderConfig provider;

    // Throws InputError naming the offending field.
    void validate() const;

    // Flat `key = value` text; `#` starts a comment. Unknown keys are errors.
    static Config parse(std::string_view text);
    static Config load(const std::filesystem::path& path);

    // Every key in file order, as written by the parser's inverse.
    std::vector<std::pair<std::string, std::string>> to_kv() const;
};

} // namespace dcm
