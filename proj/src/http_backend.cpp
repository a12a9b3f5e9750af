#include "dcm/http_backend.hpp"

#include "dcm/error.hpp"
#include "dcm/mock.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace dcm {

using json = nlohmann::json;

namespace {

struct Url {
    std::string origin; // scheme://host[:port]
    std::string path;   // without trailing slash
};

Url split_url(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw InputError("endpoint '" + endpoint + "' needs an http:// or https:// scheme");
    const auto slash = endpoint.find('/', scheme_end + 3);
    Url url;
    url.origin = endpoint.substr(0, slash);
    url.path = slash == std::string::npos ? "" : endpoint.substr(slash);
    while (!url.path.empty() && url.path.back() == '/') url.path.pop_back();
    return url;
}

bool retryable(int status) {
    return status == 429 || status >= 500;
}

} // namespace

std::string post_json(const ProviderConfig& config, const std::string& endpoint, const std::string& path,
                      const std::string& body, const WireLog& wire_log) {
    if (endpoint.empty()) throw InputError("provider endpoint is not configured");
    const auto url = split_url(endpoint);
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(config.request_timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config.api_key_env.empty()) {
        if (const char* key = std::getenv(config.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    if (wire_log) wire_log("request", body);

    std::string last_error;
    for (int attempt = 0; attempt <= config.retry_count; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
        auto response = client.Post(url.path + path, headers, body, "application/json");
        if (!response) {
            last_error = "transport failure: " + httplib::to_string(response.error());
            continue;
        }
        if (wire_log) wire_log("response", response->body);
        if (response->status >= 200 && response->status < 300) return response->body;
        last_error = "HTTP " + std::to_string(response->status) + ": " + response->body.substr(0, 300);
        if (!retryable(response->status)) break;
    }
    throw ProviderError(url.origin + url.path + path + ": " + last_error);
}

HttpChatBackend::HttpChatBackend(ProviderConfig config, WireLog wire_log)
    : config_(std::move(config)), wire_log_(std::move(wire_log)) {}

std::string HttpChatBackend::complete(const ChatRequest& request) {
    json body;
    body["model"] = config_.chat_model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt}}});
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_tokens;
    const auto raw = post_json(config_, config_.chat_endpoint, "/chat/completions", body.dump(), wire_log_);
    try {
        const auto reply = json::parse(raw);
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        if (content.is_null()) return {};
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed chat response: ") + e.what());
    }
}

HttpEmbeddingBackend::HttpEmbeddingBackend(ProviderConfig config, WireLog wire_log)
    : config_(std::move(config)), wire_log_(std::move(wire_log)) {}

std::vector<double> HttpEmbeddingBackend::embed(std::string_view text) {
    json body;
    body["model"] = config_.embed_model;
    body["input"] = std::string(text);
    const auto& endpoint = config_.embed_endpoint.empty() ? config_.chat_endpoint : config_.embed_endpoint;
    const auto raw = post_json(config_, endpoint, "/embeddings", body.dump(), wire_log_);
    try {
        return json::parse(raw).at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed embedding response: ") + e.what());
    }
}

Gateway make_gateway(const Config& config, WireLog wire_log) {
    const auto& p = config.provider;
    auto templates = config.template_dir.empty() ? PromptTemplates::defaults()
                                                 : PromptTemplates::with_overrides(config.template_dir);
    std::shared_ptr<ChatBackend> chat;
    std::shared_ptr<EmbeddingBackend> embedder;
    if (p.kind == "mock") {
        chat = std::make_shared<MockChatBackend>(p.chat_model, selector_rule_from_string(p.mock_selector));
        embedder = std::make_shared<MockEmbedder>(config.embedding_dim, p.mock_seed, p.embed_model);
    } else if (p.kind == "http") {
        if (!p.log_wire) wire_log = {};
        chat = std::make_shared<HttpChatBackend>(p, wire_log);
        embedder = std::make_shared<HttpEmbeddingBackend>(p, wire_log);
    } else {
        throw InputError("provider.kind must be mock or http, got '" + p.kind + "'");
    }
    return Gateway(std::move(chat), std::move(embedder), std::move(templates), config.embedding_dim,
                   p.rate_limit_per_second, p.rate_limit_burst);
}

} // namespace dcm
