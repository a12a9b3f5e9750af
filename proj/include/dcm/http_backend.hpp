#pragma once

#include "dcm/config.hpp"
#include "dcm/llm.hpp"

#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace dcm {

// Receives request and response bodies verbatim when wire logging is on.
using WireLog = std::function<void(std::string_view direction, std::string_view body)>;

// POST {endpoint}/chat/completions with {model, messages, temperature, max_tokens};
// reads choices[0].message.content.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(ProviderConfig config, WireLog wire_log = {});

    std::string complete(const ChatRequest& request) override;
    std::string model_name() const override { return config_.chat_model; }

private:
    ProviderConfig config_;
    WireLog wire_log_;
};

// POST {endpoint}/embeddings with {model, input}; reads data[0].embedding.
class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(ProviderConfig config, WireLog wire_log = {});

    std::vector<double> embed(std::string_view text) override;
    std::string model_name() const override { return config_.embed_model; }

private:
    ProviderConfig config_;
    WireLog wire_log_;
};

// POSTs `body` to `endpoint + path` with retries; returns the response body.
// Throws ProviderError once retries are exhausted.
std::string post_json(const ProviderConfig& config, const std::string& endpoint, const std::string& path,
                      const std::string& body, const WireLog& wire_log);

struct Config;

// Mock or HTTP backends per config.provider.kind.
Gateway make_gateway(const Config& config, WireLog wire_log = {});

} // namespace dcm
