#pragma once

#include "dcm/types.hpp"

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace dcm {

enum class LlmRole { extractor, verifier, synthesizer, selector, generator, fixer };

inline constexpr std::array<LlmRole, 6> all_roles = {
    LlmRole::extractor, LlmRole::verifier, LlmRole::synthesizer,
    LlmRole::selector,  LlmRole::generator, LlmRole::fixer};

std::string_view to_string(LlmRole role);

using Slots = std::map<std::string, std::string, std::less<>>;

// Text with `{name}` (required) and `{name?}` (optional, renders empty) slots.
class PromptTemplate {
public:
    PromptTemplate() = default;
    explicit PromptTemplate(std::string text);

    // Throws InputError if a required slot is missing.
    std::string render(const Slots& slots) const;
    const std::vector<std::string>& required_slots() const { return required_; }
    const std::string& text() const { return text_; }

private:
    std::string text_;
    std::vector<std::string> required_;
};

class PromptTemplates {
public:
    static PromptTemplates defaults();
    // Replaces the defaults with `<dir>/<role>.txt` where present.
    static PromptTemplates with_overrides(const std::filesystem::path& dir);

    const PromptTemplate& get(LlmRole role) const;

private:
    std::array<PromptTemplate, all_roles.size()> templates_;
};

struct ChatRequest {
    LlmRole role;
    const Slots& slots;
    std::string prompt;
    int attempt = 0; // 1 on the format re-prompt
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string model_name() const = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::vector<double> embed(std::string_view text) = 0;
    virtual std::string model_name() const = 0;
};

struct ChatRecord {
    LlmRole role;
    std::string prompt;
    std::string response;
    bool retry = false;
};

// Per-operation record of chat calls. Not synchronized: one log per solve or build.
class CallLog {
public:
    void record(ChatRecord entry) { records_.push_back(std::move(entry)); }
    const std::vector<ChatRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

private:
    std::vector<ChatRecord> records_;
};

class TokenBucket {
public:
    // rate <= 0 disables limiting.
    TokenBucket(double rate_per_second, int burst);
    void acquire();

private:
    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

class Gateway {
public:
    Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder,
            PromptTemplates templates, std::size_t dim, double rate_per_second = 0.0, int burst = 1);

    // Renders the role's template, calls the backend, records prompt and
    // response. Throws ProviderError on an empty completion.
    std::string chat(LlmRole role, const Slots& slots, CallLog* log = nullptr) const;

    // chat + parse, with one re-prompt when the parser rejects the reply.
    // Returns the parser's empty optional if the second reply is rejected too.
    template <class Parser>
    auto chat_parsed(LlmRole role, const Slots& slots, Parser&& parse, CallLog* log = nullptr) const
        -> decltype(parse(std::string_view{})) {
        auto first = parse(std::string_view{chat_once(role, slots, 0, log)});
        if (first) return first;
        return parse(std::string_view{chat_once(role, slots, 1, log)});
    }

    // Unit vector of dim(). Throws DimensionMismatch if the backend disagrees.
    Embedding embed(std::string_view text) const;

    std::size_t dim() const { return dim_; }
    std::string chat_model() const { return chat_->model_name(); }
    std::string embed_model() const { return embedder_->model_name(); }
    const PromptTemplates& templates() const { return templates_; }

private:
    std::string chat_once(LlmRole role, const Slots& slots, int attempt, CallLog* log) const;

    std::shared_ptr<ChatBackend> chat_;
    std::shared_ptr<EmbeddingBackend> embedder_;
    PromptTemplates templates_;
    std::size_t dim_;
    std::unique_ptr<TokenBucket> bucket_;
};

inline constexpr std::string_view kReformatReminder =
    "\n\nYour previous reply could not be parsed. Answer again and follow the required "
    "response format exactly.";

} // namespace dcm
