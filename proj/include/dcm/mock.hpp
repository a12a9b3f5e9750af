#pragma once

// Deterministic offline backends.
//
// The mock chat model is rule based. Synthetic problems carry a `[mock]` tag
// line that scripts what a "real" model would do on them: which paradigm and
// solver fit, which modeling trap a naive attempt falls into, which runtime
// error a naive script raises, and on which attempt an unaided retry succeeds.
// Knowledge changes the outcome only through keywords: a model is correct when
// its guidance mentions the trap, and a crash is repaired when the fixer's
// pitfalls mention the crash keyword.

#include "dcm/llm.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace dcm {

struct MockScript {
    std::string family;
    std::string paradigm;
    std::string solver;
    std::string trap = "none";
    std::string crash = "none";
    int recover = 0; // attempt from which an unaided retry succeeds; 0 = never
    ExtractedAnswer answer;
    ExtractedAnswer naive;
};

inline constexpr std::string_view kMockTagPrefix = "[mock]";

std::optional<MockScript> parse_mock_tag(std::string_view text);
std::string format_mock_tag(const MockScript& script);

enum class SelectorRule { overlap, identity, reverse };

SelectorRule selector_rule_from_string(std::string_view text);

class MockChatBackend : public ChatBackend {
public:
    explicit MockChatBackend(std::string model = "mock-chat", SelectorRule rule = SelectorRule::overlap);

    std::string complete(const ChatRequest& request) override;
    std::string model_name() const override { return model_; }

    // Queued replies are returned, in order, before any rule applies.
    void script(LlmRole role, std::string reply);
    std::size_t calls(LlmRole role) const;

private:
    std::string extractor(const Slots& slots) const;
    std::string verifier(const Slots& slots) const;
    std::string synthesizer(const Slots& slots) const;
    std::string selector(const Slots& slots) const;
    std::string generator(const Slots& slots) const;
    std::string fixer(const Slots& slots) const;

    std::string model_;
    SelectorRule rule_;
    mutable std::mutex mutex_;
    std::array<std::deque<std::string>, all_roles.size()> scripted_;
    std::array<std::size_t, all_roles.size()> calls_{};
};

// Seeded hash of word unigrams and bigrams projected to the unit sphere.
// Texts sharing words get correlated vectors.
class MockEmbedder : public EmbeddingBackend {
public:
    MockEmbedder(std::size_t dim, std::uint64_t seed, std::string model = "mock-embed");

    std::vector<double> embed(std::string_view text) override;
    std::string model_name() const override { return model_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
    std::string model_;
};

} // namespace dcm
