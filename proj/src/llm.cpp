#include "dcm/llm.hpp"

#include "dcm/error.hpp"
#include "dcm/parse.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

namespace dcm {

std::string_view to_string(LlmRole role) {
    switch (role) {
    case LlmRole::extractor: return "extractor";
    case LlmRole::verifier: return "verifier";
    case LlmRole::synthesizer: return "synthesizer";
    case LlmRole::selector: return "selector";
    case LlmRole::generator: return "generator";
    case LlmRole::fixer: return "fixer";
    }
    return "generator";
}

namespace {

struct SlotRef {
    std::size_t begin;
    std::size_t end; // one past '}'
    std::string name;
    bool optional;
};

std::vector<SlotRef> find_slots(const std::string& text) {
    std::vector<SlotRef> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
        if (j == i + 1 || j >= text.size()) continue;
        bool optional = false;
        if (text[j] == '?') {
            optional = true;
            ++j;
        }
        if (j >= text.size() || text[j] != '}') continue;
        const std::size_t name_end = optional ? j - 1 : j;
        out.push_back({i, j + 1, text.substr(i + 1, name_end - i - 1), optional});
        i = j;
    }
    return out;
}

constexpr std::string_view kExtractorTemplate =
    R"(You analyse solutions to optimization modeling problems and extract reusable knowledge.

{instructions?}

Task: {task}

Problem:
{problem?}

Material:
{solution}
)";

constexpr std::string_view kVerifierTemplate =
    R"(You verify optimization models and solver code.

{instructions?}

Candidate:
{candidate}

Reference:
{cluster_summary}

Unless instructed otherwise: decide whether the candidate follows the same formulation paradigm as one of the
reference clusters (each begins with a "### <id>" header). Reply "MATCH <id>" for the best matching cluster, or
"NO_MATCH" if none fits.
)";

constexpr std::string_view kSynthesizerTemplate =
    R"(You maintain generalized guidance for one cluster of solved optimization problems.

Current knowledge (version {version?}):
{current}

New instance knowledge:
{batch}

Merge the new items into the current knowledge. Abstract recurring patterns into general, non-redundant items.
Keep every specific pitfall warning. Do not let a single unusual instance dominate.
Reply with the sections APPROACH:, CHECKLIST: and PITFALL:, one "- " item per line.
)";

constexpr std::string_view kSelectorTemplate =
    R"(You plan how to solve an optimization problem.

Problem:
{problem}

Candidate solution paths (modeling cluster -> coding cluster):
{paths}

Rank the paths by how well their modeling logic and coding strategy fit the problem.
Reply with one line "RANK: i,j,..." listing the best {count} path indices, best first.
)";

constexpr std::string_view kGeneratorTemplate =
    R"(You are an operations research expert who formulates optimization problems and writes solver code.

{instructions}

Problem:
{problem}

Guidance:
{guidance?}

{context?}
)";

constexpr std::string_view kFixerTemplate =
    R"(You repair solver scripts that failed to run.

Script:
```python
{code}
```

Error:
{error}

Known pitfalls for this kind of code:
{pitfall}

Checklist:
{checklist}

Analyse the error against the pitfalls, fix the script and keep the answer block format unchanged.
Reply with the complete fixed script in one ```python fenced block.
)";

std::size_t role_index(LlmRole role) {
    return static_cast<std::size_t>(role);
}

} // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
    for (const auto& slot : find_slots(text_)) {
        if (!slot.optional && std::find(required_.begin(), required_.end(), slot.name) == required_.end()) {
            required_.push_back(slot.name);
        }
    }
}

std::string PromptTemplate::render(const Slots& slots) const {
    std::string out;
    std::size_t pos = 0;
    for (const auto& slot : find_slots(text_)) {
        out.append(text_, pos, slot.begin - pos);
        auto it = slots.find(slot.name);
        if (it != slots.end()) {
            out += it->second;
        } else if (!slot.optional) {
            throw InputError("prompt slot '" + slot.name + "' is missing");
        }
        pos = slot.end;
    }
    out.append(text_, pos, std::string::npos);
    return out;
}

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.templates_[role_index(LlmRole::extractor)] = PromptTemplate(std::string(kExtractorTemplate));
    t.templates_[role_index(LlmRole::verifier)] = PromptTemplate(std::string(kVerifierTemplate));
    t.templates_[role_index(LlmRole::synthesizer)] = PromptTemplate(std::string(kSynthesizerTemplate));
    t.templates_[role_index(LlmRole::selector)] = PromptTemplate(std::string(kSelectorTemplate));
    t.templates_[role_index(LlmRole::generator)] = PromptTemplate(std::string(kGeneratorTemplate));
    t.templates_[role_index(LlmRole::fixer)] = PromptTemplate(std::string(kFixerTemplate));
    return t;
}

PromptTemplates PromptTemplates::with_overrides(const std::filesystem::path& dir) {
    auto t = defaults();
    for (auto role : all_roles) {
        const auto path = dir / (std::string(to_string(role)) + ".txt");
        std::ifstream in(path);
        if (!in) continue;
        std::stringstream buffer;
        buffer << in.rdbuf();
        t.templates_[role_index(role)] = PromptTemplate(buffer.str());
    }
    return t;
}

const PromptTemplate& PromptTemplates::get(LlmRole role) const {
    return templates_[role_index(role)];
}

TokenBucket::TokenBucket(double rate_per_second, int burst)
    : rate_(rate_per_second), capacity_(std::max(1, burst)), tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait = (1.0 - tokens_) / rate_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        lock.lock();
    }
}

Gateway::Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder,
                 PromptTemplates templates, std::size_t dim, double rate_per_second, int burst)
    : chat_(std::move(chat)), embedder_(std::move(embedder)), templates_(std::move(templates)), dim_(dim),
      bucket_(std::make_unique<TokenBucket>(rate_per_second, burst)) {}

std::string Gateway::chat(LlmRole role, const Slots& slots, CallLog* log) const {
    return chat_once(role, slots, 0, log);
}

std::string Gateway::chat_once(LlmRole role, const Slots& slots, int attempt, CallLog* log) const {
    std::string prompt = templates_.get(role).render(slots);
    if (attempt > 0) prompt += kReformatReminder;
    bucket_->acquire();
    ChatRequest request{role, slots, prompt, attempt};
    std::string response = chat_->complete(request);
    if (log) log->record({role, prompt, response, attempt > 0});
    if (trim(response).empty()) {
        throw ProviderError("empty completion for role " + std::string(to_string(role)));
    }
    return response;
}

Embedding Gateway::embed(std::string_view text) const {
    if (trim(text).empty()) throw InputError("cannot embed empty text");
    bucket_->acquire();
    auto values = embedder_->embed(text);
    if (values.size() != dim_) {
        throw DimensionMismatch("embedding backend returned dim " + std::to_string(values.size()) +
                                ", store dim is " + std::to_string(dim_));
    }
    return Embedding::unit(std::move(values));
}

} // namespace dcm
