#pragma once
// Uniform entry point for every LLM call: renders the family template,
// dispatches to a provider, validates the structured output against the
// family schema with bounded retries, and books token usage per stage.
// No caller ever sees an unvalidated provider output.

#include "hiermem/errors.hpp"
#include "hiermem/prompts.hpp"
#include "hiermem/text.hpp"
#include "hiermem/types.hpp"

#include <atomic>
#include <array>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hiermem {

using json = nlohmann::json;

struct TokenUsage {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
};

struct StageTotals {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::uint64_t call_count = 0;
};

// Monotonic per-stage token counters. Accumulation is atomic so concurrent
// retrieval readers can share one ledger.
class UsageLedger {
public:
    void record(Stage stage, const TokenUsage& usage) {
        auto& c = counters_[static_cast<size_t>(stage)];
        c.prompt.fetch_add(usage.prompt_tokens, std::memory_order_relaxed);
        c.completion.fetch_add(usage.completion_tokens, std::memory_order_relaxed);
        c.calls.fetch_add(1, std::memory_order_relaxed);
    }

    StageTotals totals(Stage stage) const {
        const auto& c = counters_[static_cast<size_t>(stage)];
        return {c.prompt.load(), c.completion.load(), c.calls.load()};
    }

    StageTotals grand_total() const {
        StageTotals t;
        for (Stage s : {Stage::MemoryConstruction, Stage::Retrieval, Stage::Answer}) {
            const StageTotals st = totals(s);
            t.prompt_tokens += st.prompt_tokens;
            t.completion_tokens += st.completion_tokens;
            t.call_count += st.call_count;
        }
        return t;
    }

private:
    struct Cell {
        std::atomic<std::uint64_t> prompt{0};
        std::atomic<std::uint64_t> completion{0};
        std::atomic<std::uint64_t> calls{0};
    };
    std::array<Cell, 3> counters_;
};

// Price per 10^6 tokens, input and output separately.
struct ModelPrice {
    double input_per_million = 0.0;
    double output_per_million = 0.0;
};

// Pricing is configuration: a model table plus a stage -> model assignment.
// The hybrid deployment of interest assigns a light model to memory
// construction and retrieval and an expensive one to answering.
struct PricingTable {
    std::map<std::string, ModelPrice> models;
    std::map<Stage, std::string> assignment;

    static PricingTable hybrid_default() {
        PricingTable p;
        p.models["light"] = {0.15, 0.60};
        p.models["answer"] = {1.25, 10.0};
        p.assignment[Stage::MemoryConstruction] = "light";
        p.assignment[Stage::Retrieval] = "light";
        p.assignment[Stage::Answer] = "answer";
        return p;
    }

    static PricingTable from_json(const json& j) {
        PricingTable p;
        for (auto it = j.at("models").begin(); it != j.at("models").end(); ++it) {
            p.models[it.key()] = {it.value().at("input_per_million").get<double>(),
                                  it.value().at("output_per_million").get<double>()};
        }
        const auto& a = j.at("assignment");
        p.assignment[Stage::MemoryConstruction] = a.at("memory_construction").get<std::string>();
        p.assignment[Stage::Retrieval] = a.at("retrieval").get<std::string>();
        p.assignment[Stage::Answer] = a.at("answer").get<std::string>();
        return p;
    }
};

struct CostLine {
    std::string model;
    std::vector<std::string> stages;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    double cost = 0.0;
};

struct CostReport {
    std::vector<CostLine> lines; // one per model, stage-grouped
    double total_cost = 0.0;
};

inline double token_cost(std::uint64_t prompt_tokens, std::uint64_t completion_tokens,
                         const ModelPrice& price) {
    return (static_cast<double>(prompt_tokens) * price.input_per_million +
            static_cast<double>(completion_tokens) * price.output_per_million) /
           1e6;
}

inline CostReport cost_report(const UsageLedger& ledger, const PricingTable& pricing) {
    CostReport report;
    for (const auto& [model, price] : pricing.models) {
        CostLine line;
        line.model = model;
        for (Stage s : {Stage::MemoryConstruction, Stage::Retrieval, Stage::Answer}) {
            auto it = pricing.assignment.find(s);
            if (it == pricing.assignment.end() || it->second != model) continue;
            const StageTotals t = ledger.totals(s);
            line.stages.push_back(stage_name(s));
            line.prompt_tokens += t.prompt_tokens;
            line.completion_tokens += t.completion_tokens;
        }
        if (line.stages.empty()) continue;
        line.cost = token_cost(line.prompt_tokens, line.completion_tokens, price);
        report.lines.push_back(std::move(line));
        report.total_cost += report.lines.back().cost;
    }
    return report;
}

struct StructuredRequest {
    PromptFamily family = PromptFamily::TurnAnalysis;
    std::optional<Category> category;
    std::string rendered_prompt;
    json variables; // structured view of the template variables
};

struct ProviderResponse {
    std::string text;
    TokenUsage usage;
};

class Provider {
public:
    virtual ~Provider() = default;
    virtual ProviderResponse complete(const StructuredRequest& request) = 0;
    virtual std::string name() const = 0;
};

struct CallRecord {
    PromptFamily family = PromptFamily::TurnAnalysis;
    std::optional<Category> category;
    Stage stage = Stage::Retrieval;
    TokenUsage usage;
    std::uint32_t attempt = 0; // 0-based attempt index of this provider call
    bool ok = false;           // parsed and validated
};

struct GatewayConfig {
    std::uint32_t retry_limit = 2; // retries after the first attempt
};

namespace schema_detail {

inline bool is_string_array(const json& j, bool require_nonempty_items = false) {
    if (!j.is_array()) return false;
    for (const auto& item : j) {
        if (!item.is_string()) return false;
        if (require_nonempty_items && item.get<std::string>().empty()) return false;
    }
    return true;
}

inline bool is_int_array(const json& j) {
    if (!j.is_array()) return false;
    for (const auto& item : j) {
        if (!item.is_number_integer()) return false;
    }
    return true;
}

} // namespace schema_detail

// Family output schemas. Returns an error description or empty on success.
inline std::string validate_response(PromptFamily family, const json& j) {
    using namespace schema_detail;
    if (!j.is_object()) return "response is not a JSON object";
    switch (family) {
        case PromptFamily::TurnAnalysis:
            if (!j.contains("keywords") || !is_string_array(j["keywords"], true) ||
                j["keywords"].empty()) {
                return "turn_analysis needs a non-empty keywords list";
            }
            if (j.contains("tags") && !is_string_array(j["tags"])) return "tags must be strings";
            if (j.contains("context") && !j["context"].is_string()) return "context must be text";
            if (j.contains("timestamp") && !j["timestamp"].is_string()) {
                return "timestamp must be text";
            }
            return {};
        case PromptFamily::EventAffiliation:
            if (!j.contains("event_ids") || !is_int_array(j["event_ids"])) {
                return "event_affiliation needs event_ids";
            }
            if (!j.contains("new_event") || !j["new_event"].is_boolean()) {
                return "event_affiliation needs new_event flag";
            }
            return {};
        case PromptFamily::QueryKeywords:
            if (!j.contains("keywords") || !is_string_array(j["keywords"], true) ||
                j["keywords"].empty()) {
                return "query_keywords needs a non-empty keywords list";
            }
            return {};
        case PromptFamily::EventLocalSelection:
        case PromptFamily::EvidenceFilter:
            if (!j.contains("turn_ids") || !is_int_array(j["turn_ids"])) {
                return "selection needs turn_ids";
            }
            return {};
        case PromptFamily::EventFullRefresh: {
            if (!j.contains("summary") || !j["summary"].is_string() ||
                j["summary"].get<std::string>().empty()) {
                return "refresh needs a non-empty summary";
            }
            if (!j.contains("facts") || !j["facts"].is_array()) return "refresh needs facts";
            for (const auto& f : j["facts"]) {
                if (!f.is_object() || !f.contains("turn_id") ||
                    !f["turn_id"].is_number_integer() || !f.contains("fact") ||
                    !f["fact"].is_string() || f["fact"].get<std::string>().empty()) {
                    return "each fact needs turn_id and non-empty fact";
                }
            }
            return {};
        }
        case PromptFamily::EventAppend:
            if (!j.contains("fact") || !j["fact"].is_string() ||
                j["fact"].get<std::string>().empty()) {
                return "append needs a non-empty fact";
            }
            return {};
        case PromptFamily::FinalQA:
            if (!j.contains("answer") || !j["answer"].is_string()) return "qa needs answer text";
            return {};
    }
    return "unknown family";
}

// Extract the first JSON object from provider text, tolerating code fences
// and surrounding prose.
inline std::optional<json> extract_json_object(const std::string& text) {
    const size_t start = text.find('{');
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (ch == '\\') {
                escaped = true;
            } else if (ch == '"') {
                in_string = false;
            }
            continue;
        }
        if (ch == '"') {
            in_string = true;
        } else if (ch == '{') {
            ++depth;
        } else if (ch == '}') {
            if (--depth == 0) {
                const auto parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
                if (parsed.is_discarded()) return std::nullopt;
                return parsed;
            }
        }
    }
    return std::nullopt;
}

class LlmGateway {
public:
    LlmGateway(std::shared_ptr<Provider> provider, PromptLibrary prompts,
               GatewayConfig config = {})
        : provider_(std::move(provider)), prompts_(std::move(prompts)), config_(config) {}

    // Render, call, parse, validate; retry with the same prompt on parse or
    // validation failure. Usage from every attempt lands in the ledger.
    json complete_structured(PromptFamily family, std::optional<Category> category,
                             const json& variables) {
        StructuredRequest request;
        request.family = family;
        request.category = category;
        request.variables = variables;
        request.rendered_prompt = prompts_.render(family, category, variables);
        if (request.rendered_prompt.empty()) {
            throw Error("rendered prompt is empty for " + std::string(family_name(family)));
        }

        const Stage stage = stage_for(family);
        std::string last_text;
        std::string last_error;
        for (std::uint32_t attempt = 0; attempt <= config_.retry_limit; ++attempt) {
            ProviderResponse resp = provider_->complete(request);
            ledger_.record(stage, resp.usage);

            CallRecord record;
            record.family = family;
            record.category = category;
            record.stage = stage;
            record.usage = resp.usage;
            record.attempt = attempt;

            auto parsed = extract_json_object(resp.text);
            if (parsed) {
                const std::string err = validate_response(family, *parsed);
                if (err.empty()) {
                    record.ok = true;
                    push_record(record);
                    return *parsed;
                }
                last_error = err;
            } else {
                last_error = "no JSON object in response";
            }
            last_text = resp.text;
            push_record(record);
        }
        throw SchemaError(std::string(family_name(family)) + ": output failed validation after " +
                              std::to_string(config_.retry_limit + 1) + " attempts (" +
                              last_error + ")",
                          last_text);
    }

    UsageLedger& ledger() { return ledger_; }
    const UsageLedger& ledger() const { return ledger_; }
    const PromptLibrary& prompts() const { return prompts_; }
    Provider& provider() { return *provider_; }

    std::vector<CallRecord> call_log() const {
        std::lock_guard lock(log_mutex_);
        return call_log_;
    }

    size_t call_count(PromptFamily family) const {
        std::lock_guard lock(log_mutex_);
        size_t n = 0;
        for (const auto& r : call_log_) {
            if (r.family == family) ++n;
        }
        return n;
    }

    void clear_log() {
        std::lock_guard lock(log_mutex_);
        call_log_.clear();
    }

private:
    void push_record(const CallRecord& record) {
        std::lock_guard lock(log_mutex_);
        call_log_.push_back(record);
    }

    std::shared_ptr<Provider> provider_;
    PromptLibrary prompts_;
    GatewayConfig config_;
    UsageLedger ledger_;
    mutable std::mutex log_mutex_;
    std::vector<CallRecord> call_log_;
};

} // namespace hiermem
