#pragma once
// Deterministic scripted provider. Each prompt family has a fixed response
// rule computed from the structured request variables, so the whole pipeline
// is bit-reproducible without any model. Rules can be overridden per family
// to script custom behaviors in experiments and tests.

#include "hiermem/gateway.hpp"
#include "hiermem/text.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

namespace hiermem {

struct StubConfig {
    // Minimum keyword overlap between a turn and a candidate event summary
    // for the stub to affiliate the turn to that event.
    int affiliation_theta = 1;
    // Summary of a refreshed event: the N most frequent content tokens.
    size_t summary_tokens = 4;
    // Fact line for a turn: its first N content tokens.
    size_t fact_tokens = 4;
};

class ScriptedStubProvider : public Provider {
public:
    using Rule = std::function<json(const StructuredRequest&)>;

    explicit ScriptedStubProvider(StubConfig config = {}) : config_(config) {}

    std::string name() const override { return "stub"; }

    void set_rule(PromptFamily family, Rule rule) { rules_[family] = std::move(rule); }

    ProviderResponse complete(const StructuredRequest& request) override {
        json out;
        auto it = rules_.find(request.family);
        if (it != rules_.end()) {
            out = it->second(request);
        } else {
            out = default_rule(request);
        }
        ProviderResponse resp;
        resp.text = out.dump();
        resp.usage.prompt_tokens = approx_token_count(request.rendered_prompt);
        resp.usage.completion_tokens = approx_token_count(resp.text);
        return resp;
    }

private:
    json default_rule(const StructuredRequest& request) const {
        const json& vars = request.variables;
        switch (request.family) {
            case PromptFamily::TurnAnalysis: {
                const std::string text = vars.value("text", "");
                std::vector<std::string> keywords = content_tokens(text);
                if (keywords.empty()) keywords = tokenize(text);
                if (keywords.empty()) keywords = {"turn"};
                json tags = json::array();
                const std::string speaker = vars.value("speaker", "");
                if (!speaker.empty()) {
                    tags.push_back(join(tokenize(speaker), " "));
                }
                std::string context = text.substr(0, 80);
                return json{{"keywords", keywords},
                            {"tags", tags},
                            {"timestamp", vars.value("timestamp", "")},
                            {"context", context}};
            }
            case PromptFamily::EventAffiliation: {
                std::unordered_set<std::string> turn_kw;
                for (const auto& k : vars.value("keywords", json::array())) {
                    turn_kw.insert(k.get<std::string>());
                }
                json ids = json::array();
                for (const auto& cand : vars.value("candidate_events", json::array())) {
                    const auto summary_tokens = tokenize(cand.value("summary", ""));
                    std::unordered_set<std::string> seen;
                    int overlap = 0;
                    for (const auto& tok : summary_tokens) {
                        if (turn_kw.count(tok) && seen.insert(tok).second) ++overlap;
                    }
                    if (overlap >= config_.affiliation_theta) {
                        ids.push_back(cand.at("event_id").get<std::int64_t>());
                    }
                }
                return json{{"event_ids", ids}, {"new_event", ids.empty()}};
            }
            case PromptFamily::QueryKeywords: {
                const std::string q = vars.value("question", "");
                std::vector<std::string> keywords = content_tokens(q);
                if (keywords.empty()) keywords = tokenize(q);
                if (keywords.empty()) keywords = {"question"};
                return json{{"keywords", keywords}};
            }
            case PromptFamily::EventLocalSelection: {
                const auto keywords = query_keywords(vars);
                json ids = json::array();
                for (const auto& t : vars.value("turn_list", json::array())) {
                    if (bears_any(t.value("text", ""), keywords)) {
                        ids.push_back(t.at("turn_id").get<std::int64_t>());
                    }
                }
                return json{{"turn_ids", ids}};
            }
            case PromptFamily::EvidenceFilter: {
                const auto keywords = query_keywords(vars);
                json ids = json::array();
                for (const auto& t : vars.value("candidate_turns", json::array())) {
                    if (bears_any(t.value("text", ""), keywords)) {
                        ids.push_back(t.at("turn_id").get<std::int64_t>());
                    }
                }
                return json{{"turn_ids", ids}};
            }
            case PromptFamily::EventFullRefresh: {
                // Summary: most frequent content tokens across member turns,
                // ties resolved by first occurrence.
                std::vector<std::string> order;
                std::map<std::string, int> counts;
                json facts = json::array();
                for (const auto& t : vars.value("turn_list", json::array())) {
                    const std::string text = t.value("text", "");
                    for (const auto& tok : tokenize(text)) {
                        if (is_stopword(tok)) continue;
                        if (counts.find(tok) == counts.end()) order.push_back(tok);
                        counts[tok]++;
                    }
                    facts.push_back(json{{"turn_id", t.at("turn_id").get<std::int64_t>()},
                                         {"fact", fact_line(text)},
                                         {"timestamp", t.value("timestamp", "")}});
                }
                std::vector<std::string> ranked = order;
                std::stable_sort(ranked.begin(), ranked.end(),
                                 [&](const std::string& a, const std::string& b) {
                                     return counts[a] > counts[b];
                                 });
                if (ranked.size() > config_.summary_tokens) {
                    ranked.resize(config_.summary_tokens);
                }
                std::string summary = join(ranked, " ");
                if (summary.empty()) summary = "event";
                return json{{"summary", summary}, {"facts", facts}};
            }
            case PromptFamily::EventAppend: {
                return json{{"fact", fact_line(vars.value("text", ""))},
                            {"timestamp", vars.value("timestamp", "")}};
            }
            case PromptFamily::FinalQA: {
                const auto evidence = vars.value("evidence_turns", json::array());
                if (request.category == Category::Adversarial) {
                    const std::string distractor = vars.value("distractor", "");
                    const auto cand_tokens = content_tokens(distractor);
                    for (const auto& t : evidence) {
                        if (!cand_tokens.empty() && bears_all(t.value("text", ""), cand_tokens)) {
                            return json{{"answer", distractor}};
                        }
                    }
                    return json{{"answer", "Not mentioned in the conversation"}};
                }
                // Echo the span most likely to bear the answer: the evidence
                // turn with the highest query-keyword overlap, earliest on ties.
                if (!evidence.empty()) {
                    const auto keywords = query_keywords(vars);
                    size_t best = 0;
                    int best_overlap = -1;
                    for (size_t i = 0; i < evidence.size(); ++i) {
                        const int overlap =
                            keyword_overlap(evidence[i].value("text", ""), keywords);
                        if (overlap > best_overlap) {
                            best_overlap = overlap;
                            best = i;
                        }
                    }
                    return json{{"answer", evidence[best].value("text", "")}};
                }
                return json{{"answer", "unknown"}};
            }
        }
        throw UnknownFamilyError("stub has no rule for this family");
    }

    static std::vector<std::string> query_keywords(const json& vars) {
        std::vector<std::string> keywords = content_tokens(vars.value("question", ""));
        if (keywords.empty()) keywords = tokenize(vars.value("question", ""));
        return keywords;
    }

    static bool bears_any(const std::string& text, const std::vector<std::string>& keywords) {
        const auto tokens = tokenize(text);
        const std::unordered_set<std::string> set(tokens.begin(), tokens.end());
        for (const auto& k : keywords) {
            if (set.count(k)) return true;
        }
        return false;
    }

    static int keyword_overlap(const std::string& text, const std::vector<std::string>& keywords) {
        const auto tokens = tokenize(text);
        const std::unordered_set<std::string> set(tokens.begin(), tokens.end());
        int overlap = 0;
        for (const auto& k : keywords) {
            if (set.count(k)) ++overlap;
        }
        return overlap;
    }

    static bool bears_all(const std::string& text, const std::vector<std::string>& keywords) {
        const auto tokens = tokenize(text);
        const std::unordered_set<std::string> set(tokens.begin(), tokens.end());
        for (const auto& k : keywords) {
            if (!set.count(k)) return false;
        }
        return true;
    }

    std::string fact_line(const std::string& text) const {
        std::vector<std::string> tokens = content_tokens(text);
        if (tokens.size() > config_.fact_tokens) tokens.resize(config_.fact_tokens);
        std::string fact = join(tokens, " ");
        if (fact.empty()) fact = text.substr(0, 40);
        if (fact.empty()) fact = "turn";
        return fact;
    }

    StubConfig config_;
    std::map<PromptFamily, Rule> rules_;
};

} // namespace hiermem
