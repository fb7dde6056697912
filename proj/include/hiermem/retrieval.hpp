#pragma once
// LLM-guided retrieval: query keyword extraction, dual-layer semantic
// retrieval, event-anchored turn prediction, candidate merge and evidence
// filtering, plus category-aware answer generation. Retrieval is read-only
// on the store; any number of questions may run concurrently against a
// frozen store.
//
// Structural guarantees, checked again by the benchmark on every question:
//   final evidence ⊆ candidates = semantic ∪ predicted, and every predicted
//   turn belongs to the link set of a retrieved event.

#include "hiermem/gateway.hpp"
#include "hiermem/ingestion.hpp"
#include "hiermem/memory_store.hpp"
#include "hiermem/text.hpp"
#include "hiermem/types.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hiermem {

// Hierarchical is the full pipeline. FlatFiltered drops the event layer and
// filters a wide flat cut (the flat top-N + filter baseline). SingleLayer is
// the passive paradigm: top-k turn-layer cosine hits become the evidence
// directly, with no LLM involvement in retrieval.
enum class RetrievalMode { Hierarchical, FlatFiltered, SingleLayer };

inline const char* retrieval_mode_name(RetrievalMode m) {
    switch (m) {
        case RetrievalMode::Hierarchical: return "full";
        case RetrievalMode::FlatFiltered: return "flat";
        case RetrievalMode::SingleLayer: return "no-hierarchy";
    }
    return "unknown";
}

struct RetrievalConfig {
    size_t k_turn = 10;
    size_t k_event = 10;
    RetrievalMode mode = RetrievalMode::Hierarchical;
    size_t flat_top_n = 100;       // flat baseline cut size
    size_t predict_batch_size = 25; // linked turns per prediction prompt
};

enum class Provenance { Semantic, Predicted, Both };

inline const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Semantic: return "semantic";
        case Provenance::Predicted: return "predicted";
        case Provenance::Both: return "both";
    }
    return "unknown";
}

struct EvidenceItem {
    TurnNode turn;
    Provenance provenance = Provenance::Semantic;
};

// Final evidence handed to answer generation: duplicate-free, chronological
// by turn id.
struct EvidenceSet {
    std::vector<EvidenceItem> items;

    std::vector<TurnId> ids() const {
        std::vector<TurnId> out;
        out.reserve(items.size());
        for (const auto& item : items) out.push_back(item.turn.turn_id);
        return out;
    }
    size_t size() const { return items.size(); }
    bool contains(TurnId id) const {
        return std::any_of(items.begin(), items.end(),
                           [&](const EvidenceItem& e) { return e.turn.turn_id == id; });
    }
};

struct RetrievalResult {
    std::vector<std::string> keywords;
    std::vector<ScoredId> semantic_turns;  // <= k_turn, descending score
    std::vector<ScoredId> semantic_events; // <= k_event, descending score
    std::vector<TurnId> predicted;         // union over retrieved events, sorted
    EvidenceSet candidates;                // semantic ∪ predicted, chronological
    EvidenceSet final_evidence;            // after filtering
};

class RetrievalEngine {
public:
    RetrievalEngine(const MemoryStore& store, LlmGateway& gateway, RetrievalConfig config = {},
                    LogSink log = {})
        : store_(store), gateway_(gateway), config_(config), log_(std::move(log)) {}

    const RetrievalConfig& config() const { return config_; }

    // Query keywords via the LLM; provider failure falls back to the
    // question's own content tokens so a question is never lost.
    std::vector<std::string> extract_keywords(const std::string& question) {
        try {
            const json out =
                gateway_.complete_structured(PromptFamily::QueryKeywords, {}, {{"question", question}});
            std::vector<std::string> keywords;
            for (const auto& k : out.at("keywords")) keywords.push_back(k.get<std::string>());
            if (!keywords.empty()) return keywords;
        } catch (const Error& err) {
            log("keyword extraction failed (" + std::string(err.what()) +
                "); falling back to question tokens");
        }
        std::vector<std::string> fallback = content_tokens(question);
        if (fallback.empty()) fallback = tokenize(question);
        if (fallback.empty()) fallback = {"question"};
        return fallback;
    }

    // Dual-layer retrieval over the encoded keyword string.
    std::pair<std::vector<ScoredId>, std::vector<ScoredId>> semantic_retrieve(
        const std::vector<std::string>& keywords) const {
        const Vec query = store_.encoder()->encode(join(keywords, " "));
        std::vector<ScoredId> turns, events;
        if (store_.index().size(Layer::Turn) > 0) {
            turns = store_.index().top_k(query, Layer::Turn, config_.k_turn);
        }
        if (store_.index().size(Layer::Event) > 0) {
            events = store_.index().top_k(query, Layer::Event, config_.k_event);
        }
        return {std::move(turns), std::move(events)};
    }

    // Event-anchored prediction: the model sees the event summary and its
    // linked turns and selects the ones worth reading. Returned ids are
    // restricted to the event's link set; provider failure yields an empty
    // subset for that event.
    std::vector<TurnId> predict(const std::string& question, EventId event_id) {
        const EventNode& event = store_.event(event_id);
        const std::vector<TurnNode> linked = store_.linked_turns(event_id);
        std::vector<TurnId> selected;

        for (size_t start = 0; start < linked.size(); start += config_.predict_batch_size) {
            const size_t end = std::min(start + config_.predict_batch_size, linked.size());
            json list = json::array();
            std::string text;
            for (size_t i = start; i < end; ++i) {
                const TurnNode& t = linked[i];
                list.push_back(json{{"turn_id", t.turn_id},
                                    {"timestamp", t.timestamp},
                                    {"speaker", t.speaker},
                                    {"text", t.text}});
                text += IngestionEngine::format_turn_line(t.turn_id, t.timestamp, t.speaker, t.text);
                text += "\n";
            }
            json vars{{"question", question}, {"summary", event.summary},
                      {"turns", text},       {"event_id", event_id},
                      {"turn_list", list}};
            json out;
            try {
                out = gateway_.complete_structured(PromptFamily::EventLocalSelection, {}, vars);
            } catch (const Error& err) {
                log("prediction failed for event " + std::to_string(event_id) + " (" +
                    err.what() + "); skipping");
                continue;
            }
            for (const auto& idj : out.at("turn_ids")) {
                const TurnId id = idj.get<TurnId>();
                if (!event.linked(id)) {
                    log("prediction returned turn " + std::to_string(id) +
                        " outside event " + std::to_string(event_id) + "; dropped");
                    continue;
                }
                if (std::find(selected.begin(), selected.end(), id) == selected.end()) {
                    selected.push_back(id);
                }
            }
        }
        return selected;
    }

    // Set union keyed by turn id, chronological order, provenance "both" on
    // overlap.
    EvidenceSet merge(const std::vector<TurnId>& semantic,
                      const std::vector<TurnId>& predicted) const {
        std::map<TurnId, Provenance> merged;
        for (TurnId id : semantic) merged.emplace(id, Provenance::Semantic);
        for (TurnId id : predicted) {
            auto [it, inserted] = merged.emplace(id, Provenance::Predicted);
            if (!inserted) it->second = Provenance::Both;
        }
        EvidenceSet out;
        for (const auto& [id, prov] : merged) {
            out.items.push_back({store_.turn(id), prov});
        }
        return out;
    }

    // Evidence filtering; the result is always a subset of the candidates.
    // On provider failure the evidence degrades to the semantic turns alone.
    EvidenceSet filter(const std::string& question, const EvidenceSet& candidates) {
        if (candidates.items.empty()) return {};
        json list = json::array();
        std::string text;
        for (const auto& item : candidates.items) {
            const TurnNode& t = item.turn;
            list.push_back(json{{"turn_id", t.turn_id},
                                {"timestamp", t.timestamp},
                                {"speaker", t.speaker},
                                {"text", t.text}});
            text += IngestionEngine::format_turn_line(t.turn_id, t.timestamp, t.speaker, t.text);
            text += "\n";
        }
        json vars{{"question", question}, {"candidates", text}, {"candidate_turns", list}};
        json out;
        try {
            out = gateway_.complete_structured(PromptFamily::EvidenceFilter, {}, vars);
        } catch (const Error& err) {
            log("evidence filtering failed (" + std::string(err.what()) +
                "); falling back to semantic turns");
            EvidenceSet fallback;
            for (const auto& item : candidates.items) {
                if (item.provenance != Provenance::Predicted) fallback.items.push_back(item);
            }
            return fallback;
        }
        std::set<TurnId> keep;
        for (const auto& idj : out.at("turn_ids")) {
            const TurnId id = idj.get<TurnId>();
            if (candidates.contains(id)) {
                keep.insert(id);
            } else {
                log("filter returned turn " + std::to_string(id) + " outside candidates; dropped");
            }
        }
        EvidenceSet final_set;
        for (const auto& item : candidates.items) {
            if (keep.count(item.turn.turn_id)) final_set.items.push_back(item);
        }
        return final_set;
    }

    // Category-specific answer over chronologically ordered evidence.
    // Adversarial questions require the distractor candidate; gateway
    // failures surface to the caller rather than fabricating an answer.
    std::string answer(const std::string& question, const EvidenceSet& evidence,
                       Category category, const std::optional<std::string>& distractor = {}) {
        if (category == Category::Adversarial && !distractor) {
            throw Error("adversarial questions require a distractor candidate");
        }
        json list = json::array();
        std::string text;
        for (const auto& item : evidence.items) {
            const TurnNode& t = item.turn;
            list.push_back(json{{"turn_id", t.turn_id},
                                {"timestamp", t.timestamp},
                                {"speaker", t.speaker},
                                {"text", t.text}});
            text += IngestionEngine::format_turn_line(t.turn_id, t.timestamp, t.speaker, t.text);
            text += "\n";
        }
        json vars{{"question", question}, {"evidence", text}, {"evidence_turns", list}};
        if (distractor) vars["distractor"] = *distractor;
        const json out = gateway_.complete_structured(PromptFamily::FinalQA, category, vars);
        return out.at("answer").get<std::string>();
    }

    // Turn-layer ranking for the flat paradigm: raw question embedding,
    // descending cosine. Also feeds fixed-K truncation experiments.
    std::vector<ScoredId> flat_ranked(const std::string& question, size_t n) const {
        if (store_.index().size(Layer::Turn) == 0) return {};
        const Vec query = store_.encoder()->encode(question);
        return store_.index().top_k(query, Layer::Turn, n);
    }

    // Mode-dispatched retrieval for a question.
    RetrievalResult retrieve(const std::string& question) {
        switch (config_.mode) {
            case RetrievalMode::Hierarchical: return retrieve_hierarchical(question);
            case RetrievalMode::FlatFiltered: return retrieve_flat(question);
            case RetrievalMode::SingleLayer: return retrieve_single_layer(question);
        }
        throw Error("unknown retrieval mode");
    }

    RetrievalResult retrieve_hierarchical(const std::string& question) {
        RetrievalResult r;
        r.keywords = extract_keywords(question);
        std::tie(r.semantic_turns, r.semantic_events) = semantic_retrieve(r.keywords);

        std::set<TurnId> predicted;
        for (const auto& ev : r.semantic_events) {
            for (TurnId id : predict(question, ev.id)) predicted.insert(id);
        }
        r.predicted.assign(predicted.begin(), predicted.end());

        std::vector<TurnId> semantic_ids;
        for (const auto& s : r.semantic_turns) semantic_ids.push_back(s.id);
        r.candidates = merge(semantic_ids, r.predicted);
        r.final_evidence = filter(question, r.candidates);
        return r;
    }

    // Flat ablation: wide flat cut, then the same evidence filtering, with no
    // event consultation.
    RetrievalResult retrieve_flat(const std::string& question) {
        RetrievalResult r;
        const std::vector<ScoredId> ranked = flat_ranked(question, config_.flat_top_n);
        std::vector<TurnId> ids;
        for (const auto& s : ranked) ids.push_back(s.id);
        r.semantic_turns = ranked;
        r.candidates = merge(ids, {});
        r.final_evidence = filter(question, r.candidates);
        return r;
    }

    // Passive single-layer paradigm: the top-k turn hits are the evidence.
    RetrievalResult retrieve_single_layer(const std::string& question) {
        RetrievalResult r;
        const std::vector<ScoredId> ranked = flat_ranked(question, config_.k_turn);
        std::vector<TurnId> ids;
        for (const auto& s : ranked) ids.push_back(s.id);
        r.semantic_turns = ranked;
        r.candidates = merge(ids, {});
        r.final_evidence = r.candidates;
        return r;
    }

private:
    void log(const std::string& line) {
        if (log_) log_(line);
    }

    const MemoryStore& store_;
    LlmGateway& gateway_;
    RetrievalConfig config_;
    LogSink log_;
};

} // namespace hiermem
