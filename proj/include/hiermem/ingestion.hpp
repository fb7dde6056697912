#pragma once
// Memory construction: per-turn analysis inside a sliding window, event
// affiliation against embedding-ranked candidates, adaptive event update
// (full refresh below the volume threshold, append at or above it), and
// bidirectional link maintenance. Ingestion is strictly sequential per
// conversation; distinct conversations may ingest in parallel on distinct
// stores.

#include "hiermem/gateway.hpp"
#include "hiermem/memory_store.hpp"
#include "hiermem/text.hpp"
#include "hiermem/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hiermem {

struct IngestionConfig {
    size_t window_size = 5;          // sliding window m for turn analysis
    size_t adaptive_threshold = 10;  // event volume threshold tau
    size_t candidate_events = 10;    // affiliation candidate count k_event
    int stub_keyword_theta = 1;      // keyword-overlap theta for the scripted stub
};

struct AffiliationDecision {
    std::vector<EventId> event_ids; // subset of the candidate set
    bool new_event = false;
};

using LogSink = std::function<void(const std::string&)>;

class IngestionEngine {
public:
    IngestionEngine(MemoryStore& store, LlmGateway& gateway, IngestionConfig config = {},
                    LogSink log = {})
        : store_(store), gateway_(gateway), config_(config), log_(std::move(log)) {}

    const IngestionConfig& config() const { return config_; }

    // Analyze a turn within the last <= m stored turns.
    Metadata analyze_turn(const DialogueTurn& turn, const std::vector<TurnId>& window_ids) {
        json window_lines = json::array();
        std::string window_text;
        for (TurnId id : window_ids) {
            const TurnNode& prev = store_.turn(id);
            window_text += format_turn_line(prev.turn_id, prev.timestamp, prev.speaker, prev.text);
            window_text += "\n";
            window_lines.push_back(prev.turn_id);
        }
        json vars{{"turn", format_turn_line(turn.turn_id, turn.timestamp, turn.speaker, turn.text)},
                  {"window", window_text},
                  {"window_ids", window_lines},
                  {"turn_id", turn.turn_id},
                  {"speaker", turn.speaker},
                  {"timestamp", turn.timestamp},
                  {"text", turn.text}};
        const json out = gateway_.complete_structured(PromptFamily::TurnAnalysis, {}, vars);

        Metadata meta;
        for (const auto& k : out.at("keywords")) meta.keywords.push_back(k.get<std::string>());
        if (out.contains("tags")) {
            for (const auto& t : out.at("tags")) meta.tags.push_back(t.get<std::string>());
        }
        meta.timestamp = out.value("timestamp", turn.timestamp);
        meta.context = out.value("context", "");
        return meta;
    }

    // Top-k_event most similar events to the turn embedding; empty when the
    // event layer is empty.
    std::vector<ScoredId> candidate_events(const Vec& turn_embedding) const {
        if (store_.index().size(Layer::Event) == 0) return {};
        return store_.index().top_k(turn_embedding, Layer::Event, config_.candidate_events);
    }

    // LLM affiliation decision restricted to the candidate set. Ids outside
    // the candidates are dropped and logged; an empty candidate set forces a
    // new event without a provider round-trip; provider failure falls back to
    // a new event so ingestion never wedges.
    AffiliationDecision affiliate(const TurnNode& turn, const std::vector<ScoredId>& candidates) {
        AffiliationDecision decision;
        if (candidates.empty()) {
            decision.new_event = true;
            return decision;
        }

        json cand_list = json::array();
        std::string cand_text;
        for (const auto& c : candidates) {
            const EventNode& ev = store_.event(c.id);
            cand_list.push_back(json{{"event_id", ev.event_id}, {"summary", ev.summary}});
            cand_text += "- [" + std::to_string(ev.event_id) + "] " + ev.summary + "\n";
        }
        json vars{{"turn", format_turn_line(turn.turn_id, turn.timestamp, turn.speaker, turn.text)},
                  {"candidates", cand_text},
                  {"text", turn.text},
                  {"keywords", turn.metadata.keywords},
                  {"candidate_events", cand_list}};

        json out;
        try {
            out = gateway_.complete_structured(PromptFamily::EventAffiliation, {}, vars);
        } catch (const Error& err) {
            log("affiliation failed for turn " + std::to_string(turn.turn_id) + " (" +
                err.what() + "); falling back to new event");
            decision.new_event = true;
            return decision;
        }

        for (const auto& idj : out.at("event_ids")) {
            const EventId id = idj.get<EventId>();
            const bool in_candidates =
                std::any_of(candidates.begin(), candidates.end(),
                            [&](const ScoredId& c) { return c.id == id; });
            if (!in_candidates) {
                log("affiliation returned event " + std::to_string(id) +
                    " outside the candidate set; dropped");
                continue;
            }
            if (std::find(decision.event_ids.begin(), decision.event_ids.end(), id) ==
                decision.event_ids.end()) {
                decision.event_ids.push_back(id);
            }
        }
        decision.new_event = out.at("new_event").get<bool>();
        if (decision.event_ids.empty() && !decision.new_event) {
            log("affiliation resolved to nothing for turn " + std::to_string(turn.turn_id) +
                "; forcing new event");
            decision.new_event = true;
        }
        return decision;
    }

    // Adaptive update: volume is measured before the new link is attached, so
    // the tau-th arriving turn still triggers a full refresh. A failure on
    // one event is logged and does not roll back links already committed for
    // others.
    void update_affiliated_events(const TurnNode& turn, const AffiliationDecision& decision) {
        for (EventId event_id : decision.event_ids) {
            const size_t volume_before = store_.event(event_id).volume();
            store_.attach_link(event_id, turn.turn_id);
            try {
                if (volume_before < config_.adaptive_threshold) {
                    refresh_event(event_id);
                } else {
                    append_to_event(event_id, turn);
                }
                refresh_event_embedding(event_id);
            } catch (const Error& err) {
                log("update of event " + std::to_string(event_id) + " failed: " + err.what());
            }
        }
        if (decision.new_event) {
            const EventId id = create_event_from_turn(turn);
            refresh_event_embedding(id);
        }
    }

    // Full pipeline for one dialogue turn.
    TurnId ingest(const DialogueTurn& turn) {
        const std::vector<TurnId> window = store_.recent_turns(config_.window_size);
        const Metadata metadata = analyze_turn(turn, window);

        TurnNode node;
        node.turn_id = turn.turn_id;
        node.speaker = turn.speaker;
        node.text = turn.text;
        node.timestamp = turn.timestamp;
        node.metadata = metadata;

        const Vec embedding =
            store_.index().encoder().encode(turn_embedding_text(node.text, metadata.keywords));
        const std::vector<ScoredId> candidates = candidate_events(embedding);

        store_.insert_turn(node);
        store_.index().register_vector(Layer::Turn, turn.turn_id, embedding);

        const AffiliationDecision decision = affiliate(store_.turn(turn.turn_id), candidates);
        update_affiliated_events(store_.turn(turn.turn_id), decision);
        return turn.turn_id;
    }

    // Turn-layer embedding text: the raw utterance plus its extracted keywords.
    static std::string turn_embedding_text(const std::string& text,
                                           const std::vector<std::string>& keywords) {
        std::string out = text;
        if (!keywords.empty()) {
            out += " ";
            out += join(keywords, " ");
        }
        return out;
    }

    static std::string format_turn_line(TurnId id, const std::string& timestamp,
                                        const std::string& speaker, const std::string& text) {
        return "[" + std::to_string(id) + "] (" + timestamp + ") " + speaker + ": " + text;
    }

private:
    json linked_turn_list(EventId event_id) const {
        json list = json::array();
        std::string text;
        for (const auto& t : store_.linked_turns(event_id)) {
            list.push_back(json{{"turn_id", t.turn_id},
                                {"timestamp", t.timestamp},
                                {"speaker", t.speaker},
                                {"text", t.text}});
        }
        return list;
    }

    static std::string turn_list_text(const json& list) {
        std::string out;
        for (const auto& t : list) {
            out += format_turn_line(t.at("turn_id").get<TurnId>(), t.value("timestamp", ""),
                                    t.value("speaker", ""), t.value("text", ""));
            out += "\n";
        }
        return out;
    }

    void refresh_event(EventId event_id) {
        const json list = linked_turn_list(event_id);
        json vars{{"turns", turn_list_text(list)}, {"turn_list", list}};
        const json out = gateway_.complete_structured(PromptFamily::EventFullRefresh, {}, vars);
        FullRefresh refresh;
        refresh.summary = out.at("summary").get<std::string>();
        for (const auto& f : out.at("facts")) {
            refresh.fact_sheet.push_back({f.at("turn_id").get<TurnId>(),
                                          f.at("fact").get<std::string>(),
                                          f.value("timestamp", "")});
        }
        store_.apply_event_update(event_id, refresh);
    }

    void append_to_event(EventId event_id, const TurnNode& turn) {
        const EventNode& ev = store_.event(event_id);
        json vars{{"summary", ev.summary},
                  {"turn", format_turn_line(turn.turn_id, turn.timestamp, turn.speaker, turn.text)},
                  {"turn_id", turn.turn_id},
                  {"timestamp", turn.timestamp},
                  {"text", turn.text}};
        const json out = gateway_.complete_structured(PromptFamily::EventAppend, {}, vars);
        AppendEntry entry;
        entry.entry.turn_id = turn.turn_id;
        entry.entry.fact = out.at("fact").get<std::string>();
        entry.entry.timestamp = out.value("timestamp", turn.timestamp);
        store_.apply_event_update(event_id, entry);
    }

    // Creation runs the same full-refresh call over the singleton turn so
    // every event carries a non-empty summary from the start.
    EventId create_event_from_turn(const TurnNode& turn) {
        json list = json::array();
        list.push_back(json{{"turn_id", turn.turn_id},
                            {"timestamp", turn.timestamp},
                            {"speaker", turn.speaker},
                            {"text", turn.text}});
        json vars{{"turns", turn_list_text(list)}, {"turn_list", list}};
        const json out = gateway_.complete_structured(PromptFamily::EventFullRefresh, {}, vars);
        std::vector<FactSheetEntry> facts;
        for (const auto& f : out.at("facts")) {
            facts.push_back({f.at("turn_id").get<TurnId>(), f.at("fact").get<std::string>(),
                             f.value("timestamp", "")});
        }
        return store_.create_event(out.at("summary").get<std::string>(), std::move(facts),
                                   {turn.turn_id});
    }

    void refresh_event_embedding(EventId event_id) {
        const EventNode& ev = store_.event(event_id);
        const std::string text = event_embedding_text(ev);
        if (store_.index().contains(Layer::Event, event_id)) {
            store_.index().encode_and_update(text, Layer::Event, event_id);
        } else {
            store_.index().encode_and_register(text, Layer::Event, event_id);
        }
        store_.clear_embedding_stale(event_id);
    }

    void log(const std::string& line) {
        if (log_) log_(line);
    }

    MemoryStore& store_;
    LlmGateway& gateway_;
    IngestionConfig config_;
    LogSink log_;
};

} // namespace hiermem
