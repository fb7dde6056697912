#pragma once
// Synthetic corpora for controlled experiments.
//
// The planted dataset builds G topic groups of T turns with group-exclusive
// topic/phase/aspect/detail vocabulary plus a small shared filler pool that
// round-robins across all turns. Questions target one group's aspect and one
// filler word quoted from the first gold turn, so gold evidence is decidable
// by construction while the fillers plant superficially-similar distractors
// corpus-wide.
//
// The scaling builder produces fixed-size turns (and optionally one event per
// fixed block of turns) directly, with no LLM involvement, for storage and
// vector-latency measurements.

#include "hiermem/dataset.hpp"
#include "hiermem/ingestion.hpp"
#include "hiermem/memory_store.hpp"

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace hiermem {

struct PlantedConfig {
    size_t groups = 20;
    size_t turns_per_group = 10;
    size_t phase_size = 2;          // consecutive turns sharing one aspect token
    size_t questions_per_group = 3; // drawn from distinct phases
    size_t filler_pool = 20;
    std::string conversation_id = "planted";
};

namespace synthetic_detail {

inline std::string fmt(const char* pattern, long long a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, a);
    return buf;
}
inline std::string fmt2(const char* pattern, long long a, long long b) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, a, b);
    return buf;
}

} // namespace synthetic_detail

inline std::string planted_topic_token(size_t g) {
    return synthetic_detail::fmt("topic%02lld", static_cast<long long>(g));
}
inline std::string planted_phase_token(size_t g, size_t p) {
    return synthetic_detail::fmt2("phase%02lld%lld", static_cast<long long>(g),
                                  static_cast<long long>(p));
}
inline std::string planted_aspect_token(size_t g, size_t p) {
    return synthetic_detail::fmt2("aspect%02lld%lld", static_cast<long long>(g),
                                  static_cast<long long>(p));
}
inline std::string planted_detail_token(size_t g, size_t j) {
    return synthetic_detail::fmt2("detail%02lld%lld", static_cast<long long>(g),
                                  static_cast<long long>(j));
}
inline std::string planted_filler_token(size_t f) {
    return synthetic_detail::fmt("filler%lld", static_cast<long long>(f));
}

inline ConversationDataset make_planted_dataset(const PlantedConfig& cfg = {}) {
    ConversationDataset ds;
    Conversation conv;
    conv.conversation_id = cfg.conversation_id;

    size_t global = 0;
    for (size_t g = 0; g < cfg.groups; ++g) {
        for (size_t j = 0; j < cfg.turns_per_group; ++j, ++global) {
            const size_t phase = j / cfg.phase_size;
            DialogueTurn t;
            t.turn_id = static_cast<TurnId>(global + 1);
            t.speaker = (j % 2 == 0) ? "Casey" : "Jordan";
            t.timestamp = synthetic_detail::fmt2("2023-06-%02lld %02lld:00",
                                                 static_cast<long long>(g + 1),
                                                 static_cast<long long>(8 + j));
            const std::string f1 = planted_filler_token((2 * global) % cfg.filler_pool);
            const std::string f2 = planted_filler_token((2 * global + 1) % cfg.filler_pool);
            t.text = "the " + planted_topic_token(g) + " " + planted_phase_token(g, phase) + " " +
                     planted_aspect_token(g, phase) + " " + planted_detail_token(g, j) +
                     " was about " + f1 + " and " + f2;
            conv.turns.push_back(std::move(t));
        }
    }
    ds.conversations.push_back(std::move(conv));

    const Category cycle[3] = {Category::SingleHop, Category::MultiHop, Category::OpenDomain};
    size_t qn = 0;
    for (size_t g = 0; g < cfg.groups; ++g) {
        for (size_t k = 0; k < cfg.questions_per_group; ++k, ++qn) {
            // distinct phases per group: 0, 2, 4, ...
            const size_t phase = (2 * k) % (cfg.turns_per_group / cfg.phase_size);
            const size_t first = g * cfg.turns_per_group + phase * cfg.phase_size;
            Question q;
            q.question_id = synthetic_detail::fmt("q%03lld", static_cast<long long>(qn + 1));
            q.conversation_id = cfg.conversation_id;
            q.category = cycle[k % 3];
            const std::string aspect = planted_aspect_token(g, phase);
            const std::string filler = planted_filler_token((2 * first) % cfg.filler_pool);
            q.question = "What was " + aspect + " and " + filler + " in the " +
                         planted_phase_token(g, phase) + " about " +
                         planted_detail_token(g, phase * cfg.phase_size) + "?";
            q.gold_answer = planted_topic_token(g) + " " + planted_phase_token(g, phase) + " " +
                            aspect + " " + planted_detail_token(g, phase * cfg.phase_size);
            for (size_t i = 0; i < cfg.phase_size; ++i) {
                q.gold_evidence.push_back(static_cast<TurnId>(first + i + 1));
            }
            ds.questions.push_back(std::move(q));
        }
    }
    validate_dataset(ds);
    return ds;
}

// 2*tau turns that all share dominant vocabulary, so stub affiliation with
// theta=1 funnels every turn into one event. Used to probe the adaptive
// update boundary.
inline std::vector<DialogueTurn> make_forced_event_turns(size_t count) {
    std::vector<DialogueTurn> turns;
    for (size_t i = 0; i < count; ++i) {
        DialogueTurn t;
        t.turn_id = static_cast<TurnId>(i + 1);
        t.speaker = (i % 2 == 0) ? "Casey" : "Jordan";
        t.timestamp = synthetic_detail::fmt("2023-07-01 %02lld:00", static_cast<long long>(i % 24));
        t.text = "the projectalpha sync covered milestone " +
                 synthetic_detail::fmt("step%02lld", static_cast<long long>(i));
        turns.push_back(std::move(t));
    }
    return turns;
}

// --- scaling corpus ---

struct ScalingCorpusConfig {
    size_t turns_per_event = 100;
    bool hierarchical = true; // false builds a turns-only store
};

inline std::string scaling_turn_text(size_t t) {
    using synthetic_detail::fmt;
    return fmt("turn%08lld", static_cast<long long>(t)) + " " +
           fmt("block%06lld", static_cast<long long>(t / 100)) + " " +
           fmt("note%06lld", static_cast<long long>(t % 1000000)) + " " +
           fmt("item%06lld", static_cast<long long>((t * 7) % 1000000)) + " " +
           fmt("mark%06lld", static_cast<long long>((t * 13) % 1000000));
}

// Build a store of N fixed-size synthetic turns directly (no gateway). Every
// turn serializes to the same byte count, so snapshot size is linear in N by
// construction and any deviation is the store's own overhead.
inline MemoryStore build_scaling_store(size_t n, std::shared_ptr<const Encoder> encoder,
                                       const ScalingCorpusConfig& cfg = {}) {
    MemoryStore store(std::move(encoder));
    for (size_t t = 0; t < n; ++t) {
        TurnNode node;
        node.turn_id = static_cast<TurnId>(t + 1);
        node.speaker = (t % 2 == 0) ? "Casey" : "Devon"; // equal-length names keep turns fixed-size
        node.timestamp = "2030-01-01 00:00";
        node.text = scaling_turn_text(t);
        node.metadata.keywords = tokenize(node.text);
        node.metadata.tags = {"synthetic"};
        node.metadata.timestamp = node.timestamp;
        node.metadata.context = synthetic_detail::fmt("scaling note %08lld",
                                                      static_cast<long long>(t));
        store.insert_turn(node);
        store.index().encode_and_register(
            IngestionEngine::turn_embedding_text(node.text, node.metadata.keywords), Layer::Turn,
            node.turn_id);
    }
    if (cfg.hierarchical && n > 0) {
        for (size_t start = 0; start < n; start += cfg.turns_per_event) {
            const size_t end = std::min(start + cfg.turns_per_event, n);
            std::vector<TurnId> ids;
            std::vector<FactSheetEntry> facts;
            for (size_t t = start; t < end; ++t) {
                const TurnId id = static_cast<TurnId>(t + 1);
                ids.push_back(id);
                facts.push_back({id,
                                 synthetic_detail::fmt("turn%08lld", static_cast<long long>(t)) +
                                     " " +
                                     synthetic_detail::fmt("item%06lld",
                                                           static_cast<long long>((t * 7) % 1000000)),
                                 "2030-01-01 00:00"});
            }
            const std::string summary =
                synthetic_detail::fmt("block%06lld", static_cast<long long>(start / 100)) +
                " synthetic scaling block";
            const EventId eid = store.create_event(summary, std::move(facts), ids);
            store.index().encode_and_register(event_embedding_text(store.event(eid)), Layer::Event,
                                              eid);
            store.clear_embedding_stale(eid);
        }
    }
    return store;
}

} // namespace hiermem
