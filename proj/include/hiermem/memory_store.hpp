#pragma once
// Two-level event-turn memory store. Turn nodes hold raw dialogue turns plus
// extracted metadata; event nodes group related turns behind a summary and a
// fact sheet and keep an explicit link set back to their member turns. Link
// bidirectionality (event.link_set <-> turn.event_ids) is maintained by every
// mutating operation.
//
// Snapshot format (versioned, self-describing, little-endian):
// ┌──────────────────────────────────────────────┐
// │ magic "HMEMSNAP", version u32, dim u32       │
// │ turn count u64, turns in ingestion order     │
// │ event count u64, events in id order          │
// │ per layer: embedding count u64, (id, f32*D)  │
// └──────────────────────────────────────────────┘
//
// Concurrency: single writer, multiple readers. Any number of retrieval
// readers may run between ingestion steps; no internal locking beyond that
// contract.

#include "hiermem/embedding.hpp"
#include "hiermem/errors.hpp"
#include "hiermem/types.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace hiermem {

// LLM-extracted metadata attached to every stored turn.
struct Metadata {
    std::vector<std::string> keywords;
    std::vector<std::string> tags;
    std::string timestamp; // source timestamp, preserved verbatim
    std::string context;
};

struct TurnNode {
    TurnId turn_id = 0;
    std::string speaker;
    std::string text;
    std::string timestamp;
    Metadata metadata;
    std::vector<EventId> event_ids; // sorted, unique

    bool in_event(EventId e) const {
        return std::binary_search(event_ids.begin(), event_ids.end(), e);
    }
};

// One dated factual line referencing the turn it came from.
struct FactSheetEntry {
    TurnId turn_id = 0;
    std::string fact;
    std::string timestamp;
};

struct EventNode {
    EventId event_id = 0;
    std::string summary;
    std::vector<FactSheetEntry> fact_sheet;
    std::vector<TurnId> link_set; // attach order (ingestion order), duplicate-free
    bool embedding_stale = false;

    size_t volume() const { return link_set.size(); }

    bool linked(TurnId t) const {
        return std::find(link_set.begin(), link_set.end(), t) != link_set.end();
    }
};

// Adaptive event update payloads: a full refresh replaces summary and fact
// sheet wholesale; an append adds exactly one fact entry and leaves the
// summary untouched.
struct FullRefresh {
    std::string summary;
    std::vector<FactSheetEntry> fact_sheet;
};
struct AppendEntry {
    FactSheetEntry entry;
};
using EventUpdate = std::variant<FullRefresh, AppendEntry>;

struct StoreStats {
    std::uint64_t turn_count = 0;
    std::uint64_t event_count = 0;
    std::uint64_t link_count = 0;
    std::uint64_t serialized_bytes = 0;
};

// Text an event is embedded from: summary plus the dated fact lines.
inline std::string event_embedding_text(const EventNode& event) {
    std::string out = event.summary;
    for (const auto& entry : event.fact_sheet) {
        out += "\n[";
        out += entry.timestamp;
        out += "] ";
        out += entry.fact;
    }
    return out;
}

namespace snapshot_detail {

constexpr char MAGIC[8] = {'H', 'M', 'E', 'M', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t VERSION = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}
inline void put_i64(std::ostream& os, std::int64_t v) {
    put_u64(os, static_cast<std::uint64_t>(v));
}
inline void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void put_f32(std::ostream& os, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(os, bits);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("snapshot truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}
inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw FormatError("snapshot truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}
inline std::int64_t get_i64(std::istream& is) {
    return static_cast<std::int64_t>(get_u64(is));
}
inline std::string get_str(std::istream& is) {
    const std::uint32_t len = get_u32(is);
    if (len > (1u << 30)) throw FormatError("snapshot string length implausible");
    std::string s(len, '\0');
    is.read(s.data(), len);
    if (!is) throw FormatError("snapshot truncated");
    return s;
}
inline float get_f32(std::istream& is) {
    const std::uint32_t bits = get_u32(is);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

// Stream buffer that counts bytes without storing them; stats() sizes the
// snapshot through it instead of materializing one.
class CountingBuf : public std::streambuf {
public:
    std::uint64_t count = 0;

protected:
    int overflow(int ch) override {
        ++count;
        return ch;
    }
    std::streamsize xsputn(const char*, std::streamsize n) override {
        count += static_cast<std::uint64_t>(n);
        return n;
    }
};

} // namespace snapshot_detail

class MemoryStore {
public:
    explicit MemoryStore(std::shared_ptr<const Encoder> encoder)
        : encoder_(std::move(encoder)), index_(encoder_) {}

    // --- turns ---

    TurnId insert_turn(TurnNode node) {
        if (turns_.count(node.turn_id)) {
            throw DuplicateIdError("turn " + std::to_string(node.turn_id) + " already present");
        }
        if (!ingestion_order_.empty() && node.turn_id <= ingestion_order_.back()) {
            throw Error("turn ids must be strictly increasing in ingestion order (got " +
                        std::to_string(node.turn_id) + " after " +
                        std::to_string(ingestion_order_.back()) + ")");
        }
        for (EventId e : node.event_ids) {
            if (!events_.count(e)) {
                throw UnknownIdError("turn references unknown event " + std::to_string(e));
            }
        }
        const TurnId id = node.turn_id;
        ingestion_order_.push_back(id);
        turns_.emplace(id, std::move(node));
        return id;
    }

    bool has_turn(TurnId id) const { return turns_.count(id) > 0; }

    const TurnNode& turn(TurnId id) const {
        auto it = turns_.find(id);
        if (it == turns_.end()) throw UnknownIdError("unknown turn " + std::to_string(id));
        return it->second;
    }

    const std::vector<TurnId>& ingestion_order() const { return ingestion_order_; }

    // Last n turns in ingestion order, oldest first.
    std::vector<TurnId> recent_turns(size_t n) const {
        const size_t take = std::min(n, ingestion_order_.size());
        return {ingestion_order_.end() - static_cast<std::ptrdiff_t>(take), ingestion_order_.end()};
    }

    // --- events ---

    EventId create_event(const std::string& summary, std::vector<FactSheetEntry> fact_sheet,
                         const std::vector<TurnId>& initial_turn_ids) {
        if (initial_turn_ids.empty()) {
            throw EmptyLinkSetError("create_event: initial turn set is empty");
        }
        for (TurnId t : initial_turn_ids) {
            if (!turns_.count(t)) {
                throw UnknownIdError("create_event: unknown turn " + std::to_string(t));
            }
        }
        {
            std::vector<TurnId> dedup = initial_turn_ids;
            std::sort(dedup.begin(), dedup.end());
            if (std::adjacent_find(dedup.begin(), dedup.end()) != dedup.end()) {
                throw Error("create_event: duplicate turn id in initial set");
            }
        }
        for (const auto& entry : fact_sheet) {
            if (std::find(initial_turn_ids.begin(), initial_turn_ids.end(), entry.turn_id) ==
                initial_turn_ids.end()) {
                throw IntegrityError("fact entry references turn " +
                                     std::to_string(entry.turn_id) + " outside the link set");
            }
            if (entry.fact.empty()) throw Error("fact entry must be non-empty");
        }

        EventNode event;
        event.event_id = next_event_id_++;
        event.summary = summary;
        event.fact_sheet = std::move(fact_sheet);
        event.embedding_stale = true;
        const EventId id = event.event_id;
        events_.emplace(id, std::move(event));
        for (TurnId t : initial_turn_ids) attach_link(id, t);
        return id;
    }

    bool has_event(EventId id) const { return events_.count(id) > 0; }

    const EventNode& event(EventId id) const {
        auto it = events_.find(id);
        if (it == events_.end()) throw UnknownIdError("unknown event " + std::to_string(id));
        return it->second;
    }

    std::vector<EventId> event_ids_in_order() const {
        std::vector<EventId> ids;
        ids.reserve(events_.size());
        for (const auto& [id, _] : events_) ids.push_back(id);
        return ids; // std::map iterates in ascending id order
    }

    // Idempotent: linking an already-linked turn changes nothing.
    const EventNode& attach_link(EventId event_id, TurnId turn_id) {
        auto ev = events_.find(event_id);
        if (ev == events_.end()) {
            throw UnknownIdError("attach_link: unknown event " + std::to_string(event_id));
        }
        auto tn = turns_.find(turn_id);
        if (tn == turns_.end()) {
            throw UnknownIdError("attach_link: unknown turn " + std::to_string(turn_id));
        }
        if (!ev->second.linked(turn_id)) {
            ev->second.link_set.push_back(turn_id);
            auto& ids = tn->second.event_ids;
            ids.insert(std::upper_bound(ids.begin(), ids.end(), event_id), event_id);
        }
        return ev->second;
    }

    // Member turns in link-set (ingestion) order.
    std::vector<TurnNode> linked_turns(EventId event_id) const {
        const EventNode& ev = event(event_id);
        std::vector<TurnNode> out;
        out.reserve(ev.link_set.size());
        for (TurnId t : ev.link_set) out.push_back(turn(t));
        return out;
    }

    const EventNode& apply_event_update(EventId event_id, const EventUpdate& update) {
        auto it = events_.find(event_id);
        if (it == events_.end()) {
            throw UnknownIdError("apply_event_update: unknown event " + std::to_string(event_id));
        }
        EventNode& ev = it->second;
        if (const auto* refresh = std::get_if<FullRefresh>(&update)) {
            for (const auto& entry : refresh->fact_sheet) {
                if (!ev.linked(entry.turn_id)) {
                    throw IntegrityError("refresh fact references turn " +
                                         std::to_string(entry.turn_id) +
                                         " outside the link set of event " +
                                         std::to_string(event_id));
                }
            }
            ev.summary = refresh->summary;
            ev.fact_sheet = refresh->fact_sheet;
        } else {
            const auto& entry = std::get<AppendEntry>(update).entry;
            if (!ev.linked(entry.turn_id)) {
                throw IntegrityError("appended fact references turn " +
                                     std::to_string(entry.turn_id) +
                                     " outside the link set of event " + std::to_string(event_id));
            }
            if (entry.fact.empty()) throw Error("fact entry must be non-empty");
            ev.fact_sheet.push_back(entry);
        }
        ev.embedding_stale = true;
        return ev;
    }

    void clear_embedding_stale(EventId event_id) {
        auto it = events_.find(event_id);
        if (it == events_.end()) {
            throw UnknownIdError("unknown event " + std::to_string(event_id));
        }
        it->second.embedding_stale = false;
    }

    size_t turn_count() const { return turns_.size(); }
    size_t event_count() const { return events_.size(); }

    EmbeddingIndex& index() { return index_; }
    const EmbeddingIndex& index() const { return index_; }
    const std::shared_ptr<const Encoder>& encoder() const { return encoder_; }

    // --- stats & invariants ---

    StoreStats stats() const {
        StoreStats s;
        s.turn_count = turns_.size();
        s.event_count = events_.size();
        for (const auto& [_, ev] : events_) s.link_count += ev.link_set.size();
        snapshot_detail::CountingBuf buf;
        std::ostream os(&buf);
        serialize(os);
        s.serialized_bytes = buf.count;
        return s;
    }

    // Full invariant sweep; throws IntegrityError on the first violation.
    void check_integrity() const {
        for (const auto& [id, ev] : events_) {
            std::vector<TurnId> dedup = ev.link_set;
            std::sort(dedup.begin(), dedup.end());
            if (std::adjacent_find(dedup.begin(), dedup.end()) != dedup.end()) {
                throw IntegrityError("event " + std::to_string(id) + " has duplicate links");
            }
            for (TurnId t : ev.link_set) {
                auto tn = turns_.find(t);
                if (tn == turns_.end()) {
                    throw IntegrityError("event " + std::to_string(id) +
                                         " links missing turn " + std::to_string(t));
                }
                if (!tn->second.in_event(id)) {
                    throw IntegrityError("turn " + std::to_string(t) +
                                         " lacks back-reference to event " + std::to_string(id));
                }
            }
            for (const auto& entry : ev.fact_sheet) {
                if (!ev.linked(entry.turn_id)) {
                    throw IntegrityError("event " + std::to_string(id) +
                                         " fact references unlinked turn " +
                                         std::to_string(entry.turn_id));
                }
                if (entry.fact.empty()) {
                    throw IntegrityError("event " + std::to_string(id) + " has an empty fact");
                }
            }
        }
        for (const auto& [id, tn] : turns_) {
            for (EventId e : tn.event_ids) {
                auto ev = events_.find(e);
                if (ev == events_.end()) {
                    throw IntegrityError("turn " + std::to_string(id) +
                                         " references missing event " + std::to_string(e));
                }
                if (!ev->second.linked(id)) {
                    throw IntegrityError("event " + std::to_string(e) +
                                         " lacks link back to turn " + std::to_string(id));
                }
            }
        }
        if (ingestion_order_.size() != turns_.size()) {
            throw IntegrityError("ingestion order length mismatch");
        }
    }

    // --- persistence ---

    void serialize(std::ostream& os) const {
        using namespace snapshot_detail;
        os.write(MAGIC, sizeof(MAGIC));
        put_u32(os, VERSION);
        put_u32(os, static_cast<std::uint32_t>(index_.dimension()));

        put_u64(os, turns_.size());
        for (TurnId id : ingestion_order_) {
            const TurnNode& t = turns_.at(id);
            put_i64(os, t.turn_id);
            put_str(os, t.speaker);
            put_str(os, t.text);
            put_str(os, t.timestamp);
            put_u32(os, static_cast<std::uint32_t>(t.metadata.keywords.size()));
            for (const auto& k : t.metadata.keywords) put_str(os, k);
            put_u32(os, static_cast<std::uint32_t>(t.metadata.tags.size()));
            for (const auto& k : t.metadata.tags) put_str(os, k);
            put_str(os, t.metadata.timestamp);
            put_str(os, t.metadata.context);
            put_u32(os, static_cast<std::uint32_t>(t.event_ids.size()));
            for (EventId e : t.event_ids) put_i64(os, e);
        }

        put_u64(os, events_.size());
        for (const auto& [id, ev] : events_) {
            put_i64(os, ev.event_id);
            put_str(os, ev.summary);
            put_u32(os, static_cast<std::uint32_t>(ev.link_set.size()));
            for (TurnId t : ev.link_set) put_i64(os, t);
            put_u32(os, static_cast<std::uint32_t>(ev.fact_sheet.size()));
            for (const auto& f : ev.fact_sheet) {
                put_i64(os, f.turn_id);
                put_str(os, f.fact);
                put_str(os, f.timestamp);
            }
            os.put(ev.embedding_stale ? 1 : 0);
        }

        for (Layer layer : {Layer::Turn, Layer::Event}) {
            put_u64(os, index_.size(layer));
            index_.for_each(layer, [&](std::int64_t id, const float* row) {
                put_i64(os, id);
                for (size_t j = 0; j < index_.dimension(); ++j) put_f32(os, row[j]);
            });
        }
        put_i64(os, next_event_id_);
    }

    void snapshot(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        serialize(out);
        out.flush();
        if (!out) throw IoError("failed writing snapshot to " + path.string());
    }

    static MemoryStore deserialize(std::istream& is, std::shared_ptr<const Encoder> encoder) {
        using namespace snapshot_detail;
        char magic[8];
        is.read(magic, sizeof(magic));
        if (!is || std::memcmp(magic, MAGIC, sizeof(MAGIC)) != 0) {
            throw FormatError("not a memory snapshot (bad magic)");
        }
        const std::uint32_t version = get_u32(is);
        if (version != VERSION) {
            throw FormatError("unsupported snapshot version " + std::to_string(version));
        }
        const std::uint32_t dim = get_u32(is);
        if (dim != encoder->dimension()) {
            throw FormatError("snapshot encoder dimension " + std::to_string(dim) +
                              " does not match configured dimension " +
                              std::to_string(encoder->dimension()));
        }

        MemoryStore store(std::move(encoder));
        const std::uint64_t turn_count = get_u64(is);
        std::vector<std::pair<TurnId, std::vector<EventId>>> turn_events;
        turn_events.reserve(turn_count);
        for (std::uint64_t i = 0; i < turn_count; ++i) {
            TurnNode t;
            t.turn_id = get_i64(is);
            t.speaker = get_str(is);
            t.text = get_str(is);
            t.timestamp = get_str(is);
            const std::uint32_t nk = get_u32(is);
            for (std::uint32_t j = 0; j < nk; ++j) t.metadata.keywords.push_back(get_str(is));
            const std::uint32_t nt = get_u32(is);
            for (std::uint32_t j = 0; j < nt; ++j) t.metadata.tags.push_back(get_str(is));
            t.metadata.timestamp = get_str(is);
            t.metadata.context = get_str(is);
            const std::uint32_t ne = get_u32(is);
            std::vector<EventId> evs;
            for (std::uint32_t j = 0; j < ne; ++j) evs.push_back(get_i64(is));
            turn_events.emplace_back(t.turn_id, std::move(evs));
            store.ingestion_order_.push_back(t.turn_id);
            store.turns_.emplace(t.turn_id, std::move(t));
        }

        const std::uint64_t event_count = get_u64(is);
        for (std::uint64_t i = 0; i < event_count; ++i) {
            EventNode ev;
            ev.event_id = get_i64(is);
            ev.summary = get_str(is);
            const std::uint32_t nl = get_u32(is);
            for (std::uint32_t j = 0; j < nl; ++j) ev.link_set.push_back(get_i64(is));
            const std::uint32_t nf = get_u32(is);
            for (std::uint32_t j = 0; j < nf; ++j) {
                FactSheetEntry f;
                f.turn_id = get_i64(is);
                f.fact = get_str(is);
                f.timestamp = get_str(is);
                ev.fact_sheet.push_back(std::move(f));
            }
            const int stale = is.get();
            if (stale == std::char_traits<char>::eof()) throw FormatError("snapshot truncated");
            ev.embedding_stale = stale != 0;
            store.events_.emplace(ev.event_id, std::move(ev));
        }
        for (auto& [turn_id, evs] : turn_events) {
            store.turns_.at(turn_id).event_ids = std::move(evs);
        }

        for (Layer layer : {Layer::Turn, Layer::Event}) {
            const std::uint64_t n = get_u64(is);
            for (std::uint64_t i = 0; i < n; ++i) {
                const std::int64_t id = get_i64(is);
                Vec v(dim);
                for (std::uint32_t j = 0; j < dim; ++j) v[j] = get_f32(is);
                store.index_.register_vector(layer, id, std::move(v));
            }
        }
        store.next_event_id_ = get_i64(is);
        store.check_integrity();
        return store;
    }

    static MemoryStore load(const std::filesystem::path& path,
                            std::shared_ptr<const Encoder> encoder) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path.string());
        return deserialize(in, std::move(encoder));
    }

private:
    std::shared_ptr<const Encoder> encoder_;
    EmbeddingIndex index_;
    std::map<TurnId, TurnNode> turns_;
    std::map<EventId, EventNode> events_;
    std::vector<TurnId> ingestion_order_;
    EventId next_event_id_ = 1;
};

} // namespace hiermem
