#pragma once
// Benchmark dataset: conversations of raw turns plus annotated questions
// with gold evidence. The on-disk form is a single JSON document; see the
// README for the schema. Loading validates referential integrity of every
// gold evidence id and the category set.

#include "hiermem/errors.hpp"
#include "hiermem/types.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace hiermem {

struct Conversation {
    std::string conversation_id;
    std::vector<DialogueTurn> turns;
};

struct Question {
    std::string question_id;
    std::string conversation_id;
    Category category = Category::SingleHop;
    std::string question;
    std::string gold_answer;
    std::optional<std::string> distractor; // required for adversarial items
    std::vector<TurnId> gold_evidence;     // may be empty for adversarial items
};

struct ConversationDataset {
    std::vector<Conversation> conversations;
    std::vector<Question> questions;

    const Conversation& conversation(const std::string& id) const {
        for (const auto& c : conversations) {
            if (c.conversation_id == id) return c;
        }
        throw UnknownIdError("unknown conversation " + id);
    }

    double mean_turns_per_conversation() const {
        if (conversations.empty()) return 0.0;
        size_t total = 0;
        for (const auto& c : conversations) total += c.turns.size();
        return static_cast<double>(total) / static_cast<double>(conversations.size());
    }
};

inline void validate_dataset(const ConversationDataset& ds) {
    std::map<std::string, std::set<TurnId>> turn_ids;
    std::set<std::string> conv_ids;
    for (const auto& conv : ds.conversations) {
        if (!conv_ids.insert(conv.conversation_id).second) {
            throw IntegrityError("duplicate conversation id " + conv.conversation_id);
        }
        auto& ids = turn_ids[conv.conversation_id];
        TurnId last = 0;
        for (const auto& t : conv.turns) {
            if (!ids.insert(t.turn_id).second) {
                throw IntegrityError("conversation " + conv.conversation_id +
                                     " has duplicate turn id " + std::to_string(t.turn_id));
            }
            if (t.turn_id <= last) {
                throw IntegrityError("conversation " + conv.conversation_id +
                                     " turn ids are not strictly increasing at " +
                                     std::to_string(t.turn_id));
            }
            last = t.turn_id;
        }
    }
    std::set<std::string> question_ids;
    for (const auto& q : ds.questions) {
        if (!question_ids.insert(q.question_id).second) {
            throw IntegrityError("duplicate question id " + q.question_id);
        }
        auto it = turn_ids.find(q.conversation_id);
        if (it == turn_ids.end()) {
            throw IntegrityError("question " + q.question_id +
                                 " references unknown conversation " + q.conversation_id);
        }
        for (TurnId id : q.gold_evidence) {
            if (!it->second.count(id)) {
                throw IntegrityError("question " + q.question_id +
                                     " references missing turn " + std::to_string(id) +
                                     " in conversation " + q.conversation_id);
            }
        }
        if (q.category == Category::Adversarial && !q.distractor) {
            throw IntegrityError("adversarial question " + q.question_id +
                                 " is missing its distractor candidate");
        }
    }
}

inline ConversationDataset dataset_from_json(const nlohmann::json& j) {
    ConversationDataset ds;
    try {
        for (const auto& cj : j.at("conversations")) {
            Conversation conv;
            conv.conversation_id = cj.at("conversation_id").get<std::string>();
            for (const auto& tj : cj.at("turns")) {
                DialogueTurn t;
                t.turn_id = tj.at("turn_id").get<TurnId>();
                t.speaker = tj.at("speaker").get<std::string>();
                t.timestamp = tj.value("timestamp", "");
                t.text = tj.at("text").get<std::string>();
                conv.turns.push_back(std::move(t));
            }
            ds.conversations.push_back(std::move(conv));
        }
        for (const auto& qj : j.value("questions", nlohmann::json::array())) {
            Question q;
            q.question_id = qj.at("question_id").get<std::string>();
            q.conversation_id = qj.at("conversation_id").get<std::string>();
            q.category = category_from_name(qj.at("category").get<std::string>());
            q.question = qj.at("question").get<std::string>();
            q.gold_answer = qj.value("gold_answer", "");
            if (qj.contains("distractor")) {
                q.distractor = qj.at("distractor").get<std::string>();
            }
            for (const auto& idj : qj.value("gold_evidence", nlohmann::json::array())) {
                q.gold_evidence.push_back(idj.get<TurnId>());
            }
            ds.questions.push_back(std::move(q));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset field error: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("dataset field error: ") + e.what());
    }
    validate_dataset(ds);
    return ds;
}

inline ConversationDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("dataset " + path.string() + ": " + e.what());
    }
    return dataset_from_json(j);
}

inline nlohmann::json dataset_to_json(const ConversationDataset& ds) {
    nlohmann::ordered_json j;
    j["conversations"] = nlohmann::ordered_json::array();
    for (const auto& conv : ds.conversations) {
        nlohmann::ordered_json cj;
        cj["conversation_id"] = conv.conversation_id;
        cj["turns"] = nlohmann::ordered_json::array();
        for (const auto& t : conv.turns) {
            cj["turns"].push_back({{"turn_id", t.turn_id},
                                   {"speaker", t.speaker},
                                   {"timestamp", t.timestamp},
                                   {"text", t.text}});
        }
        j["conversations"].push_back(std::move(cj));
    }
    j["questions"] = nlohmann::ordered_json::array();
    for (const auto& q : ds.questions) {
        nlohmann::ordered_json qj;
        qj["question_id"] = q.question_id;
        qj["conversation_id"] = q.conversation_id;
        qj["category"] = category_name(q.category);
        qj["question"] = q.question;
        qj["gold_answer"] = q.gold_answer;
        if (q.distractor) qj["distractor"] = *q.distractor;
        qj["gold_evidence"] = q.gold_evidence;
        j["questions"].push_back(std::move(qj));
    }
    return j;
}

inline void save_dataset(const ConversationDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset " + path.string());
    out << dataset_to_json(ds).dump(2) << "\n";
}

} // namespace hiermem
