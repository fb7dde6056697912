#pragma once
// Prompt families and template rendering. Templates are plain text with
// {{variable}} placeholders; they ship as editable files under prompts/ and
// identical built-in defaults keep the library usable without any files.

#include "hiermem/errors.hpp"
#include "hiermem/types.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

namespace hiermem {

enum class PromptFamily {
    TurnAnalysis,
    EventAffiliation,
    QueryKeywords,
    EventLocalSelection,
    EvidenceFilter,
    EventFullRefresh,
    EventAppend,
    FinalQA,
};

enum class Stage { MemoryConstruction, Retrieval, Answer };

inline const char* family_name(PromptFamily f) {
    switch (f) {
        case PromptFamily::TurnAnalysis: return "turn_analysis";
        case PromptFamily::EventAffiliation: return "event_affiliation";
        case PromptFamily::QueryKeywords: return "query_keywords";
        case PromptFamily::EventLocalSelection: return "event_local_selection";
        case PromptFamily::EvidenceFilter: return "evidence_filter";
        case PromptFamily::EventFullRefresh: return "event_full_refresh";
        case PromptFamily::EventAppend: return "event_append";
        case PromptFamily::FinalQA: return "final_qa";
    }
    return "unknown";
}

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::MemoryConstruction: return "memory_construction";
        case Stage::Retrieval: return "retrieval";
        case Stage::Answer: return "answer";
    }
    return "unknown";
}

// Which accounting stage a family's tokens are booked under.
inline Stage stage_for(PromptFamily f) {
    switch (f) {
        case PromptFamily::TurnAnalysis:
        case PromptFamily::EventAffiliation:
        case PromptFamily::EventFullRefresh:
        case PromptFamily::EventAppend:
            return Stage::MemoryConstruction;
        case PromptFamily::QueryKeywords:
        case PromptFamily::EventLocalSelection:
        case PromptFamily::EvidenceFilter:
            return Stage::Retrieval;
        case PromptFamily::FinalQA:
            return Stage::Answer;
    }
    return Stage::Retrieval;
}

// Template file name for a family; FinalQA is keyed per category.
inline std::string template_key(PromptFamily f, std::optional<Category> category) {
    if (f == PromptFamily::FinalQA) {
        if (!category) throw UnknownFamilyError("final_qa requires a category");
        return std::string("final_qa_") + category_name(*category);
    }
    return family_name(f);
}

class PromptLibrary {
public:
    // Built-in templates, identical to the files shipped under prompts/.
    static PromptLibrary defaults() {
        PromptLibrary lib;
        lib.templates_["turn_analysis"] =
            "You maintain a structured conversational memory. Analyze the current "
            "dialogue turn in the context of the recent turns.\n"
            "Recent turns:\n{{window}}\n"
            "Current turn:\n{{turn}}\n"
            "Return a JSON object with fields: keywords (list of short lowercase terms "
            "from the turn), tags (list of category labels), timestamp (the turn's "
            "timestamp), context (one or two sentences situating the turn).\n";
        lib.templates_["event_affiliation"] =
            "Decide which existing events the new turn belongs to, if any.\n"
            "New turn:\n{{turn}}\n"
            "Candidate events:\n{{candidates}}\n"
            "Return a JSON object: {\"event_ids\": [ids of matching candidates], "
            "\"new_event\": true|false}. Use new_event=true when the turn starts a "
            "topic not covered by any candidate.\n";
        lib.templates_["query_keywords"] =
            "Extract the retrieval keywords from the question.\n"
            "Question: {{question}}\n"
            "Return a JSON object: {\"keywords\": [lowercase terms]}.\n";
        lib.templates_["event_local_selection"] =
            "Given one event from a conversational memory, select the turns inside it "
            "that are most likely to contain the answer to the question.\n"
            "Question: {{question}}\n"
            "Event summary: {{summary}}\n"
            "Turns in this event:\n{{turns}}\n"
            "Return a JSON object: {\"turn_ids\": [ids of selected turns]}. Select "
            "nothing if no turn helps.\n";
        lib.templates_["evidence_filter"] =
            "Judge which candidate turns are actually useful for answering the "
            "question. Pay special attention to subject matching, topical relevance "
            "and temporal constraints.\n"
            "Question: {{question}}\n"
            "Candidate turns:\n{{candidates}}\n"
            "Return a JSON object: {\"turn_ids\": [ids of useful candidates]}.\n";
        lib.templates_["event_full_refresh"] =
            "Rewrite the event record from its member turns.\n"
            "Member turns:\n{{turns}}\n"
            "Return a JSON object: {\"summary\": short summary of the event, "
            "\"facts\": [{\"turn_id\": id, \"fact\": one-line dated factual statement, "
            "\"timestamp\": turn timestamp}] with one entry per member turn}.\n";
        lib.templates_["event_append"] =
            "A new turn was appended to an existing event.\n"
            "Event summary: {{summary}}\n"
            "New turn:\n{{turn}}\n"
            "Return a JSON object: {\"fact\": one-line dated factual statement for the "
            "new turn, \"timestamp\": the turn timestamp}.\n";
        lib.templates_["final_qa_single_hop"] =
            "Answer the question using only the retrieved conversation turns.\n"
            "Turns:\n{{evidence}}\n"
            "Question: {{question}}\n"
            "Answer with a short phrase, using exact words from the turns when "
            "possible. Return a JSON object: {\"answer\": text}.\n";
        lib.templates_["final_qa_multi_hop"] =
            "Answer the question by combining information across the retrieved "
            "conversation turns.\n"
            "Turns:\n{{evidence}}\n"
            "Question: {{question}}\n"
            "Answer with a short phrase. Return a JSON object: {\"answer\": text}.\n";
        lib.templates_["final_qa_temporal"] =
            "Answer the time-related question from the retrieved conversation turns. "
            "Use the turn timestamps and the order of the dialogue to infer an "
            "approximate date when none is stated outright, and answer briefly.\n"
            "Turns:\n{{evidence}}\n"
            "Question: {{question}}\n"
            "Return a JSON object: {\"answer\": text}.\n";
        lib.templates_["final_qa_open_domain"] =
            "Answer the question using the retrieved conversation turns together with "
            "common knowledge where needed.\n"
            "Turns:\n{{evidence}}\n"
            "Question: {{question}}\n"
            "Answer with a short phrase. Return a JSON object: {\"answer\": text}.\n";
        lib.templates_["final_qa_adversarial"] =
            "Decide whether the conversation supports the candidate answer.\n"
            "Turns:\n{{evidence}}\n"
            "Question: {{question}}\n"
            "Candidate answer: {{distractor}}\n"
            "Choose between the candidate answer and \"Not mentioned in the "
            "conversation\". Return a JSON object: {\"answer\": text} where text is "
            "exactly one of the two options.\n";
        return lib;
    }

    // Override templates from a directory of <key>.txt files.
    void load_directory(const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir)) {
            throw IoError("prompt directory not found: " + dir.string());
        }
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
            std::ifstream in(entry.path());
            if (!in) throw IoError("cannot read " + entry.path().string());
            std::ostringstream ss;
            ss << in.rdbuf();
            templates_[entry.path().stem().string()] = ss.str();
        }
    }

    const std::string& template_for(PromptFamily f, std::optional<Category> category = {}) const {
        const std::string key = template_key(f, category);
        auto it = templates_.find(key);
        if (it == templates_.end()) {
            throw UnknownFamilyError("no template for " + key);
        }
        return it->second;
    }

    // Substitute {{name}} placeholders with string/number variables. Any
    // placeholder left without a matching variable is an error.
    std::string render(PromptFamily f, std::optional<Category> category,
                       const nlohmann::json& variables) const {
        const std::string& tmpl = template_for(f, category);
        std::string out;
        out.reserve(tmpl.size());
        size_t pos = 0;
        while (pos < tmpl.size()) {
            const size_t open = tmpl.find("{{", pos);
            if (open == std::string::npos) {
                out.append(tmpl, pos, std::string::npos);
                break;
            }
            out.append(tmpl, pos, open - pos);
            const size_t close = tmpl.find("}}", open + 2);
            if (close == std::string::npos) {
                throw MissingVariableError("unterminated placeholder in template " +
                                           template_key(f, category));
            }
            const std::string name = tmpl.substr(open + 2, close - open - 2);
            if (!variables.contains(name)) {
                throw MissingVariableError("missing variable '" + name + "' for template " +
                                           template_key(f, category));
            }
            const auto& v = variables.at(name);
            if (v.is_string()) {
                out += v.get<std::string>();
            } else {
                out += v.dump();
            }
            pos = close + 2;
        }
        return out;
    }

    void set_template(const std::string& key, std::string text) {
        templates_[key] = std::move(text);
    }

private:
    std::map<std::string, std::string> templates_;
};

} // namespace hiermem
