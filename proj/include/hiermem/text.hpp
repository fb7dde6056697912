#pragma once
// Text utilities shared by the encoder, the scripted stub provider and the
// answer scorer: tokenization, stopword filtering, SQuAD-style answer
// normalization.

#include <algorithm>
#include <cctype>
#include <string>
#include <unordered_set>
#include <vector>

namespace hiermem {

// Lowercase tokens split on non-alphanumeric boundaries.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

inline const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",    "an",    "the",  "and",  "or",    "of",    "to",    "in",
        "on",   "at",    "is",   "are",  "was",   "were",  "be",    "been",
        "am",   "do",    "does", "did",  "has",   "have",  "had",   "will",
        "would", "can",  "could", "should", "about", "what", "when", "where",
        "who",  "whom",  "which", "why",  "how",   "i",     "you",   "he",
        "she",  "it",    "we",   "they", "me",    "him",   "her",   "us",
        "them", "my",    "your", "his",  "its",   "our",   "their", "this",
        "that", "these", "those", "with", "for",  "from",  "by",    "as",
        "not",  "no",    "yes",  "so",   "but",   "if",    "then",  "there",
    };
    return words;
}

inline bool is_stopword(const std::string& token) {
    return stopwords().count(token) > 0;
}

// Tokens that carry content: everything except stopwords, first occurrence
// order, duplicates removed.
inline std::vector<std::string> content_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& tok : tokenize(text)) {
        if (is_stopword(tok)) continue;
        if (seen.insert(tok).second) out.push_back(tok);
    }
    return out;
}

// SQuAD answer normalization: lowercase, delete punctuation, drop the
// articles a/an/the, collapse whitespace. Returns the token list.
inline std::vector<std::string> normalize_answer(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cleaned.push_back(static_cast<char>(std::tolower(ch)));
        } else if (std::isspace(ch)) {
            cleaned.push_back(' ');
        }
        // punctuation chars are deleted, not replaced by spaces
    }
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : cleaned) {
        if (ch == ' ') {
            if (!cur.empty()) {
                if (cur != "a" && cur != "an" && cur != "the") tokens.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") tokens.push_back(cur);
    return tokens;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

// Whitespace-separated chunk count; the stub provider's synthetic token
// counter for usage accounting.
inline std::uint64_t approx_token_count(const std::string& text) {
    std::uint64_t count = 0;
    bool in_tok = false;
    for (unsigned char ch : text) {
        if (std::isspace(ch)) {
            in_tok = false;
        } else if (!in_tok) {
            in_tok = true;
            ++count;
        }
    }
    return count;
}

} // namespace hiermem
