#pragma once
// Answer and evidence-set scoring: SQuAD-style token F1, question-level
// Precision@K / Recall@K with macro averaging, category-wise system ranking,
// and fixed-K truncation.

#include "hiermem/errors.hpp"
#include "hiermem/text.hpp"
#include "hiermem/types.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace hiermem {

// Token-level F1 over the multiset overlap of normalized tokens. Both sides
// empty scores 1.0; exactly one side empty scores 0.0.
inline double token_f1(const std::string& prediction, const std::string& gold) {
    const std::vector<std::string> pred = normalize_answer(prediction);
    const std::vector<std::string> ref = normalize_answer(gold);
    if (pred.empty() && ref.empty()) return 1.0;
    if (pred.empty() || ref.empty()) return 0.0;

    std::map<std::string, int> counts;
    for (const auto& t : ref) counts[t]++;
    int overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

struct EvidenceScore {
    std::optional<double> precision; // undefined when nothing was retrieved
    std::optional<double> recall;    // undefined when there is no gold evidence
    size_t k = 0;                    // |retrieved|
};

// Question-level evidence metrics over exact turn-id matches. Undefined
// values are left unset so macro averaging can exclude them.
inline EvidenceScore evidence_metrics(const std::vector<TurnId>& retrieved,
                                      const std::vector<TurnId>& gold) {
    const std::set<TurnId> retrieved_set(retrieved.begin(), retrieved.end());
    const std::set<TurnId> gold_set(gold.begin(), gold.end());
    size_t hits = 0;
    for (TurnId id : retrieved_set) {
        if (gold_set.count(id)) ++hits;
    }
    EvidenceScore score;
    score.k = retrieved_set.size();
    if (!retrieved_set.empty()) {
        score.precision = static_cast<double>(hits) / static_cast<double>(retrieved_set.size());
    }
    if (!gold_set.empty()) {
        score.recall = static_cast<double>(hits) / static_cast<double>(gold_set.size());
    }
    return score;
}

// Unweighted mean over questions where the metric is defined; absent when no
// question defines it.
inline std::optional<double> macro_average(const std::vector<std::optional<double>>& values) {
    double sum = 0.0;
    size_t n = 0;
    for (const auto& v : values) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

// Average category-wise rank per system, lower is better. Within a category
// systems are ranked by descending score; tied scores share one rank and the
// next distinct score gets the next rank (dense ranking).
inline std::vector<double> category_rank(const std::vector<std::vector<double>>& f1_table) {
    if (f1_table.size() < 2) {
        throw Error("category_rank needs at least two systems");
    }
    const size_t categories = f1_table.front().size();
    if (categories == 0) {
        throw Error("category_rank needs at least one category");
    }
    for (const auto& row : f1_table) {
        if (row.size() != categories) {
            throw Error("category_rank: ragged F1 table");
        }
    }
    std::vector<double> rank_sums(f1_table.size(), 0.0);
    for (size_t c = 0; c < categories; ++c) {
        std::vector<double> column;
        column.reserve(f1_table.size());
        for (const auto& row : f1_table) column.push_back(row[c]);
        std::vector<double> distinct = column;
        std::sort(distinct.begin(), distinct.end(), std::greater<>());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (size_t s = 0; s < column.size(); ++s) {
            const auto pos = std::find(distinct.begin(), distinct.end(), column[s]);
            rank_sums[s] += static_cast<double>(pos - distinct.begin()) + 1.0;
        }
    }
    for (double& r : rank_sums) r /= static_cast<double>(categories);
    return rank_sums;
}

// First min(K, len) ids of a descending-score retrieval list.
inline std::vector<TurnId> fixed_k_truncate(const std::vector<TurnId>& ranked, size_t k) {
    const size_t n = std::min(k, ranked.size());
    return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n)};
}

} // namespace hiermem
