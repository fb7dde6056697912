#include "hiermem/metrics.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

using namespace hiermem;

namespace {

// Independent F1 oracle built on sorted-multiset intersection rather than the
// counting map the implementation uses.
double oracle_f1(const std::string& prediction, const std::string& gold) {
    std::vector<std::string> p = normalize_answer(prediction);
    std::vector<std::string> g = normalize_answer(gold);
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    std::vector<std::string> common;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(common));
    if (common.empty()) return 0.0;
    const double prec = static_cast<double>(common.size()) / p.size();
    const double rec = static_cast<double>(common.size()) / g.size();
    return 2 * prec * rec / (prec + rec);
}

std::string random_phrase(std::mt19937& rng) {
    static const std::vector<std::string> words = {"prius", "car",  "red",  "trip", "dog",
                                                   "park",  "new",  "a",    "the",  "drove",
                                                   "band",  "show", "2023", "may",  "concert"};
    const size_t len = rng() % 6;
    std::string out;
    for (size_t i = 0; i < len; ++i) {
        if (i) out += " ";
        out += words[rng() % words.size()];
    }
    return out;
}

} // namespace

TEST(TokenF1, ExactMatch) {
    EXPECT_DOUBLE_EQ(token_f1("Prius", "Prius"), 1.0);
    EXPECT_DOUBLE_EQ(token_f1("The Prius!", "prius"), 1.0); // articles and punctuation drop
}

TEST(TokenF1, PartialOverlapHandComputed) {
    // P=0.5, R=1.0 -> F1 = 2/3
    EXPECT_NEAR(token_f1("new Prius", "Prius"), 0.6667, 1e-4);
}

TEST(TokenF1, Disjoint) {
    EXPECT_DOUBLE_EQ(token_f1("dog", "cat"), 0.0);
}

TEST(TokenF1, EmptyCases) {
    EXPECT_DOUBLE_EQ(token_f1("", ""), 1.0);
    EXPECT_DOUBLE_EQ(token_f1("the a an", ""), 1.0); // normalizes to empty
    EXPECT_DOUBLE_EQ(token_f1("word", ""), 0.0);
    EXPECT_DOUBLE_EQ(token_f1("", "word"), 0.0);
}

TEST(TokenF1, SymmetricStructure) {
    std::mt19937 rng(17);
    for (int i = 0; i < 100; ++i) {
        const std::string a = random_phrase(rng);
        const std::string b = random_phrase(rng);
        EXPECT_DOUBLE_EQ(token_f1(a, b), token_f1(b, a));
    }
}

TEST(TokenF1, MatchesIndependentOracle) {
    std::mt19937 rng(23);
    for (int i = 0; i < 200; ++i) {
        const std::string a = random_phrase(rng);
        const std::string b = random_phrase(rng);
        EXPECT_NEAR(token_f1(a, b), oracle_f1(a, b), 1e-9) << "'" << a << "' vs '" << b << "'";
    }
}

TEST(EvidenceMetrics, HandComputedCase) {
    const EvidenceScore s = evidence_metrics({1, 2, 3, 4}, {2, 5});
    ASSERT_TRUE(s.precision && s.recall);
    EXPECT_DOUBLE_EQ(*s.precision, 0.25);
    EXPECT_DOUBLE_EQ(*s.recall, 0.5);
    EXPECT_EQ(s.k, 4u);
}

TEST(EvidenceMetrics, PerfectRetrieval) {
    const EvidenceScore s = evidence_metrics({7}, {7});
    EXPECT_DOUBLE_EQ(*s.precision, 1.0);
    EXPECT_DOUBLE_EQ(*s.recall, 1.0);
}

TEST(EvidenceMetrics, DegenerateCases) {
    const EvidenceScore empty_retrieved = evidence_metrics({}, {1});
    EXPECT_FALSE(empty_retrieved.precision.has_value());
    ASSERT_TRUE(empty_retrieved.recall.has_value());
    EXPECT_DOUBLE_EQ(*empty_retrieved.recall, 0.0);
    EXPECT_EQ(empty_retrieved.k, 0u);

    const EvidenceScore empty_gold = evidence_metrics({1, 2}, {});
    EXPECT_FALSE(empty_gold.recall.has_value());
    ASSERT_TRUE(empty_gold.precision.has_value());
    EXPECT_DOUBLE_EQ(*empty_gold.precision, 0.0);
}

TEST(EvidenceMetrics, BoundsOnRandomInputs) {
    std::mt19937 rng(31);
    for (int i = 0; i < 200; ++i) {
        std::vector<TurnId> retrieved, gold;
        for (size_t j = 0; j < rng() % 12; ++j) retrieved.push_back(rng() % 20);
        for (size_t j = 0; j < rng() % 6; ++j) gold.push_back(rng() % 20);
        const EvidenceScore s = evidence_metrics(retrieved, gold);
        if (s.precision) {
            EXPECT_GE(*s.precision, 0.0);
            EXPECT_LE(*s.precision, 1.0);
        }
        if (s.recall) {
            EXPECT_GE(*s.recall, 0.0);
            EXPECT_LE(*s.recall, 1.0);
        }
    }
}

TEST(MacroAverage, ArithmeticOracle) {
    EXPECT_DOUBLE_EQ(*macro_average({0.2, 0.4}), 0.3);
    EXPECT_DOUBLE_EQ(*macro_average({0.7}), 0.7);
}

TEST(MacroAverage, ExcludesUndefined) {
    EXPECT_DOUBLE_EQ(*macro_average({std::nullopt, 0.5, std::nullopt}), 0.5);
    EXPECT_FALSE(macro_average({std::nullopt, std::nullopt}).has_value());
    EXPECT_FALSE(macro_average({}).has_value());
}

TEST(CategoryRank, StrictDominance) {
    const auto ranks = category_rank({{0.9, 0.8, 0.7}, {0.5, 0.4, 0.3}});
    EXPECT_DOUBLE_EQ(ranks[0], 1.0);
    EXPECT_DOUBLE_EQ(ranks[1], 2.0);
}

TEST(CategoryRank, TiedScoresShareTheRank) {
    // dense ranking: tied systems share a rank, the next distinct value gets
    // the next rank
    const auto ranks = category_rank({{0.5}, {0.5}, {0.3}});
    EXPECT_DOUBLE_EQ(ranks[0], 1.0);
    EXPECT_DOUBLE_EQ(ranks[1], 1.0);
    EXPECT_DOUBLE_EQ(ranks[2], 2.0);
}

TEST(CategoryRank, ShapeMismatch) {
    EXPECT_THROW(category_rank({{0.5, 0.4}, {0.3}}), Error);
    EXPECT_THROW(category_rank({{0.5}}), Error);
}

TEST(CategoryRank, MatchesIndependentDenseOracle) {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t systems = 2 + rng() % 5;
        const size_t cats = 1 + rng() % 6;
        std::vector<std::vector<double>> table(systems, std::vector<double>(cats));
        for (auto& row : table) {
            for (auto& v : row) v = static_cast<double>(rng() % 10) / 10.0; // force some ties
        }
        const auto got = category_rank(table);
        // independent oracle: rank = 1 + number of distinct strictly larger scores
        for (size_t s = 0; s < systems; ++s) {
            double sum = 0.0;
            for (size_t c = 0; c < cats; ++c) {
                std::set<double> larger;
                for (size_t o = 0; o < systems; ++o) {
                    if (table[o][c] > table[s][c]) larger.insert(table[o][c]);
                }
                sum += 1.0 + static_cast<double>(larger.size());
            }
            EXPECT_NEAR(got[s], sum / static_cast<double>(cats), 1e-9);
        }
    }
}

TEST(FixedKTruncate, PrefixSemantics) {
    std::vector<TurnId> ranked;
    for (TurnId i = 1; i <= 100; ++i) ranked.push_back(i);
    const auto first8 = fixed_k_truncate(ranked, 8);
    EXPECT_EQ(first8.size(), 8u);
    EXPECT_EQ(first8.front(), 1);
    EXPECT_EQ(first8.back(), 8);
    EXPECT_EQ(fixed_k_truncate({1, 2, 3}, 32).size(), 3u);
}

TEST(FixedKTruncate, RecallMonotoneInK) {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TurnId> ranked;
        for (TurnId i = 0; i < 64; ++i) ranked.push_back(i);
        std::shuffle(ranked.begin(), ranked.end(), rng);
        std::vector<TurnId> gold;
        for (size_t j = 0; j < 1 + rng() % 5; ++j) gold.push_back(rng() % 64);
        double prev = -1.0;
        for (size_t k : {8u, 16u, 32u, 64u}) {
            const auto score = evidence_metrics(fixed_k_truncate(ranked, k), gold);
            ASSERT_TRUE(score.recall.has_value());
            EXPECT_GE(*score.recall + 1e-12, prev);
            prev = *score.recall;
        }
        // precision at K = |list| equals untruncated precision
        const auto full = evidence_metrics(ranked, gold);
        const auto at_len = evidence_metrics(fixed_k_truncate(ranked, ranked.size()), gold);
        EXPECT_EQ(full.precision, at_len.precision);
    }
}
