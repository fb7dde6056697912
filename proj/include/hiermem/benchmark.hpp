#pragma once
// End-to-end benchmark: ingest each conversation into its own store, run
// every question through the configured retrieval mode, score answers and
// evidence sets, and aggregate a report with token and cost accounting.
// Per-question failures are tallied without aborting the run.

#include "hiermem/dataset.hpp"
#include "hiermem/gateway.hpp"
#include "hiermem/ingestion.hpp"
#include "hiermem/metrics.hpp"
#include "hiermem/retrieval.hpp"

#include <cstdio>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace hiermem {

struct BenchmarkConfig {
    IngestionConfig ingestion;
    RetrievalConfig retrieval;
    std::vector<size_t> fixed_k; // optional truncation sweep over the flat ranking
    size_t jobs = 1;             // questions evaluated concurrently per conversation
};

// Everything the run needs wired in by the caller.
struct BenchmarkSetup {
    std::shared_ptr<const Encoder> encoder;
    std::shared_ptr<Provider> provider;
    PromptLibrary prompts = PromptLibrary::defaults();
    GatewayConfig gateway;
    std::optional<PricingTable> pricing;
    LogSink log;
};

struct QuestionResult {
    std::string question_id;
    std::string conversation_id;
    Category category = Category::SingleHop;
    std::string predicted;
    std::vector<TurnId> final_ids;
    std::optional<double> precision;
    std::optional<double> recall;
    size_t k = 0;
    double f1 = 0.0;
    bool failed = false;
    std::string error;
};

struct FixedKRow {
    size_t k_limit = 0; // 0 means the untruncated list
    std::optional<double> macro_precision;
    std::optional<double> macro_recall;
    double avg_k = 0.0;
};

struct BenchmarkReport {
    std::string mode;
    size_t question_count = 0;
    size_t failure_count = 0;
    size_t subset_violations = 0;
    std::map<std::string, double> per_category_f1;
    std::map<std::string, size_t> per_category_count;
    double overall_f1 = 0.0;
    double avg_k = 0.0;
    std::optional<double> macro_precision;
    std::optional<double> macro_recall;
    StageTotals memory_construction;
    StageTotals retrieval;
    StageTotals answer;
    std::optional<CostReport> cost;
    std::vector<FixedKRow> fixed_k_rows;
    std::vector<QuestionResult> results;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["mode"] = mode;
        j["question_count"] = question_count;
        j["failure_count"] = failure_count;
        j["subset_violations"] = subset_violations;
        j["overall_f1"] = overall_f1;
        j["per_category_f1"] = per_category_f1;
        j["avg_k"] = avg_k;
        j["macro_precision"] = macro_precision ? nlohmann::ordered_json(*macro_precision)
                                               : nlohmann::ordered_json(nullptr);
        j["macro_recall"] = macro_recall ? nlohmann::ordered_json(*macro_recall)
                                         : nlohmann::ordered_json(nullptr);
        auto stage_json = [](const StageTotals& t) {
            return nlohmann::ordered_json{{"prompt_tokens", t.prompt_tokens},
                                          {"completion_tokens", t.completion_tokens},
                                          {"call_count", t.call_count}};
        };
        j["usage"] = {{"memory_construction", stage_json(memory_construction)},
                      {"retrieval", stage_json(retrieval)},
                      {"answer", stage_json(answer)}};
        if (cost) {
            nlohmann::ordered_json lines = nlohmann::ordered_json::array();
            for (const auto& line : cost->lines) {
                lines.push_back({{"model", line.model},
                                 {"stages", line.stages},
                                 {"prompt_tokens", line.prompt_tokens},
                                 {"completion_tokens", line.completion_tokens},
                                 {"cost", line.cost}});
            }
            j["cost"] = {{"lines", lines}, {"total", cost->total_cost}};
        }
        if (!fixed_k_rows.empty()) {
            nlohmann::ordered_json rows = nlohmann::ordered_json::array();
            for (const auto& row : fixed_k_rows) {
                rows.push_back(
                    {{"k", row.k_limit == 0 ? nlohmann::ordered_json("full")
                                            : nlohmann::ordered_json(row.k_limit)},
                     {"macro_precision", row.macro_precision
                                             ? nlohmann::ordered_json(*row.macro_precision)
                                             : nlohmann::ordered_json(nullptr)},
                     {"macro_recall", row.macro_recall ? nlohmann::ordered_json(*row.macro_recall)
                                                       : nlohmann::ordered_json(nullptr)},
                     {"avg_k", row.avg_k}});
            }
            j["fixed_k"] = rows;
        }
        nlohmann::ordered_json results_json = nlohmann::ordered_json::array();
        for (const auto& r : results) {
            results_json.push_back(
                {{"question_id", r.question_id},
                 {"category", category_name(r.category)},
                 {"predicted", r.predicted},
                 {"final_ids", r.final_ids},
                 {"precision", r.precision ? nlohmann::ordered_json(*r.precision)
                                           : nlohmann::ordered_json(nullptr)},
                 {"recall", r.recall ? nlohmann::ordered_json(*r.recall)
                                     : nlohmann::ordered_json(nullptr)},
                 {"k", r.k},
                 {"f1", r.f1},
                 {"failed", r.failed}});
        }
        j["results"] = results_json;
        return j;
    }

    // One metric per line, tab-separated, for diffing.
    std::string flat_table() const {
        char buf[128];
        std::string out;
        auto add = [&](const std::string& key, const std::string& value) {
            out += key;
            out += "\t";
            out += value;
            out += "\n";
        };
        auto num = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            return std::string(buf);
        };
        add("mode", mode);
        add("questions", std::to_string(question_count));
        add("failures", std::to_string(failure_count));
        add("subset_violations", std::to_string(subset_violations));
        add("overall_f1", num(overall_f1));
        for (const auto& [cat, f1] : per_category_f1) add("f1." + cat, num(f1));
        add("avg_k", num(avg_k));
        add("macro_precision", macro_precision ? num(*macro_precision) : "n/a");
        add("macro_recall", macro_recall ? num(*macro_recall) : "n/a");
        auto stage = [&](const std::string& name, const StageTotals& t) {
            add("tokens." + name + ".prompt", std::to_string(t.prompt_tokens));
            add("tokens." + name + ".completion", std::to_string(t.completion_tokens));
            add("tokens." + name + ".calls", std::to_string(t.call_count));
        };
        stage("memory_construction", memory_construction);
        stage("retrieval", retrieval);
        stage("answer", answer);
        if (cost) {
            for (const auto& line : cost->lines) {
                add("cost." + line.model, num(line.cost));
            }
            add("cost.total", num(cost->total_cost));
        }
        for (const auto& row : fixed_k_rows) {
            const std::string key =
                "fixed_k." + (row.k_limit == 0 ? std::string("full") : std::to_string(row.k_limit));
            add(key + ".precision", row.macro_precision ? num(*row.macro_precision) : "n/a");
            add(key + ".recall", row.macro_recall ? num(*row.macro_recall) : "n/a");
            add(key + ".avg_k", num(row.avg_k));
        }
        return out;
    }
};

namespace benchmark_detail {

// The subset-chain invariant of guided retrieval, re-checked per question.
inline bool subset_chain_holds(const RetrievalResult& r, const MemoryStore& store) {
    std::set<TurnId> semantic;
    for (const auto& s : r.semantic_turns) semantic.insert(s.id);
    std::set<TurnId> predicted(r.predicted.begin(), r.predicted.end());

    std::set<TurnId> expected_candidates = semantic;
    expected_candidates.insert(predicted.begin(), predicted.end());
    const std::vector<TurnId> cand_ids = r.candidates.ids();
    if (std::set<TurnId>(cand_ids.begin(), cand_ids.end()) != expected_candidates) return false;

    for (TurnId id : r.final_evidence.ids()) {
        if (!expected_candidates.count(id)) return false;
    }
    std::set<TurnId> reachable;
    for (const auto& ev : r.semantic_events) {
        for (TurnId id : store.event(ev.id).link_set) reachable.insert(id);
    }
    for (TurnId id : predicted) {
        if (!reachable.count(id)) return false;
    }
    return true;
}

} // namespace benchmark_detail

inline BenchmarkReport run_benchmark(const ConversationDataset& dataset,
                                     const BenchmarkSetup& setup, const BenchmarkConfig& config) {
    auto gateway = std::make_shared<LlmGateway>(setup.provider, setup.prompts, setup.gateway);
    BenchmarkReport report;
    report.mode = retrieval_mode_name(config.retrieval.mode);
    report.question_count = dataset.questions.size();
    report.results.resize(dataset.questions.size());

    // Per-question rows of the fixed-K sweep, by question index.
    std::vector<std::vector<TurnId>> ranked_lists(dataset.questions.size());
    std::vector<const Question*> questions(dataset.questions.size());
    for (size_t i = 0; i < dataset.questions.size(); ++i) questions[i] = &dataset.questions[i];

    for (const auto& conv : dataset.conversations) {
        MemoryStore store(setup.encoder);
        IngestionEngine ingestion(store, *gateway, config.ingestion, setup.log);
        for (const auto& turn : conv.turns) ingestion.ingest(turn);
        store.check_integrity();

        std::vector<size_t> question_indices;
        for (size_t i = 0; i < dataset.questions.size(); ++i) {
            if (dataset.questions[i].conversation_id == conv.conversation_id) {
                question_indices.push_back(i);
            }
        }

        auto evaluate_one = [&](size_t qi) {
            const Question& q = *questions[qi];
            RetrievalEngine engine(store, *gateway, config.retrieval, setup.log);
            QuestionResult& res = report.results[qi];
            res.question_id = q.question_id;
            res.conversation_id = q.conversation_id;
            res.category = q.category;
            try {
                const RetrievalResult r = engine.retrieve(q.question);
                if (config.retrieval.mode == RetrievalMode::Hierarchical &&
                    !benchmark_detail::subset_chain_holds(r, store)) {
                    res.error = "subset chain violated";
                }
                res.predicted = engine.answer(q.question, r.final_evidence, q.category,
                                              q.distractor);
                res.final_ids = r.final_evidence.ids();
                const EvidenceScore score = evidence_metrics(res.final_ids, q.gold_evidence);
                res.precision = score.precision;
                res.recall = score.recall;
                res.k = score.k;
                res.f1 = token_f1(res.predicted, q.gold_answer);
            } catch (const std::exception& e) {
                res.failed = true;
                res.error = e.what();
            }
            if (!config.fixed_k.empty()) {
                RetrievalEngine ranker(store, *gateway, config.retrieval);
                std::vector<TurnId> ids;
                for (const auto& s : ranker.flat_ranked(q.question, config.retrieval.flat_top_n)) {
                    ids.push_back(s.id);
                }
                ranked_lists[qi] = std::move(ids);
            }
        };

        if (config.jobs <= 1 || question_indices.size() <= 1) {
            for (size_t qi : question_indices) evaluate_one(qi);
        } else {
            const size_t workers = std::min(config.jobs, question_indices.size());
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    for (size_t i = w; i < question_indices.size(); i += workers) {
                        evaluate_one(question_indices[i]);
                    }
                });
            }
            for (auto& t : pool) t.join();
        }
    }

    // Aggregates, in question order.
    std::vector<std::optional<double>> precisions, recalls;
    std::map<std::string, double> cat_sums;
    double f1_sum = 0.0;
    double k_sum = 0.0;
    size_t scored = 0;
    for (const auto& res : report.results) {
        if (res.failed) {
            ++report.failure_count;
            continue;
        }
        if (!res.error.empty()) ++report.subset_violations;
        ++scored;
        f1_sum += res.f1;
        k_sum += static_cast<double>(res.k);
        precisions.push_back(res.precision);
        recalls.push_back(res.recall);
        cat_sums[category_name(res.category)] += res.f1;
        report.per_category_count[category_name(res.category)]++;
    }
    if (scored > 0) {
        report.overall_f1 = f1_sum / static_cast<double>(scored);
        report.avg_k = k_sum / static_cast<double>(scored);
    }
    for (const auto& [cat, sum] : cat_sums) {
        report.per_category_f1[cat] = sum / static_cast<double>(report.per_category_count[cat]);
    }
    report.macro_precision = macro_average(precisions);
    report.macro_recall = macro_average(recalls);

    if (!config.fixed_k.empty()) {
        std::vector<size_t> limits = config.fixed_k;
        limits.push_back(0); // the untruncated list
        for (size_t limit : limits) {
            FixedKRow row;
            row.k_limit = limit;
            std::vector<std::optional<double>> ps, rs;
            double ks = 0.0;
            size_t n = 0;
            for (size_t qi = 0; qi < dataset.questions.size(); ++qi) {
                const std::vector<TurnId>& ranked = ranked_lists[qi];
                const std::vector<TurnId> ids =
                    limit == 0 ? ranked : fixed_k_truncate(ranked, limit);
                const EvidenceScore score =
                    evidence_metrics(ids, dataset.questions[qi].gold_evidence);
                ps.push_back(score.precision);
                rs.push_back(score.recall);
                ks += static_cast<double>(score.k);
                ++n;
            }
            row.macro_precision = macro_average(ps);
            row.macro_recall = macro_average(rs);
            row.avg_k = n > 0 ? ks / static_cast<double>(n) : 0.0;
            report.fixed_k_rows.push_back(row);
        }
    }

    report.memory_construction = gateway->ledger().totals(Stage::MemoryConstruction);
    report.retrieval = gateway->ledger().totals(Stage::Retrieval);
    report.answer = gateway->ledger().totals(Stage::Answer);
    if (setup.pricing) {
        report.cost = cost_report(gateway->ledger(), *setup.pricing);
    }
    return report;
}

inline void write_report(const BenchmarkReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report " + path.string());
    out << report.to_json().dump(2) << "\n";
    std::filesystem::path table_path = path;
    table_path.replace_extension(".tsv");
    std::ofstream table(table_path);
    if (!table) throw IoError("cannot write report table " + table_path.string());
    table << report.flat_table();
}

} // namespace hiermem
