#include "hiermem/benchmark.hpp"
#include "hiermem/stub_provider.hpp"
#include "hiermem/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace hiermem;

namespace {

ConversationDataset small_dataset() {
    ConversationDataset ds;
    Conversation conv;
    conv.conversation_id = "c1";
    const char* texts[6] = {
        "the weather was lovely on our drive",   "we planned the picnic for saturday",
        "my new prius is such a smooth car",     "the garden roses bloomed early",
        "the lake trip took two hours by car",   "dinner was pasta again",
    };
    for (TurnId id = 1; id <= 6; ++id) {
        conv.turns.push_back({id, id % 2 ? "Evan" : "Sam", "2023-05-01", texts[id - 1]});
    }
    ds.conversations.push_back(conv);
    ds.questions.push_back({"q1", "c1", Category::SingleHop, "what prius did they get?",
                            "my new prius is such a smooth car", std::nullopt, {3}});
    ds.questions.push_back({"q2", "c1", Category::Adversarial, "did they sell the boat?",
                            "Not mentioned in the conversation", "sold the boat", {}});
    validate_dataset(ds);
    return ds;
}

BenchmarkSetup stub_setup(int theta = 1) {
    BenchmarkSetup setup;
    setup.encoder = std::make_shared<HashedEncoder>(128);
    setup.provider = std::make_shared<ScriptedStubProvider>(StubConfig{.affiliation_theta = theta});
    return setup;
}

} // namespace

TEST(Benchmark, ZeroQuestionDatasetProducesEmptyReport) {
    ConversationDataset ds;
    Conversation conv;
    conv.conversation_id = "c1";
    conv.turns.push_back({1, "Evan", "2023", "hello world"});
    ds.conversations.push_back(conv);

    const BenchmarkReport report = run_benchmark(ds, stub_setup(), {});
    EXPECT_EQ(report.question_count, 0u);
    EXPECT_EQ(report.failure_count, 0u);
    EXPECT_EQ(report.overall_f1, 0.0);
    EXPECT_FALSE(report.macro_recall.has_value());
}

TEST(Benchmark, SmallRunScoresAndAccounts) {
    const BenchmarkReport report = run_benchmark(small_dataset(), stub_setup(), {});
    EXPECT_EQ(report.question_count, 2u);
    EXPECT_EQ(report.failure_count, 0u);
    EXPECT_EQ(report.subset_violations, 0u);

    // q1's answer echoes the gold turn; q2 correctly says not mentioned
    EXPECT_GT(report.per_category_f1.at("single_hop"), 0.9);
    EXPECT_GT(report.per_category_f1.at("adversarial"), 0.9);

    // all three stages saw traffic
    EXPECT_GT(report.memory_construction.call_count, 0u);
    EXPECT_GT(report.retrieval.call_count, 0u);
    EXPECT_EQ(report.answer.call_count, 2u);
}

TEST(Benchmark, AvgKMatchesIndependentRecomputation) {
    const BenchmarkReport report = run_benchmark(small_dataset(), stub_setup(), {});
    double k_sum = 0.0;
    size_t n = 0;
    for (const auto& r : report.results) {
        if (r.failed) continue;
        k_sum += static_cast<double>(r.final_ids.size());
        EXPECT_EQ(r.k, r.final_ids.size());
        ++n;
    }
    ASSERT_GT(n, 0u);
    EXPECT_DOUBLE_EQ(report.avg_k, k_sum / static_cast<double>(n));
}

TEST(Benchmark, StubRunsAreByteIdentical) {
    const auto run = [] {
        return run_benchmark(small_dataset(), stub_setup(), {}).to_json().dump(2);
    };
    EXPECT_EQ(run(), run());
}

TEST(Benchmark, ParallelJobsMatchSerial) {
    const ConversationDataset ds = make_planted_dataset({.groups = 4, .questions_per_group = 2});
    BenchmarkConfig serial_cfg;
    serial_cfg.ingestion.stub_keyword_theta = 2;
    BenchmarkConfig parallel_cfg = serial_cfg;
    parallel_cfg.jobs = 4;

    const BenchmarkReport serial = run_benchmark(ds, stub_setup(2), serial_cfg);
    const BenchmarkReport parallel = run_benchmark(ds, stub_setup(2), parallel_cfg);
    EXPECT_EQ(serial.to_json().dump(), parallel.to_json().dump());
}

TEST(Benchmark, PerQuestionFailuresAreTalliedNotFatal) {
    auto setup = stub_setup();
    auto stub = std::static_pointer_cast<ScriptedStubProvider>(setup.provider);
    stub->set_rule(PromptFamily::FinalQA, [](const StructuredRequest& req) {
        if (req.category == Category::Adversarial) return json{{"broken", true}};
        const auto evidence = req.variables.value("evidence_turns", json::array());
        return json{{"answer", evidence.empty() ? "unknown" : evidence.front().value("text", "")}};
    });
    const BenchmarkReport report = run_benchmark(small_dataset(), setup, {});
    EXPECT_EQ(report.failure_count, 1u);
    EXPECT_EQ(report.question_count, 2u);
    bool saw_failure = false;
    for (const auto& r : report.results) {
        if (r.failed) {
            saw_failure = true;
            EXPECT_FALSE(r.error.empty());
        }
    }
    EXPECT_TRUE(saw_failure);
}

TEST(Benchmark, CostLinesAppearWithPricing) {
    auto setup = stub_setup();
    setup.pricing = PricingTable::hybrid_default();
    const BenchmarkReport report = run_benchmark(small_dataset(), setup, {});
    ASSERT_TRUE(report.cost.has_value());
    ASSERT_EQ(report.cost->lines.size(), 2u);
    double sum = 0.0;
    for (const auto& line : report.cost->lines) sum += line.cost;
    EXPECT_DOUBLE_EQ(report.cost->total_cost, sum);

    // cost arithmetic is exactly reproducible from the reported token totals
    const PricingTable pricing = PricingTable::hybrid_default();
    const double light_expected =
        token_cost(report.memory_construction.prompt_tokens + report.retrieval.prompt_tokens,
                   report.memory_construction.completion_tokens +
                       report.retrieval.completion_tokens,
                   pricing.models.at("light"));
    for (const auto& line : report.cost->lines) {
        if (line.model == "light") EXPECT_DOUBLE_EQ(line.cost, light_expected);
    }
}

TEST(Benchmark, FixedKRowsSweepTheFlatRanking) {
    BenchmarkConfig cfg;
    cfg.fixed_k = {1, 2};
    const BenchmarkReport report = run_benchmark(small_dataset(), stub_setup(), cfg);
    ASSERT_EQ(report.fixed_k_rows.size(), 3u); // 1, 2, full
    EXPECT_EQ(report.fixed_k_rows[0].k_limit, 1u);
    EXPECT_EQ(report.fixed_k_rows[1].k_limit, 2u);
    EXPECT_EQ(report.fixed_k_rows[2].k_limit, 0u);
    EXPECT_LE(report.fixed_k_rows[0].avg_k, report.fixed_k_rows[1].avg_k);
    // recall grows (or holds) with k
    ASSERT_TRUE(report.fixed_k_rows[0].macro_recall && report.fixed_k_rows[2].macro_recall);
    EXPECT_LE(*report.fixed_k_rows[0].macro_recall, *report.fixed_k_rows[2].macro_recall + 1e-12);
}

TEST(Benchmark, ReportFilesAreWrittenAndDeterministic) {
    const auto dir = std::filesystem::temp_directory_path() / "hiermem_report_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "report.json";
    const BenchmarkReport report = run_benchmark(small_dataset(), stub_setup(), {});
    write_report(report, path);
    ASSERT_TRUE(std::filesystem::exists(path));
    ASSERT_TRUE(std::filesystem::exists(dir / "report.tsv"));

    std::ifstream tsv(dir / "report.tsv");
    std::string table((std::istreambuf_iterator<char>(tsv)), std::istreambuf_iterator<char>());
    EXPECT_NE(table.find("overall_f1\t"), std::string::npos);
    EXPECT_NE(table.find("avg_k\t"), std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST(Benchmark, ModesRunOnPlantedCorpusDirectionally) {
    // direction smoke at small scale; the acceptance suite runs the full corpus
    const ConversationDataset ds = make_planted_dataset({.groups = 6, .questions_per_group = 2});
    BenchmarkSetup setup;
    setup.encoder = std::make_shared<NoisyEncoder>(std::make_shared<HashedEncoder>(384), 1.8, 40);
    setup.provider = std::make_shared<ScriptedStubProvider>(StubConfig{.affiliation_theta = 2});
    BenchmarkConfig cfg;
    cfg.ingestion.stub_keyword_theta = 2;

    cfg.retrieval.mode = RetrievalMode::Hierarchical;
    const BenchmarkReport full = run_benchmark(ds, setup, cfg);
    cfg.retrieval.mode = RetrievalMode::FlatFiltered;
    const BenchmarkReport flat = run_benchmark(ds, setup, cfg);

    EXPECT_EQ(full.subset_violations, 0u);
    ASSERT_TRUE(full.macro_recall && flat.macro_recall);
    EXPECT_GE(flat.avg_k, full.avg_k); // flat keeps at least as many turns
}
