// Operator entry point: ingest conversations into per-conversation snapshot
// stores, answer single questions, run benchmarks and ablations, inspect
// snapshots, and run the storage/latency scaling harness.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or input error.

#include "hiermem/benchmark.hpp"
#include "hiermem/http_provider.hpp"
#include "hiermem/metrics.hpp"
#include "hiermem/scaling.hpp"
#include "hiermem/stub_provider.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>

namespace {

using namespace hiermem;

struct CommonOptions {
    bool verbose = false;
    std::string provider = "stub";
    size_t dim = 384;
    std::string encoder = "hashed";
    double noise_eps = 1.8;
    size_t noise_len = 40;
    std::string endpoint = "http://localhost:8080";
    std::string model = "gpt-4o-mini";
    std::string credential_env = "HIERMEM_API_KEY";
    double temperature = 0.0;
    int timeout = 60;
    std::string prompts_dir;
    int theta = 1;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_flag("-v,--verbose", opts.verbose, "print the gateway call log");
    cmd->add_option("--provider", opts.provider, "LLM provider: stub or http")
        ->check(CLI::IsMember({"stub", "http"}));
    cmd->add_option("--dim", opts.dim, "embedding dimension (default 384)");
    cmd->add_option("--encoder", opts.encoder, "encoder: hashed or noisy")
        ->check(CLI::IsMember({"hashed", "noisy"}));
    cmd->add_option("--noise-eps", opts.noise_eps, "noisy encoder amplitude");
    cmd->add_option("--noise-len", opts.noise_len, "noisy encoder length scale");
    cmd->add_option("--endpoint", opts.endpoint, "http provider base url");
    cmd->add_option("--model", opts.model, "http provider model name");
    cmd->add_option("--credential-env", opts.credential_env,
                    "environment variable holding the bearer token");
    cmd->add_option("--temperature", opts.temperature, "http provider temperature");
    cmd->add_option("--timeout", opts.timeout, "http provider timeout, seconds");
    cmd->add_option("--prompts", opts.prompts_dir, "directory of prompt template overrides");
    cmd->add_option("--theta", opts.theta, "stub affiliation keyword-overlap threshold");
}

std::shared_ptr<const Encoder> make_encoder(const CommonOptions& opts) {
    auto hashed = std::make_shared<HashedEncoder>(opts.dim);
    if (opts.encoder == "noisy") {
        return std::make_shared<NoisyEncoder>(hashed, opts.noise_eps, opts.noise_len);
    }
    return hashed;
}

std::shared_ptr<Provider> make_provider(const CommonOptions& opts) {
    if (opts.provider == "http") {
        HttpProviderConfig cfg;
        cfg.base_url = opts.endpoint;
        cfg.model = opts.model;
        cfg.credential_env = opts.credential_env;
        cfg.temperature = opts.temperature;
        cfg.timeout_seconds = opts.timeout;
        return std::make_shared<HttpChatProvider>(cfg);
    }
    return std::make_shared<ScriptedStubProvider>(StubConfig{.affiliation_theta = opts.theta});
}

PromptLibrary make_prompts(const CommonOptions& opts) {
    PromptLibrary lib = PromptLibrary::defaults();
    if (!opts.prompts_dir.empty()) lib.load_directory(opts.prompts_dir);
    return lib;
}

LogSink make_log_sink(const CommonOptions& opts) {
    if (!opts.verbose) return {};
    return [](const std::string& line) { std::cerr << "[log] " << line << "\n"; };
}

void print_call_log(const LlmGateway& gateway) {
    for (const auto& rec : gateway.call_log()) {
        std::cerr << "[call] " << family_name(rec.family);
        if (rec.category) std::cerr << "/" << category_name(*rec.category);
        std::cerr << " stage=" << stage_name(rec.stage) << " attempt=" << rec.attempt
                  << " prompt_tokens=" << rec.usage.prompt_tokens
                  << " completion_tokens=" << rec.usage.completion_tokens
                  << (rec.ok ? " ok" : " invalid") << "\n";
    }
}

void print_usage_summary(const LlmGateway& gateway) {
    for (Stage s : {Stage::MemoryConstruction, Stage::Retrieval, Stage::Answer}) {
        const StageTotals t = gateway.ledger().totals(s);
        std::cout << "tokens." << stage_name(s) << ": prompt=" << t.prompt_tokens
                  << " completion=" << t.completion_tokens << " calls=" << t.call_count << "\n";
    }
}

RetrievalMode parse_mode(const std::string& mode) {
    if (mode == "full") return RetrievalMode::Hierarchical;
    if (mode == "flat") return RetrievalMode::FlatFiltered;
    if (mode == "no-hierarchy") return RetrievalMode::SingleLayer;
    throw CLI::ValidationError("--mode", "unknown mode " + mode);
}

int cmd_ingest(const CommonOptions& opts, const std::string& dataset_path,
               const std::string& store_dir, const IngestionConfig& ing_cfg) {
    const ConversationDataset dataset = load_dataset(dataset_path);
    std::filesystem::create_directories(store_dir);
    auto encoder = make_encoder(opts);
    LlmGateway gateway(make_provider(opts), make_prompts(opts));

    for (const auto& conv : dataset.conversations) {
        MemoryStore store(encoder);
        IngestionEngine engine(store, gateway, ing_cfg, make_log_sink(opts));
        for (const auto& turn : conv.turns) engine.ingest(turn);
        store.check_integrity();
        const auto path = std::filesystem::path(store_dir) / (conv.conversation_id + ".mem");
        store.snapshot(path);
        const StoreStats s = store.stats();
        std::cout << conv.conversation_id << ": turns=" << s.turn_count
                  << " events=" << s.event_count << " links=" << s.link_count
                  << " bytes=" << s.serialized_bytes << " -> " << path.string() << "\n";
    }
    print_usage_summary(gateway);
    if (opts.verbose) print_call_log(gateway);
    return 0;
}

int cmd_query(const CommonOptions& opts, const std::string& store_path,
              const std::string& question, const std::string& category_name_str,
              const std::string& distractor, RetrievalMode mode) {
    const Category category = category_from_name(category_name_str);
    if (category == Category::Adversarial && distractor.empty()) {
        std::cerr << "error: adversarial questions require --distractor\n";
        return 2;
    }
    auto encoder = make_encoder(opts);
    MemoryStore store = MemoryStore::load(store_path, encoder);
    LlmGateway gateway(make_provider(opts), make_prompts(opts));
    RetrievalConfig cfg;
    cfg.mode = mode;
    RetrievalEngine engine(store, gateway, cfg, make_log_sink(opts));

    const RetrievalResult r = engine.retrieve(question);
    std::cout << "evidence (" << r.final_evidence.size() << " turns):\n";
    for (const auto& item : r.final_evidence.items) {
        std::cout << "  [" << item.turn.turn_id << "] (" << provenance_name(item.provenance)
                  << ") " << item.turn.speaker << ": " << item.turn.text << "\n";
    }
    const std::optional<std::string> dis =
        distractor.empty() ? std::nullopt : std::make_optional(distractor);
    std::cout << "answer: " << engine.answer(question, r.final_evidence, category, dis) << "\n";
    if (opts.verbose) print_call_log(gateway);
    return 0;
}

int cmd_eval(const CommonOptions& opts, const std::string& dataset_path,
             const std::vector<std::string>& modes, const std::vector<size_t>& fixed_k,
             const std::string& pricing_path, const std::string& out_path, size_t jobs,
             IngestionConfig ing_cfg, RetrievalConfig ret_cfg) {
    const ConversationDataset dataset = load_dataset(dataset_path);
    BenchmarkSetup setup;
    setup.encoder = make_encoder(opts);
    setup.provider = make_provider(opts);
    setup.prompts = make_prompts(opts);
    setup.log = make_log_sink(opts);
    if (!pricing_path.empty()) {
        std::ifstream in(pricing_path);
        if (!in) throw IoError("cannot open pricing file " + pricing_path);
        setup.pricing = PricingTable::from_json(json::parse(in));
    }

    ing_cfg.stub_keyword_theta = opts.theta;
    BenchmarkConfig cfg;
    cfg.ingestion = ing_cfg;
    cfg.retrieval = ret_cfg;
    cfg.fixed_k = fixed_k;
    cfg.jobs = jobs;

    std::vector<std::pair<std::string, BenchmarkReport>> reports;
    for (const auto& mode : modes) {
        cfg.retrieval.mode = parse_mode(mode);
        // a fresh provider per mode keeps ledgers independent
        setup.provider = make_provider(opts);
        BenchmarkReport report = run_benchmark(dataset, setup, cfg);

        std::filesystem::path path(out_path);
        if (modes.size() > 1) {
            path.replace_extension();
            path += "." + mode + ".json";
        }
        write_report(report, path);
        std::cout << "=== mode " << mode << " -> " << path.string() << " ===\n";
        std::cout << report.flat_table();
        reports.emplace_back(mode, std::move(report));
    }

    if (reports.size() >= 2) {
        // category-wise ranking across the compared modes
        std::set<std::string> cats;
        for (const auto& [_, rep] : reports) {
            for (const auto& [cat, __] : rep.per_category_f1) cats.insert(cat);
        }
        std::vector<std::vector<double>> table;
        for (const auto& [_, rep] : reports) {
            std::vector<double> row;
            for (const auto& cat : cats) {
                auto it = rep.per_category_f1.find(cat);
                row.push_back(it == rep.per_category_f1.end() ? 0.0 : it->second);
            }
            table.push_back(std::move(row));
        }
        const std::vector<double> ranks = category_rank(table);
        std::cout << "=== category ranking (lower is better) ===\n";
        for (size_t i = 0; i < reports.size(); ++i) {
            std::cout << reports[i].first << "\t" << ranks[i] << "\n";
        }
    }
    return 0;
}

int cmd_stats(const CommonOptions& opts, const std::string& store_path) {
    MemoryStore store = MemoryStore::load(store_path, make_encoder(opts));
    const StoreStats s = store.stats();
    std::cout << "turns\t" << s.turn_count << "\n"
              << "events\t" << s.event_count << "\n"
              << "links\t" << s.link_count << "\n"
              << "serialized_bytes\t" << s.serialized_bytes << "\n";
    return 0;
}

int cmd_scale_bench(const CommonOptions& opts, const std::vector<size_t>& sizes, size_t queries,
                    size_t top_k) {
    ScalingConfig cfg;
    cfg.queries = queries;
    cfg.top_k = top_k;
    const auto rows = run_scaling(sizes, make_encoder(opts), cfg);
    std::cout << scaling_table(rows);
    return 0;
}

int cmd_snapshot(const CommonOptions& opts, const std::string& store_path, bool verify) {
    std::ifstream in(store_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + store_path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "HMEMSNAP") {
        throw FormatError("not a memory snapshot: " + store_path);
    }
    const std::uint32_t version = snapshot_detail::get_u32(in);
    const std::uint32_t dim = snapshot_detail::get_u32(in);
    std::cout << "format\tHMEMSNAP\n"
              << "version\t" << version << "\n"
              << "dimension\t" << dim << "\n"
              << "file_bytes\t" << std::filesystem::file_size(store_path) << "\n";
    if (verify) {
        CommonOptions dim_opts = opts;
        dim_opts.dim = dim;
        MemoryStore store = MemoryStore::load(store_path, make_encoder(dim_opts));
        store.check_integrity();
        const StoreStats s = store.stats();
        std::cout << "turns\t" << s.turn_count << "\n"
                  << "events\t" << s.event_count << "\n"
                  << "links\t" << s.link_count << "\n"
                  << "integrity\tok\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-level event-turn conversational memory engine"};
    app.require_subcommand(1);

    CommonOptions opts;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "ingest a dataset into snapshot stores");
    std::string dataset_path, store_dir;
    IngestionConfig ing_cfg;
    ingest->add_option("--dataset", dataset_path, "dataset file")->required();
    ingest->add_option("--store", store_dir, "output directory for snapshots")->required();
    ingest->add_option("--window", ing_cfg.window_size, "turn-analysis sliding window m");
    ingest->add_option("--tau", ing_cfg.adaptive_threshold, "adaptive update threshold tau");
    ingest->add_option("--k-event", ing_cfg.candidate_events, "affiliation candidate count");
    add_common_flags(ingest, opts);

    // query
    auto* query = app.add_subcommand("query", "answer one question against a store");
    std::string store_path, question, category = "single_hop", distractor;
    bool no_hierarchy = false, flat = false;
    query->add_option("--store", store_path, "snapshot file")->required();
    query->add_option("--question", question, "question text")->required();
    query->add_option("--category", category, "question category")
        ->check(CLI::IsMember({"single_hop", "multi_hop", "temporal", "open_domain",
                               "adversarial"}));
    query->add_option("--distractor", distractor, "adversarial candidate answer");
    query->add_flag("--no-hierarchy", no_hierarchy, "passive single-layer retrieval");
    query->add_flag("--flat", flat, "flat top-N + filter retrieval");
    add_common_flags(query, opts);

    // eval
    auto* eval = app.add_subcommand("eval", "run the benchmark and write a report");
    std::string modes_str = "full", fixed_k_str, pricing_path, out_path = "report.json";
    size_t jobs = 1;
    RetrievalConfig ret_cfg;
    eval->add_option("--dataset", dataset_path, "dataset file")->required();
    eval->add_option("--mode", modes_str, "full, flat, no-hierarchy (comma separated)");
    eval->add_option("--fixed-k", fixed_k_str, "comma-separated truncation sweep, e.g. 8,16,32");
    eval->add_option("--pricing", pricing_path, "pricing table json");
    eval->add_option("--out", out_path, "report output path");
    eval->add_option("--jobs", jobs, "questions evaluated concurrently");
    eval->add_option("--window", ing_cfg.window_size, "turn-analysis sliding window m");
    eval->add_option("--tau", ing_cfg.adaptive_threshold, "adaptive update threshold tau");
    eval->add_option("--k-event", ret_cfg.k_event, "event-layer retrieval size");
    eval->add_option("--k-turn", ret_cfg.k_turn, "turn-layer retrieval size");
    eval->add_option("--flat-top-n", ret_cfg.flat_top_n, "flat baseline cut size");
    add_common_flags(eval, opts);

    // stats
    auto* stats = app.add_subcommand("stats", "print store statistics");
    stats->add_option("--store", store_path, "snapshot file")->required();
    add_common_flags(stats, opts);

    // scale-bench
    auto* scale = app.add_subcommand("scale-bench", "storage and latency scaling table");
    std::string sizes_str = "100,10000,100000";
    size_t queries = 100, top_k = 10;
    scale->add_option("--sizes", sizes_str, "comma-separated store sizes");
    scale->add_option("--queries", queries, "latency samples per size");
    scale->add_option("--top-k", top_k, "k for the latency query");
    add_common_flags(scale, opts);

    // snapshot
    auto* snapshot = app.add_subcommand("snapshot", "inspect or verify a snapshot file");
    bool verify = false;
    snapshot->add_option("--store", store_path, "snapshot file")->required();
    snapshot->add_flag("--verify", verify, "load the snapshot and check invariants");
    add_common_flags(snapshot, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto parse_size_list = [](const std::string& s) {
        std::vector<size_t> out;
        std::string cur;
        for (char ch : s + ",") {
            if (ch == ',') {
                if (!cur.empty()) out.push_back(std::stoull(cur));
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        return out;
    };
    auto parse_string_list = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char ch : s + ",") {
            if (ch == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        return out;
    };

    try {
        if (ingest->parsed()) {
            ing_cfg.stub_keyword_theta = opts.theta;
            return cmd_ingest(opts, dataset_path, store_dir, ing_cfg);
        }
        if (query->parsed()) {
            if (no_hierarchy && flat) {
                std::cerr << "error: --no-hierarchy and --flat are mutually exclusive\n";
                return 2;
            }
            const RetrievalMode mode = no_hierarchy ? RetrievalMode::SingleLayer
                                       : flat       ? RetrievalMode::FlatFiltered
                                                    : RetrievalMode::Hierarchical;
            return cmd_query(opts, store_path, question, category, distractor, mode);
        }
        if (eval->parsed()) {
            return cmd_eval(opts, dataset_path, parse_string_list(modes_str),
                            parse_size_list(fixed_k_str), pricing_path, out_path, jobs, ing_cfg,
                            ret_cfg);
        }
        if (stats->parsed()) {
            return cmd_stats(opts, store_path);
        }
        if (scale->parsed()) {
            return cmd_scale_bench(opts, parse_size_list(sizes_str), queries, top_k);
        }
        if (snapshot->parsed()) {
            return cmd_snapshot(opts, store_path, verify);
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
