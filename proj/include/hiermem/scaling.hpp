#pragma once
// Storage and latency scaling harness: builds stores of N fixed-size
// synthetic turns (hierarchical and turns-only), sizes their snapshots, and
// measures the median vector-only top-k query latency. No LLM calls are
// involved anywhere on this path.

#include "hiermem/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

namespace hiermem {

struct ScalingRow {
    size_t turns = 0;
    size_t events = 0;
    std::uint64_t hierarchical_bytes = 0;
    std::uint64_t flat_bytes = 0;
    double event_overhead = 0.0; // hierarchical vs turns-only, fractional
    double median_latency_ms = 0.0;
};

struct ScalingConfig {
    size_t queries = 100; // latency sample count per size
    size_t top_k = 10;
    size_t turns_per_event = 100;
};

inline double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

inline ScalingRow measure_scaling_point(size_t n, const std::shared_ptr<const Encoder>& encoder,
                                        const ScalingConfig& cfg = {}) {
    ScalingRow row;
    row.turns = n;

    MemoryStore hier =
        build_scaling_store(n, encoder, {.turns_per_event = cfg.turns_per_event,
                                         .hierarchical = true});
    MemoryStore flat =
        build_scaling_store(n, encoder, {.turns_per_event = cfg.turns_per_event,
                                         .hierarchical = false});
    row.events = hier.event_count();
    row.hierarchical_bytes = hier.stats().serialized_bytes;
    row.flat_bytes = flat.stats().serialized_bytes;
    row.event_overhead =
        row.flat_bytes == 0
            ? 0.0
            : static_cast<double>(row.hierarchical_bytes) / static_cast<double>(row.flat_bytes) -
                  1.0;

    std::vector<double> latencies;
    latencies.reserve(cfg.queries);
    for (size_t q = 0; q < cfg.queries; ++q) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "probe%06zu note%06zu item%06zu", q, (q * 31) % 1000000,
                      (q * 17) % 1000000);
        const Vec query = encoder->encode(buf);
        const auto start = std::chrono::steady_clock::now();
        volatile size_t sink = hier.index().top_k(query, Layer::Turn, cfg.top_k).size();
        (void)sink;
        const auto end = std::chrono::steady_clock::now();
        latencies.push_back(std::chrono::duration<double, std::milli>(end - start).count());
    }
    row.median_latency_ms = median_of(std::move(latencies));
    return row;
}

inline std::vector<ScalingRow> run_scaling(const std::vector<size_t>& sizes,
                                           const std::shared_ptr<const Encoder>& encoder,
                                           const ScalingConfig& cfg = {}) {
    std::vector<ScalingRow> rows;
    rows.reserve(sizes.size());
    for (size_t n : sizes) rows.push_back(measure_scaling_point(n, encoder, cfg));
    return rows;
}

inline std::string scaling_table(const std::vector<ScalingRow>& rows) {
    std::string out = "turns\tevents\tstorage_bytes\tflat_bytes\toverhead\tmedian_topk_ms\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%zu\t%zu\t%llu\t%llu\t%.4f\t%.4f\n", r.turns, r.events,
                      static_cast<unsigned long long>(r.hierarchical_bytes),
                      static_cast<unsigned long long>(r.flat_bytes), r.event_overhead,
                      r.median_latency_ms);
        out += buf;
    }
    return out;
}

} // namespace hiermem
