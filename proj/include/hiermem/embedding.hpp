#pragma once
// Dense-vector encoding and exact cosine top-k retrieval over the two node
// layers. The index is a brute-force scan over contiguous float storage:
// corpus sizes are small and the scaling harness measures exactly this
// vector-only computation, so no ANN structure is used.

#include "hiermem/errors.hpp"
#include "hiermem/text.hpp"
#include "hiermem/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

namespace hiermem {

using Vec = std::vector<float>;

enum class Layer { Turn, Event };

inline const char* layer_name(Layer layer) {
    return layer == Layer::Turn ? "turn" : "event";
}

struct ScoredId {
    std::int64_t id = 0;
    double score = 0.0;
};

// Cosine similarity a.b / (|a||b|). Both vectors must share a dimension and
// neither may be the zero (null) embedding.
inline double cosine(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatchError("cosine: dimension mismatch " +
                                     std::to_string(a.size()) + " vs " +
                                     std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw ZeroNormError("cosine: zero-norm vector");
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Text -> fixed-dimension vector. Implementations must be deterministic:
// identical text yields an identical vector.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual size_t dimension() const = 0;
    virtual Vec encode(const std::string& text) const = 0;
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

// Deterministic test encoder: each lowercase token is hashed to a bucket and
// a sign, accumulated, then L2-normalized. Shared tokens produce higher
// cosine similarity; no model dependency. Text with no tokens maps to the
// null (all-zero) embedding, which never participates in top-k.
class HashedEncoder : public Encoder {
public:
    explicit HashedEncoder(size_t dim = 384) : dim_(dim) {}

    size_t dimension() const override { return dim_; }

    Vec encode(const std::string& text) const override {
        Vec v(dim_, 0.0f);
        for (auto& tok : tokenize(text)) {
            const std::uint64_t h = detail::fnv1a64(tok);
            const size_t idx = static_cast<size_t>(h % dim_);
            const float sign = ((h >> 32) & 1ULL) ? 1.0f : -1.0f;
            v[idx] += sign;
        }
        l2_normalize(v);
        return v;
    }

    static void l2_normalize(Vec& v) {
        double norm = 0.0;
        for (float x : v) norm += static_cast<double>(x) * x;
        if (norm == 0.0) return; // null embedding stays null
        const float inv = static_cast<float>(1.0 / std::sqrt(norm));
        for (float& x : v) x *= inv;
    }

private:
    size_t dim_;
};

// Wraps a base encoder and mixes in a deterministic text-keyed noise vector.
// Models short texts drifting toward superficially similar distractors:
// noise amplitude is epsilon for texts up to length_scale characters and
// decays proportionally for longer texts, so long summaries stay stable.
class NoisyEncoder : public Encoder {
public:
    NoisyEncoder(std::shared_ptr<const Encoder> base, double epsilon,
                 size_t length_scale = 60, std::uint64_t seed = 0x9a3c0ffee1ULL)
        : base_(std::move(base)), epsilon_(epsilon), length_scale_(length_scale), seed_(seed) {}

    size_t dimension() const override { return base_->dimension(); }

    Vec encode(const std::string& text) const override {
        Vec v = base_->encode(text);
        double norm = 0.0;
        for (float x : v) norm += static_cast<double>(x) * x;
        if (norm == 0.0) return v; // keep null embeddings null

        const double scale =
            epsilon_ * std::min(1.0, static_cast<double>(length_scale_) /
                                         static_cast<double>(std::max<size_t>(text.size(), 1)));
        if (scale <= 0.0) return v;

        std::uint64_t state = detail::fnv1a64(text, seed_);
        Vec noise(v.size(), 0.0f);
        for (float& x : noise) {
            const std::uint64_t r = detail::splitmix64(state);
            // 53 bits -> [0, 1) -> [-1, 1)
            x = static_cast<float>(static_cast<double>(r >> 11) / 9007199254740992.0 * 2.0 - 1.0);
        }
        HashedEncoder::l2_normalize(noise);
        for (size_t i = 0; i < v.size(); ++i) {
            v[i] += static_cast<float>(scale) * noise[i];
        }
        HashedEncoder::l2_normalize(v);
        return v;
    }

private:
    std::shared_ptr<const Encoder> base_;
    double epsilon_;
    size_t length_scale_;
    std::uint64_t seed_;
};

// Exact top-k index over the turn and event layers. Vectors live in one
// contiguous buffer per layer; norms are precomputed at registration.
// Reads (top_k, vector_of) are freely concurrent; registration and updates
// require writer exclusion, the same contract as the memory store.
class EmbeddingIndex {
public:
    explicit EmbeddingIndex(std::shared_ptr<const Encoder> encoder)
        : encoder_(std::move(encoder)) {}

    size_t dimension() const { return encoder_->dimension(); }
    const Encoder& encoder() const { return *encoder_; }

    size_t size(Layer layer) const { return store(layer).ids.size(); }

    bool contains(Layer layer, std::int64_t id) const {
        const auto& s = store(layer);
        return s.slot.find(id) != s.slot.end();
    }

    void register_vector(Layer layer, std::int64_t id, Vec v) {
        check_dim(v.size());
        auto& s = store(layer);
        if (s.slot.count(id)) {
            throw DuplicateRegistrationError("id " + std::to_string(id) +
                                             " already registered in " + layer_name(layer) +
                                             " layer");
        }
        s.slot.emplace(id, s.ids.size());
        s.ids.push_back(id);
        s.data.insert(s.data.end(), v.begin(), v.end());
        s.norms.push_back(norm_of(v));
    }

    std::int64_t encode_and_register(const std::string& text, Layer layer, std::int64_t id) {
        register_vector(layer, id, encoder_->encode(text));
        return id;
    }

    void update_vector(Layer layer, std::int64_t id, Vec v) {
        check_dim(v.size());
        auto& s = store(layer);
        auto it = s.slot.find(id);
        if (it == s.slot.end()) {
            throw UnknownIdError("id " + std::to_string(id) + " not registered in " +
                                 std::string(layer_name(layer)) + " layer");
        }
        std::copy(v.begin(), v.end(), s.data.begin() + it->second * dimension());
        s.norms[it->second] = norm_of(v);
    }

    void encode_and_update(const std::string& text, Layer layer, std::int64_t id) {
        update_vector(layer, id, encoder_->encode(text));
    }

    Vec vector_of(Layer layer, std::int64_t id) const {
        const auto& s = store(layer);
        auto it = s.slot.find(id);
        if (it == s.slot.end()) {
            throw UnknownIdError("id " + std::to_string(id) + " not registered in " +
                                 std::string(layer_name(layer)) + " layer");
        }
        const size_t d = dimension();
        return Vec(s.data.begin() + it->second * d, s.data.begin() + (it->second + 1) * d);
    }

    // Exactly min(k, layer population) results, descending score, ties broken
    // by ascending id. Null embeddings on either side never participate.
    std::vector<ScoredId> top_k(const Vec& query, Layer layer, size_t k) const {
        check_dim(query.size());
        if (k == 0) {
            throw Error("top_k: k must be >= 1");
        }
        const double qnorm = norm_of(query);
        const auto& s = store(layer);
        if (qnorm == 0.0 || s.ids.empty()) return {};

        const size_t d = dimension();
        std::vector<ScoredId> scored;
        scored.reserve(s.ids.size());
        for (size_t i = 0; i < s.ids.size(); ++i) {
            if (s.norms[i] == 0.0) continue; // null embedding
            const float* row = s.data.data() + i * d;
            double dot = 0.0;
            for (size_t j = 0; j < d; ++j) dot += static_cast<double>(query[j]) * row[j];
            scored.push_back({s.ids[i], dot / (qnorm * s.norms[i])});
        }
        const size_t n = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + n, scored.end(),
                          [](const ScoredId& a, const ScoredId& b) {
                              if (a.score != b.score) return a.score > b.score;
                              return a.id < b.id;
                          });
        scored.resize(n);
        return scored;
    }

    std::vector<ScoredId> top_k_text(const std::string& text, Layer layer, size_t k) const {
        return top_k(encoder_->encode(text), layer, k);
    }

    // Registration-order walk, used by the snapshot writer.
    template <typename F>
    void for_each(Layer layer, F&& fn) const {
        const auto& s = store(layer);
        const size_t d = dimension();
        for (size_t i = 0; i < s.ids.size(); ++i) {
            fn(s.ids[i], s.data.data() + i * d);
        }
    }

    void clear() {
        turn_ = {};
        event_ = {};
    }

private:
    struct LayerStore {
        std::vector<std::int64_t> ids;
        std::vector<float> data; // row-major, ids.size() x dim
        std::vector<double> norms;
        std::unordered_map<std::int64_t, size_t> slot;
    };

    LayerStore& store(Layer layer) { return layer == Layer::Turn ? turn_ : event_; }
    const LayerStore& store(Layer layer) const { return layer == Layer::Turn ? turn_ : event_; }

    void check_dim(size_t got) const {
        if (got != dimension()) {
            throw DimensionMismatchError("expected dimension " + std::to_string(dimension()) +
                                         ", got " + std::to_string(got));
        }
    }

    static double norm_of(const Vec& v) {
        double n = 0.0;
        for (float x : v) n += static_cast<double>(x) * x;
        return std::sqrt(n);
    }

    std::shared_ptr<const Encoder> encoder_;
    LayerStore turn_;
    LayerStore event_;
};

} // namespace hiermem
