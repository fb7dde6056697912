#pragma once
// Shared identifier and category types used across the library.

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hiermem {

using TurnId = std::int64_t;
using EventId = std::int64_t;

// A raw dialogue turn as it arrives from a dataset or a live session.
struct DialogueTurn {
    TurnId turn_id = 0;
    std::string speaker;
    std::string timestamp;
    std::string text;
};

// Question categories of the benchmark, each routed to its own answer prompt.
enum class Category {
    SingleHop,
    MultiHop,
    Temporal,
    OpenDomain,
    Adversarial,
};

inline const char* category_name(Category c) {
    switch (c) {
        case Category::SingleHop: return "single_hop";
        case Category::MultiHop: return "multi_hop";
        case Category::Temporal: return "temporal";
        case Category::OpenDomain: return "open_domain";
        case Category::Adversarial: return "adversarial";
    }
    return "unknown";
}

inline Category category_from_name(const std::string& name) {
    if (name == "single_hop") return Category::SingleHop;
    if (name == "multi_hop") return Category::MultiHop;
    if (name == "temporal") return Category::Temporal;
    if (name == "open_domain") return Category::OpenDomain;
    if (name == "adversarial") return Category::Adversarial;
    throw std::invalid_argument("unknown question category: " + name);
}

} // namespace hiermem
