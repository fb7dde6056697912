#pragma once
// Error taxonomy. Every failure mode callers are expected to distinguish
// gets its own type; all derive from hiermem::Error.

#include <stdexcept>
#include <string>

namespace hiermem {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Store errors
struct DuplicateIdError : Error {
    using Error::Error;
};
struct UnknownIdError : Error {
    using Error::Error;
};
struct EmptyLinkSetError : Error {
    using Error::Error;
};

// Embedding errors
struct DimensionMismatchError : Error {
    using Error::Error;
};
struct ZeroNormError : Error {
    using Error::Error;
};
struct DuplicateRegistrationError : Error {
    using Error::Error;
};

// Gateway errors
struct UnknownFamilyError : Error {
    using Error::Error;
};
struct MissingVariableError : Error {
    using Error::Error;
};
struct ProviderError : Error {
    using Error::Error;
};
// Raised after all retries produced output that does not validate against
// the family schema. Carries the last raw response for diagnostics.
struct SchemaError : Error {
    SchemaError(const std::string& msg, std::string raw)
        : Error(msg), raw_response(std::move(raw)) {}
    std::string raw_response;
};

// Persistence / dataset errors
struct IoError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct IntegrityError : Error {
    using Error::Error;
};

} // namespace hiermem
