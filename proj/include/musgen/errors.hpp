#pragma once

#include <stdexcept>
#include <string>

namespace musgen {

// Error taxonomy shared by all modules. The CLI maps these onto process
// exit codes (see cli.hpp).

// Shape disagreement between tensors/matrices.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller handed in data that cannot be processed (empty corpus, bad range,
// unparseable item, ...).
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An API contract was violated (non-scalar loss, empty condition set, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A remote backend could not be reached or answered with a failure.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A pipeline stage was invoked before its prerequisites exist.
struct DependencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf detected in a value that is about to be published.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem problem (unreadable/unwritable path, malformed file).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration (missing file, malformed JSON, invalid value).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace musgen
