#pragma once

#include <stdexcept>
#include <string>

namespace m2ae {

// Structural problems: incompatible shapes, bad index sets, non-scalar
// roots where a scalar is required.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf surfaced by a computation, or a non-finite training loss.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration: unknown keys, out-of-range values, bad flags.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File-level failures: bad magic, version mismatch, truncation.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Data-level failures: degenerate signals, too-few subjects, empty masks,
// single-class label sets.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace m2ae
