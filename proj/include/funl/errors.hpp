#pragma once

#include <stdexcept>
#include <string>

namespace funl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or dimension disagreement between tensors / layers.
struct ShapeError : Error {
    using Error::Error;
};

// Contract violation on values: NaN/Inf, non-normalized distributions,
// out-of-range hyperparameters, missing gradients.
struct ValueError : Error {
    using Error::Error;
};

// Out-of-range index or label.
struct IndexError : Error {
    using Error::Error;
};

// Malformed file contents (model files, IDX, CSV, report schemas).
struct FormatError : Error {
    using Error::Error;
};

// Invalid experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Missing or unreadable/unwritable files.
struct IoError : Error {
    using Error::Error;
};

}  // namespace funl
