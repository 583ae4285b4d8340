#pragma once

#include <stdexcept>
#include <string>

namespace reswvl {

/// Invalid or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Broken, missing or malformed input data (CLI exit code 3).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Training failure, e.g. divergence or incompatible shapes (CLI exit code 4).
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Evaluation failure (CLI exit code 5).
struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace reswvl
