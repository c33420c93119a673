#pragma once

#include <stdexcept>
#include <string>

namespace aflora {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched matrix / vector dimensions; message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Argument outside its valid domain (inactive index, empty test set, ...).
struct DomainError : Error {
    using Error::Error;
};

// Invalid sample data, e.g. a label outside [0, num_classes).
struct DataError : Error {
    using Error::Error;
};

// Experiment configuration rejected before any work starts.
struct ConfigError : Error {
    using Error::Error;
};

// Iterative numerics failed (SVD did not converge within the sweep cap).
struct NumericalError : Error {
    using Error::Error;
};

// No aggregatable mass: every client is rank-0 or dataless.
struct AggregationError : Error {
    using Error::Error;
};

// Dataset cannot be split as requested.
struct PartitionError : Error {
    using Error::Error;
};

// Classic aggregation fed adapters of differing rank.
struct RankMismatchError : Error {
    using Error::Error;
};

}  // namespace aflora
