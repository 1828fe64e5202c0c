#pragma once

#include <stdexcept>
#include <string>

namespace brw {

// Error taxonomy shared across the library. Every throw site uses one of
// these so callers (and the CLI exit-code mapping) can dispatch on type.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// A model fails the standing assumptions (offspring mean, rate-function
// interiority, finite exponential moments near the tilt).
struct AssumptionError : Error {
    using Error::Error;
};

// A request would exceed a configured state-space or population bound.
struct CapacityError : Error {
    using Error::Error;
};

struct PopulationOverflow : CapacityError {
    using CapacityError::CapacityError;
};

// Rejection sampler misconfiguration (acceptance rate collapsed).
struct EnvelopeError : Error {
    using Error::Error;
};

// Grid mass leaked past the declared truncation budget.
struct TruncationError : Error {
    using Error::Error;
};

// Requested evaluation window is not covered by the available grid.
struct RangeError : Error {
    using Error::Error;
};

// Not enough data points / replicates / conditional hits for an estimator.
struct InsufficientData : Error {
    using Error::Error;
};

struct InsufficientSamples : InsufficientData {
    using InsufficientData::InsufficientData;
};

// Config file failed schema validation.
struct ConfigError : Error {
    using Error::Error;
};

// An artifact directory is missing a required file, or integrity hashes
// do not match.
struct MissingArtifact : Error {
    using Error::Error;
};

struct IntegrityError : Error {
    using Error::Error;
};

}  // namespace brw
