#pragma once

#include <stdexcept>
#include <string>

namespace pf {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
   public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration: bad hyperparameter, unknown key, malformed
/// manifest, invalid model spec. Maps to CLI exit code 2.
class ConfigError : public Error {
   public:
    using Error::Error;
};

/// Method registration conflict (duplicate peft_type, shadowed built-in).
class RegistrationError : public ConfigError {
   public:
    using ConfigError::ConfigError;
};

/// Malformed or inconsistent data: missing column, bad token id,
/// malformed record, unverbalizable label. Maps to CLI exit code 3.
class DataError : public Error {
   public:
    using Error::Error;
};

/// Sequence exceeds a length budget (max_seq overflow).
class LengthError : public DataError {
   public:
    using DataError::DataError;
};

/// Tensor shape or dimension mismatch.
class ShapeError : public Error {
   public:
    using Error::Error;
};

/// Operation invoked in the wrong lifecycle state (double attach,
/// backward on an empty tape).
class StateError : public Error {
   public:
    using Error::Error;
};

/// A capability the method does not provide (merge on a non-mergeable
/// tuner).
class CapabilityError : public Error {
   public:
    using Error::Error;
};

/// Checkpoint does not match the live model (spec fingerprint, shape).
class CompatibilityError : public Error {
   public:
    using Error::Error;
};

/// Checkpoint references a peft_type absent from the registry.
class RegistryError : public Error {
   public:
    using Error::Error;
};

/// Filesystem failure: unreadable directory, unwritable output.
class IoError : public Error {
   public:
    using Error::Error;
};

}  // namespace pf
