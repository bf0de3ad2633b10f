#pragma once

#include <stdexcept>
#include <string>

namespace platoon {

/// Invalid scenario or simulation parameters (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed attack case or input document; the message carries the offending path.
class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Caller violated a precondition (length mismatch, short series, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite or singular quantities inside an optimizer or regressor (CLI exit code 2).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Min-max fit over a series without two distinct values.
class DegenerateRangeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace platoon
