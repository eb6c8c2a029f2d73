#pragma once

#include <stdexcept>
#include <string>

namespace fws {

// Base of the toolkit's error taxonomy. Every error carries the process exit
// code the CLI maps it to: 2 = bad configuration / API misuse, 3 = bad input
// data (malformed bytes, unsupported versions, not enough samples),
// 4 = numeric failure (non-finite loss, degenerate embeddings).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const noexcept { return 2; }
};

// Invalid configuration value or an operation precondition broken by the caller.
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// Input data is unusable: truncated or corrupt bytes, unknown format version,
// non-finite samples, or too little data to satisfy a request.
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

// A computation produced a value the pipeline cannot continue from.
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

// An object was used in the wrong state (e.g. classifying without a head).
// Treated as a configuration-class failure for exit purposes.
class StateError : public Error {
public:
    using Error::Error;
};

}  // namespace fws
