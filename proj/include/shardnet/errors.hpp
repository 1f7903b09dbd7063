#pragma once

#include <stdexcept>
#include <string>

namespace shardnet {

// Base class for all library errors. Subclasses map onto the CLI exit-code
// contract: config/format/io problems exit 2, runtime aborts exit 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Matrix/layer dimension mismatch; the message names the offending layer.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Value outside its legal domain (e.g. a label not in 0..N-1).
class DomainError : public Error {
public:
    using Error::Error;
};

// Non-finite value detected where the contract requires finite arithmetic.
class NumericError : public Error {
public:
    using Error::Error;
};

// File could not be opened or read/written.
class IoError : public Error {
public:
    using Error::Error;
};

// File exists but its contents violate the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or invalid combination of options.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Violation of the master/worker exchange contract (shape or round tags).
class ProtocolError : public Error {
public:
    using Error::Error;
};

// A map task failed twice; carries shard and round diagnostics.
class WorkerError : public Error {
public:
    using Error::Error;
};

} // namespace shardnet
