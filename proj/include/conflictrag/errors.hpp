#pragma once

#include <stdexcept>
#include <string>

namespace conflictrag {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Malformed input that could not be parsed (dataset lines, LLM replies, files).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error(message) {}
};

/// Structurally valid input that violates a domain invariant.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error(message) {}
};

/// Network-level failure talking to a provider (after retries).
class TransportError : public Error {
public:
    explicit TransportError(const std::string& message) : Error(message) {}
};

/// The remote replied, but not in the expected wire format.
class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& message) : Error(message) {}
};

/// Bad or missing configuration (paths, endpoints, thresholds).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error(message) {}
};

/// Training could not proceed (degenerate labels, non-finite loss).
class TrainError : public Error {
public:
    explicit TrainError(const std::string& message) : Error(message) {}
};

/// Filesystem failure (missing file, unwritable path).
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(message) {}
};

}  // namespace conflictrag
