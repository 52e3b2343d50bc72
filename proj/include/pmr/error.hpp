#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmr {

/// Base of every recoverable failure raised by the pipeline. Session code
/// catches these and degrades; anything else is a programming error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, const std::string& message)
        : Error("syntax error at " + std::to_string(position) + ": " + message),
          position_(position), message_(message) {}

    std::size_t position() const noexcept { return position_; }
    const std::string& detail() const noexcept { return message_; }

private:
    std::size_t position_;
    std::string message_;
};

/// Transport failure talking to a remote service. Retryable.
class NetworkError : public Error {
public:
    using Error::Error;
};

/// The remote service asked us to slow down (HTTP 429 or equivalent).
class RateLimited : public NetworkError {
public:
    using NetworkError::NetworkError;
};

/// Transport failure on the chat backend.
class TransportError : public NetworkError {
public:
    using NetworkError::NetworkError;
};

class SchemaError : public Error {
public:
    enum class Kind { NoObjectFound, MissingFields, BadEnum, UnknownSchema };

    SchemaError(Kind kind, const std::string& message)
        : Error(std::string(kind_name(kind)) + ": " + message), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

    static const char* kind_name(Kind k) noexcept {
        switch (k) {
            case Kind::NoObjectFound: return "no_object_found";
            case Kind::MissingFields: return "missing_fields";
            case Kind::BadEnum: return "bad_enum";
            case Kind::UnknownSchema: return "unknown_schema";
        }
        return "unknown";
    }

private:
    Kind kind_;
};

class EmptyPlan : public Error {
public:
    using Error::Error;
};

class PlanningFailure : public Error {
public:
    using Error::Error;
};

class AnswerFormatError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

class TraceFormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Raised by the scripted chat backend when a request does not match the
/// next scripted turn. Deliberately not a pmr::Error so pipeline fallbacks
/// never swallow it.
class ScriptMismatch : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace pmr
