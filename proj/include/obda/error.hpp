#pragma once

#include <stdexcept>
#include <string>

namespace obda {

// Failure categories; the CLI maps each one to its own exit code.
enum class ErrorKind {
    input,         // missing/unreadable files, bad image dimensions
    config,        // invalid configuration or shape contract violation
    numeric,       // NaN/Inf produced during computation
    integrity,     // CRC failure, config-hash mismatch between artifacts
    protocol,      // geometric protocol violated (e.g. GT outside support)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::config: return "config";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::protocol: return "protocol";
    }
    return "unknown";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what)
{
    if (!condition) {
        throw Error(kind, what);
    }
}

}  // namespace obda
