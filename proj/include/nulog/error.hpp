#pragma once

#include <stdexcept>
#include <string>

namespace nulog {

/// Error classes map one-to-one onto CLI exit codes (see exit_code()).
enum class ErrorKind {
    io,          // file missing / unreadable / unwritable
    config,      // malformed config, bad pattern, schema problems
    validation,  // inputs that are well-formed but violate a contract
    shape,       // matrix dimension mismatch
    index,       // id or target out of range
    format,      // archive magic / layout problems
    version,     // archive written by a newer format
    usage,       // API misuse (backward on a detached value, stale gradients)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define NULOG_DEFINE_ERROR(Name, Kind)                                          \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
    };

NULOG_DEFINE_ERROR(IoError, io)
NULOG_DEFINE_ERROR(ConfigError, config)
NULOG_DEFINE_ERROR(ValidationError, validation)
NULOG_DEFINE_ERROR(ShapeError, shape)
NULOG_DEFINE_ERROR(IndexError, index)
NULOG_DEFINE_ERROR(FormatError, format)
NULOG_DEFINE_ERROR(VersionError, version)
NULOG_DEFINE_ERROR(UsageError, usage)

#undef NULOG_DEFINE_ERROR

/// Process exit code for an error class: I/O=2, config=3, everything that is a
/// contract violation on the data=4. Internal API misuse is 1.
inline int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::io:
        return 2;
    case ErrorKind::config:
        return 3;
    case ErrorKind::validation:
    case ErrorKind::shape:
    case ErrorKind::index:
    case ErrorKind::format:
    case ErrorKind::version:
        return 4;
    case ErrorKind::usage:
        return 1;
    }
    return 1;
}

}  // namespace nulog
