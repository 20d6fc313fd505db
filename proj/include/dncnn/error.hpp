#pragma once

#include <stdexcept>
#include <string>

namespace dncnn {

/// Base class for every recoverable error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or image dimensions that do not fit together.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An operation was invoked on state that cannot support it, e.g. a
/// backward pass without a Train-mode cache.
class StateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class FormatErrorKind {
    BadMagic,
    BadChecksum,
    Truncated,
    UnsupportedVersion,
    Unsupported,
    Malformed,
    ArchitectureMismatch,
};

const char* to_string(FormatErrorKind kind);

/// A file was read but its content is not acceptable.
class FormatError : public Error {
public:
    FormatError(FormatErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

inline const char* to_string(FormatErrorKind kind) {
    switch (kind) {
    case FormatErrorKind::BadMagic: return "bad magic";
    case FormatErrorKind::BadChecksum: return "checksum mismatch";
    case FormatErrorKind::Truncated: return "truncated";
    case FormatErrorKind::UnsupportedVersion: return "unsupported version";
    case FormatErrorKind::Unsupported: return "unsupported format";
    case FormatErrorKind::Malformed: return "malformed";
    case FormatErrorKind::ArchitectureMismatch: return "architecture mismatch";
    }
    return "format error";
}

} // namespace dncnn
