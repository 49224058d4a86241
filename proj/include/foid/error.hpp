#pragma once

#include <stdexcept>
#include <string>

namespace foid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line (0 when unknown) and the
/// offending field path.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0, std::string field = {})
        : Error(format(what, line, field)), line_(line), field_(std::move(field)) {}

    int line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

    /// Same error with `prefix: ` (typically a file name) in front.
    ParseError with_prefix(const std::string& prefix) const {
        ParseError copy(*this);
        static_cast<std::runtime_error&>(copy) = std::runtime_error(prefix + ": " + what());
        return copy;
    }

private:
    static std::string format(const std::string& what, int line, const std::string& field) {
        std::string msg;
        if (line > 0) msg += "line " + std::to_string(line) + ": ";
        if (!field.empty()) msg += "field '" + field + "': ";
        return msg + what;
    }

    int line_;
    std::string field_;
};

/// Input parsed fine but breaks a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Singular matrix or zero impedance.
class SingularError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace foid
