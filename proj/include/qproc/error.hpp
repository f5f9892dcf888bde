#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qproc {

struct SourcePos {
    std::size_t line = 0;
    std::size_t col = 0;
};

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An error tied to a location in a source file.
class PositionedError : public Error {
public:
    PositionedError(SourcePos pos, const std::string& message)
        : Error(message), pos_(pos), message_(message) {}

    SourcePos pos() const { return pos_; }
    const std::string& message() const { return message_; }

    /// "file:line:col: message"
    std::string format(const std::string& file) const {
        return file + ":" + std::to_string(pos_.line) + ":" + std::to_string(pos_.col) + ": " + message_;
    }

private:
    SourcePos pos_;
    std::string message_;
};

class SyntaxError : public PositionedError {
public:
    using PositionedError::PositionedError;
};

class ElaborationError : public PositionedError {
public:
    using PositionedError::PositionedError;
};

/// Bad matrix, bad register position, failed validation.
class QuantumError : public Error {
public:
    using Error::Error;
};

/// Misuse of the environment stack or the classical store.
class ContextError : public Error {
public:
    using Error::Error;
};

/// Unknown process, arity mismatch or runaway recursion during unfolding.
class UnfoldError : public Error {
public:
    using Error::Error;
};

class TruncatedError : public Error {
public:
    using Error::Error;
};

class OpenActionError : public Error {
public:
    OpenActionError(const std::string& label)
        : Error("open action in closed run: " + label), label_(label) {}
    const std::string& label() const { return label_; }

private:
    std::string label_;
};

class NotSeparableError : public Error {
public:
    using Error::Error;
};

} // namespace qproc
