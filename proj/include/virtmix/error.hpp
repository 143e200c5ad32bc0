#pragma once

#include <stdexcept>
#include <string>

namespace virtmix {

enum class ErrorKind { validation, numerical };

/// Base of every error raised by the library. The kind decides the CLI exit
/// code (2 for validation, 3 for numerical).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace virtmix
