#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dicseg {

/// Root of every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// File decoded but its layout is unsupported (e.g. multi-channel PNG).
class FormatError : public Error {
public:
    using Error::Error;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// No frames matched, or no prediction/truth pairs were found.
class EmptyInputError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// An operation that needs an object was given an empty mask.
class EmptyObjectError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class UndefinedMeasureError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Request parameters rejected; carries the offending field names.
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::vector<std::string> fields)
        : Error(what), fields_(std::move(fields)) {}

    const std::vector<std::string>& fields() const noexcept { return fields_; }

private:
    std::vector<std::string> fields_;
};

}  // namespace dicseg
