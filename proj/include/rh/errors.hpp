#pragma once

#include <stdexcept>
#include <string>

namespace rh {

// Every library failure derives from Error. exit_code() maps the failure
// class onto the CLI contract: 2 argument, 3 numeric/degeneracy, 4 I/O.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 3; }
};

class ArgumentError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class DomainError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    GeometryError(const std::string& what, double gap = 0.0) : Error(what), gap_(gap) {}
    double gap() const noexcept { return gap_; }

private:
    double gap_;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class DegenerateFunctionError : public NumericError {
public:
    using NumericError::NumericError;
};

class UnstableModelError : public NumericError {
public:
    using NumericError::NumericError;
};

class NoSharedSubspaceError : public NumericError {
public:
    NoSharedSubspaceError(const std::string& what, double residual, double condition)
        : NumericError(what), residual_(residual), condition_(condition) {}
    double residual() const noexcept { return residual_; }
    double condition() const noexcept { return condition_; }

private:
    double residual_;
    double condition_;
};

class EmptyFeasibleSetError : public NumericError {
public:
    using NumericError::NumericError;
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

// Malformed input file. line() is 1-based; 0 when the location is unknown.
class ParseError : public IoError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : IoError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace rh
