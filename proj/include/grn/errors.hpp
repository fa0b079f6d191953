#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Two records disagree about the same entity (e.g. an edge listed with both signs).
class ConflictError : public Error {
public:
    using Error::Error;
};

/// Inputs are outside the domain an operation is defined on.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Gene sets that must agree do not.
class UniverseError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual) : Error(what), residual_(residual) {}

    double residual() const { return residual_; }

private:
    double residual_;
};

/// Some required gene or edge is not covered by the supplied data.
class CoverageError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t epoch)
        : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_;
};

/// A named input (file, directory, checkpoint) could not be resolved.
class ResolutionError : public Error {
public:
    using Error::Error;
};

} // namespace grn
