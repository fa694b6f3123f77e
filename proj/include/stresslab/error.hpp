#pragma once

#include <stdexcept>
#include <string>

namespace stresslab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (malformed graph, bad config, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A graph is not connected where connectivity is required.
class ConnectivityError : public Error {
public:
    using Error::Error;
};

/// Random generation could not satisfy its constraints within the attempt cap.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// All node positions coincide, so scale-normalised quantities are undefined.
class DegenerateDrawingError : public Error {
public:
    using Error::Error;
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, double best_ksm, long iterations)
        : Error(what), best_ksm_(best_ksm), iterations_(iterations) {}

    double best_ksm() const noexcept { return best_ksm_; }
    long iterations() const noexcept { return iterations_; }

private:
    double best_ksm_;
    long iterations_;
};

class SchedulingError : public Error {
public:
    using Error::Error;
};

/// A response log is missing trials required by an analysis.
class IncompleteLogError : public Error {
public:
    using Error::Error;
};

/// A statistic is undefined for the given data (zero variance, empty sample).
class UndefinedStatisticError : public Error {
public:
    using Error::Error;
};

// Session-service errors; each maps onto one HTTP status class.
class NotFoundError : public Error {
public:
    using Error::Error;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class GoneError : public Error {
public:
    using Error::Error;
};

}  // namespace stresslab
