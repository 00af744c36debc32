#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eew {

// Base class for all engine errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

// Malformed, missing or degenerate input data (empty lists, rank-deficient
// design, too few tail exceedances, non-monotone streams, ...).
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or usage (bad paths, bad budgets, missing thresholds).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Argument outside a statistic's domain (e.g. non-positive intensity).
class DomainError : public Error {
public:
    using Error::Error;
};

// Iterative numerics failed to converge. Carries the iteration trace so the
// caller can diagnose the failure.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what_arg,
                          std::vector<std::string> trace = {})
        : Error(what_arg), trace_(std::move(trace)) {}

    const std::vector<std::string>& trace() const noexcept { return trace_; }

private:
    std::vector<std::string> trace_;
};

}  // namespace eew
