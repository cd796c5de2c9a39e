#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fusednet {

/// Invalid run configuration (bad flags, missing paths, empty grids).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data that violates a precondition (malformed tables, unknown taxa).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine failed to reach its certificate.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * @brief Raised when a solver exhausts its iteration budget.
 *
 * Carries the last iterate (flattened coefficients) and its optimality residual
 * so callers can inspect how far from certified the fit was.
 */
class NotConvergedError : public NumericalError {
public:
    NotConvergedError(const std::string& what, std::vector<double> last_iterate, double residual)
        : NumericalError(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    double residual() const noexcept { return residual_; }

private:
    std::vector<double> last_iterate_;
    double residual_;
};

}  // namespace fusednet
