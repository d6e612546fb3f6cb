#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace monospde {

/// Invalid user input (bad integrand name, non-positive lambda, ...).
/// `field` names the offending configuration key when known.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// An inner iterative solver (prox root-find, conjugate-gradient) did not converge.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& message, std::vector<double> last_iterate, double residual)
        : std::runtime_error(message), last_iterate_(std::move(last_iterate)), residual_(residual) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    double residual() const noexcept { return residual_; }

private:
    std::vector<double> last_iterate_;
    double residual_;
};

/// The Legendre oracle could not bracket the supremum: k grows too slowly
/// for the box expansion to terminate.
class ConjugateOverflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Blow-up or non-contraction; the run produced no trustworthy result.
class NumericalAbort : public std::runtime_error {
public:
    NumericalAbort(const std::string& message, std::size_t step)
        : std::runtime_error(message), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Requested run exceeds desk-scale limits (grid or step count).
class ResourceGuardError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace monospde
