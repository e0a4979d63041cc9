// errors.hpp - Exception types shared by every lduo module

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lduo {

// Argument outside the mathematical domain of an operation (T <= 0, K < 0, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Temperature puts the Drude pole on a pole of cot(beta*hbar*Lambda/2).
struct DegenerateTemperatureError : DomainError {
    using DomainError::DomainError;
};

// Caller broke an interface contract (dimension mismatch, depth too shallow, ...).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// A series did not converge before its iteration cap.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double partial)
        : std::runtime_error(what), partial_sum(partial) {}
    double partial_sum;
};

// Hierarchy lattice exceeds the configured node cap.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite value produced by the integrator.
struct BlowUpError : std::runtime_error {
    BlowUpError(const std::string& what, std::size_t step)
        : std::runtime_error(what), step_index(step) {}
    std::size_t step_index;
};

} // namespace lduo
