#pragma once

#include <stdexcept>
#include <string>

namespace pgiep {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or index mismatch between operands.
struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// An iterative routine exhausted its iteration budget.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, int iters)
        : Error(msg + " (after " + std::to_string(iters) + " iterations)"),
          iterations(iters) {}
    int iterations;
};

// A caller violated a documented precondition.
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// The input falls outside the supported problem class
// (e.g. a pencil with complex eigenvalues).
struct ScopeError : Error {
    explicit ScopeError(const std::string& msg) : Error(msg) {}
};

}  // namespace pgiep
