#pragma once

#include <stdexcept>
#include <string>

namespace gmplan {

/// Matrix lost required rank (singular Grammian, unreachable boundary, ...).
struct RankError : std::runtime_error {
    explicit RankError(const std::string& what) : std::runtime_error(what) {}
};

/// Cholesky or eigenvalue factorization failed (matrix not positive definite).
struct FactorizationError : std::runtime_error {
    explicit FactorizationError(const std::string& what) : std::runtime_error(what) {}
};

/// Requested computation exceeds a hard resource budget.
struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative solver failed to produce a valid solution.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration file or runtime configuration is invalid.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gmplan
