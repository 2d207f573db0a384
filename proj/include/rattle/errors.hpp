#pragma once

#include <stdexcept>
#include <string>

namespace rattle {

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// A stated precondition of an operation (e.g. h1 > 2c) does not hold.
class PreconditionError : public std::invalid_argument {
public:
    explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

// Quadrature, root bracketing or an iterative scheme failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rattle
