#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bspde {

/// Violated precondition on user-supplied parameters (grid, tree, config).
class GuardError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Arrays or fields that do not share a grid/tree shape.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-symmetric matrix, nonzero noise beyond N0, non-positive weights, ...
class CoefficientError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear solve in a time step failed; carries the offending tree slot.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, int level, std::size_t node)
        : std::runtime_error(what + " at level " + std::to_string(level) + ", node " +
                             std::to_string(node)),
          level_(level),
          node_(node) {}

    int level() const noexcept { return level_; }
    std::size_t node() const noexcept { return node_; }

private:
    int level_;
    std::size_t node_;
};

/// Neumann iteration did not reach tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double contraction_estimate)
        : std::runtime_error(what), contraction_estimate_(contraction_estimate) {}

    double contraction_estimate() const noexcept { return contraction_estimate_; }

private:
    double contraction_estimate_;
};

}  // namespace bspde
