#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace bspde {

/// Tridiagonal n x n matrix. Row j reads
///   (M v)_j = lower[j] v_{j-1} + diag[j] v_j + upper[j] v_{j+1},
/// with lower[0] = upper[n-1] = 0.
struct Tridiagonal {
    std::vector<double> lower;
    std::vector<double> diag;
    std::vector<double> upper;

    Tridiagonal() = default;
    explicit Tridiagonal(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

    std::size_t size() const noexcept { return diag.size(); }

    static Tridiagonal identity(std::size_t n);

    /// Literal transpose: sub- and super-diagonals swap and shift by one row.
    Tridiagonal transposed() const;

    void apply(std::span<const double> x, std::span<double> y) const;
    /// y += alpha * M x
    void apply_add(double alpha, std::span<const double> x, std::span<double> y) const;
    /// y += alpha * M^T x, without forming the transpose
    void apply_transpose_add(double alpha, std::span<const double> x, std::span<double> y) const;

    /// (I - dt * M)
    Tridiagonal implicit_step_matrix(double dt) const;

    double max_abs_entry() const;
    /// Max row sum of |entries| (infinity norm).
    double inf_norm() const;

    bool operator==(const Tridiagonal&) const = default;
};

/// Thomas elimination without pivoting. rhs is overwritten with the solution.
/// Returns false when a pivot vanishes (|pivot| below `pivot_floor` times the
/// row scale); rhs contents are then unspecified.
bool thomas_solve(const Tridiagonal& m, std::span<double> rhs, std::vector<double>& scratch,
                  double pivot_floor = 1e-14);

/// Solve M^T x = rhs using M's storage.
bool thomas_solve_transposed(const Tridiagonal& m, std::span<double> rhs,
                             std::vector<double>& scratch, double pivot_floor = 1e-14);

}  // namespace bspde
