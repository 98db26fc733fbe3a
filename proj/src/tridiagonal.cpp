#include "bspde/tridiagonal.hpp"

#include <algorithm>
#include <cmath>

namespace bspde {

Tridiagonal Tridiagonal::identity(std::size_t n) {
    Tridiagonal m(n);
    std::fill(m.diag.begin(), m.diag.end(), 1.0);
    return m;
}

Tridiagonal Tridiagonal::transposed() const {
    const std::size_t n = size();
    Tridiagonal t(n);
    t.diag = diag;
    for (std::size_t j = 0; j < n; ++j) {
        if (j > 0) t.lower[j] = upper[j - 1];
        if (j + 1 < n) t.upper[j] = lower[j + 1];
    }
    return t;
}

void Tridiagonal::apply(std::span<const double> x, std::span<double> y) const {
    std::fill(y.begin(), y.end(), 0.0);
    apply_add(1.0, x, y);
}

void Tridiagonal::apply_add(double alpha, std::span<const double> x, std::span<double> y) const {
    const std::size_t n = size();
    for (std::size_t j = 0; j < n; ++j) {
        double s = diag[j] * x[j];
        if (j > 0) s += lower[j] * x[j - 1];
        if (j + 1 < n) s += upper[j] * x[j + 1];
        y[j] += alpha * s;
    }
}

void Tridiagonal::apply_transpose_add(double alpha, std::span<const double> x,
                                      std::span<double> y) const {
    const std::size_t n = size();
    for (std::size_t j = 0; j < n; ++j) {
        double s = diag[j] * x[j];
        if (j > 0) s += upper[j - 1] * x[j - 1];
        if (j + 1 < n) s += lower[j + 1] * x[j + 1];
        y[j] += alpha * s;
    }
}

Tridiagonal Tridiagonal::implicit_step_matrix(double dt) const {
    const std::size_t n = size();
    Tridiagonal m(n);
    for (std::size_t j = 0; j < n; ++j) {
        m.lower[j] = -dt * lower[j];
        m.diag[j] = 1.0 - dt * diag[j];
        m.upper[j] = -dt * upper[j];
    }
    return m;
}

double Tridiagonal::max_abs_entry() const {
    double m = 0.0;
    for (std::size_t j = 0; j < size(); ++j) {
        m = std::max({m, std::abs(lower[j]), std::abs(diag[j]), std::abs(upper[j])});
    }
    return m;
}

double Tridiagonal::inf_norm() const {
    double m = 0.0;
    for (std::size_t j = 0; j < size(); ++j) {
        m = std::max(m, std::abs(lower[j]) + std::abs(diag[j]) + std::abs(upper[j]));
    }
    return m;
}

bool thomas_solve(const Tridiagonal& m, std::span<double> rhs, std::vector<double>& scratch,
                  double pivot_floor) {
    const std::size_t n = m.size();
    if (n == 0) return true;
    scratch.resize(n);
    double pivot = m.diag[0];
    double scale = std::abs(m.diag[0]) + std::abs(m.upper[0]);
    if (!(std::abs(pivot) > pivot_floor * scale)) return false;
    scratch[0] = m.upper[0] / pivot;
    rhs[0] /= pivot;
    for (std::size_t j = 1; j < n; ++j) {
        pivot = m.diag[j] - m.lower[j] * scratch[j - 1];
        scale = std::abs(m.lower[j]) + std::abs(m.diag[j]) + std::abs(m.upper[j]);
        if (!(std::abs(pivot) > pivot_floor * scale)) return false;
        scratch[j] = m.upper[j] / pivot;
        rhs[j] = (rhs[j] - m.lower[j] * rhs[j - 1]) / pivot;
    }
    for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= scratch[j] * rhs[j + 1];
    return true;
}

bool thomas_solve_transposed(const Tridiagonal& m, std::span<double> rhs,
                             std::vector<double>& scratch, double pivot_floor) {
    // Row j of M^T: upper[j-1] x_{j-1} + diag[j] x_j + lower[j+1] x_{j+1}.
    const std::size_t n = m.size();
    if (n == 0) return true;
    scratch.resize(n);
    auto sub = [&](std::size_t j) { return j > 0 ? m.upper[j - 1] : 0.0; };
    auto super = [&](std::size_t j) { return j + 1 < n ? m.lower[j + 1] : 0.0; };
    double pivot = m.diag[0];
    double scale = std::abs(m.diag[0]) + std::abs(super(0));
    if (!(std::abs(pivot) > pivot_floor * scale)) return false;
    scratch[0] = super(0) / pivot;
    rhs[0] /= pivot;
    for (std::size_t j = 1; j < n; ++j) {
        pivot = m.diag[j] - sub(j) * scratch[j - 1];
        scale = std::abs(sub(j)) + std::abs(m.diag[j]) + std::abs(super(j));
        if (!(std::abs(pivot) > pivot_floor * scale)) return false;
        scratch[j] = super(j) / pivot;
        rhs[j] = (rhs[j] - sub(j) * rhs[j - 1]) / pivot;
    }
    for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= scratch[j] * rhs[j + 1];
    return true;
}

}  // namespace bspde
