#include "bspde/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bspde/error.hpp"
#include "bspde/tridiagonal.hpp"

namespace bspde {

namespace {

void require_shape(const Grid& grid, std::span<const double> v) {
    if (v.size() != static_cast<std::size_t>(grid.n_x())) {
        throw ShapeError("grid vector has length " + std::to_string(v.size()) + ", grid has n_x = " +
                         std::to_string(grid.n_x()));
    }
}

double at_or_zero(std::span<const double> v, long j) {
    if (j < 0 || j >= static_cast<long>(v.size())) return 0.0;
    return v[static_cast<std::size_t>(j)];
}

}  // namespace

Grid::Grid(double x_lo, double x_hi, int n_x)
    : x_lo_(x_lo), x_hi_(x_hi), n_x_(n_x), h_((x_hi - x_lo) / (n_x + 1)) {}

Grid Grid::build(double x_lo, double x_hi, int n_x) {
    if (!(std::isfinite(x_lo) && std::isfinite(x_hi)) || !(x_lo < x_hi)) {
        throw GuardError("grid: need finite x_lo < x_hi, got [" + std::to_string(x_lo) + ", " +
                         std::to_string(x_hi) + "]");
    }
    if (n_x < 2) {
        throw GuardError("grid: n_x must be >= 2, got " + std::to_string(n_x));
    }
    return Grid(x_lo, x_hi, n_x);
}

std::vector<double> Grid::interior_nodes() const {
    std::vector<double> x(static_cast<std::size_t>(n_x_));
    for (int j = 1; j <= n_x_; ++j) x[static_cast<std::size_t>(j - 1)] = node(j);
    return x;
}

std::string_view to_string(NormKind kind) {
    switch (kind) {
        case NormKind::Hminus1: return "Hminus1";
        case NormKind::H0: return "H0";
        case NormKind::H1: return "H1";
        case NormKind::H2: return "H2";
        case NormKind::WeightedH1: return "WeightedH1";
    }
    return "?";
}

double inner_h0(const Grid& grid, std::span<const double> u, std::span<const double> v) {
    require_shape(grid, u);
    require_shape(grid, v);
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) s += u[j] * v[j];
    return grid.h() * s;
}

double h1_seminorm(const Grid& grid, std::span<const double> v) {
    require_shape(grid, v);
    const double h = grid.h();
    double s = 0.0;
    for (long e = 0; e <= grid.n_x(); ++e) {
        const double d = (at_or_zero(v, e) - at_or_zero(v, e - 1)) / h;
        s += d * d;
    }
    return std::sqrt(h * s);
}

double h2_seminorm(const Grid& grid, std::span<const double> v) {
    require_shape(grid, v);
    const double h = grid.h();
    double s = 0.0;
    for (long j = 0; j < grid.n_x(); ++j) {
        const double d = (at_or_zero(v, j - 1) - 2.0 * v[static_cast<std::size_t>(j)] +
                          at_or_zero(v, j + 1)) /
                         (h * h);
        s += d * d;
    }
    return std::sqrt(h * s);
}

GridVector solve_dirichlet_laplacian(const Grid& grid, std::span<const double> v) {
    require_shape(grid, v);
    const auto n = static_cast<std::size_t>(grid.n_x());
    const double ih2 = 1.0 / (grid.h() * grid.h());
    Tridiagonal m(n);
    for (std::size_t j = 0; j < n; ++j) {
        m.diag[j] = 2.0 * ih2;
        if (j > 0) m.lower[j] = -ih2;
        if (j + 1 < n) m.upper[j] = -ih2;
    }
    GridVector z(v.begin(), v.end());
    std::vector<double> scratch;
    thomas_solve(m, z, scratch);
    return z;
}

double discrete_norm(const Grid& grid, std::span<const double> v, NormKind kind) {
    require_shape(grid, v);
    switch (kind) {
        case NormKind::H0: return std::sqrt(inner_h0(grid, v, v));
        case NormKind::H1: {
            const double a = inner_h0(grid, v, v);
            const double b = h1_seminorm(grid, v);
            return std::sqrt(a + b * b);
        }
        case NormKind::H2: {
            const double a = inner_h0(grid, v, v);
            const double b = h1_seminorm(grid, v);
            const double c = h2_seminorm(grid, v);
            return std::sqrt(a + b * b + c * c);
        }
        case NormKind::Hminus1: {
            const GridVector z = solve_dirichlet_laplacian(grid, v);
            return std::sqrt(std::max(0.0, inner_h0(grid, v, z)));
        }
        case NormKind::WeightedH1:
            throw GuardError("discrete_norm: WeightedH1 needs edge weights, use weighted_h1_norm");
    }
    return 0.0;
}

double weighted_h1_norm(const Grid& grid, std::span<const double> v,
                        std::span<const double> edge_weights) {
    require_shape(grid, v);
    if (edge_weights.size() != static_cast<std::size_t>(grid.n_x() + 1)) {
        throw ShapeError("weighted_h1_norm: need n_x + 1 edge weights, got " +
                         std::to_string(edge_weights.size()));
    }
    for (std::size_t e = 0; e < edge_weights.size(); ++e) {
        if (!(edge_weights[e] > 0.0)) {
            throw CoefficientError("weighted_h1_norm: non-positive weight at edge " +
                                   std::to_string(e));
        }
    }
    const double h = grid.h();
    double s = 0.0;
    for (long e = 0; e <= grid.n_x(); ++e) {
        const double d = (at_or_zero(v, e) - at_or_zero(v, e - 1)) / h;
        s += edge_weights[static_cast<std::size_t>(e)] * d * d;
    }
    return std::sqrt(h * s);
}

}  // namespace bspde
