#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace bspde {

/// Interior nodal values of a function on the grid; boundary values are
/// implicitly zero (homogeneous Dirichlet).
using GridVector = std::vector<double>;

/// Uniform mesh on (x_lo, x_hi) with n_x interior nodes x_j = x_lo + j*h,
/// j = 1..n_x. Nodes 0 and n_x+1 are the Dirichlet boundary.
class Grid {
public:
    static Grid build(double x_lo, double x_hi, int n_x);

    double x_lo() const noexcept { return x_lo_; }
    double x_hi() const noexcept { return x_hi_; }
    int n_x() const noexcept { return n_x_; }
    double h() const noexcept { return h_; }

    /// Node coordinate, j in [0, n_x+1].
    double node(int j) const noexcept { return x_lo_ + j * h_; }
    /// Midpoint of edge e joining nodes e and e+1, e in [0, n_x].
    double edge_midpoint(int e) const noexcept { return x_lo_ + (e + 0.5) * h_; }

    std::vector<double> interior_nodes() const;
    GridVector zeros() const { return GridVector(static_cast<std::size_t>(n_x_), 0.0); }

    bool operator==(const Grid&) const = default;

private:
    Grid(double x_lo, double x_hi, int n_x);

    double x_lo_;
    double x_hi_;
    int n_x_;
    double h_;
};

enum class NormKind { Hminus1, H0, H1, H2, WeightedH1 };

std::string_view to_string(NormKind kind);

/// Discrete Sobolev norms with h*sum scaling:
///   H0      (h sum v_j^2)^{1/2}
///   H1      (|v|_H0^2 + |v|_{H1,semi}^2)^{1/2}, forward differences over all n_x+1 edges
///   H2      (|v|_H1^2 + h sum_j ((v_{j+1} - 2 v_j + v_{j-1}) / h^2)^2)^{1/2}
///   Hminus1 (h v^T (-Lap_h)^{-1} v)^{1/2}, Lap_h the Dirichlet second difference
/// WeightedH1 needs the edge weights; use weighted_h1_norm.
double discrete_norm(const Grid& grid, std::span<const double> v, NormKind kind);

double inner_h0(const Grid& grid, std::span<const double> u, std::span<const double> v);
double h1_seminorm(const Grid& grid, std::span<const double> v);
double h2_seminorm(const Grid& grid, std::span<const double> v);

/// Forward differences on the n_x+1 cell edges, weight b sampled per edge
/// (edge_weights[e] sits at the midpoint of edge e).
inline constexpr std::string_view kWeightedGradientConvention =
    "forward differences on edges e=0..n_x, (v_{e+1}-v_e)/h, weight b at edge midpoint";

/// (h sum_e b_e ((v_{e+1} - v_e)/h)^2)^{1/2}. Throws CoefficientError if any
/// b_e <= 0.
double weighted_h1_norm(const Grid& grid, std::span<const double> v,
                        std::span<const double> edge_weights);

/// Solves (-Lap_h) z = v (Dirichlet). Used by the H^{-1} norm.
GridVector solve_dirichlet_laplacian(const Grid& grid, std::span<const double> v);

}  // namespace bspde
