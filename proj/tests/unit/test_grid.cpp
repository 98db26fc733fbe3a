#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "bspde/error.hpp"
#include "bspde/grid.hpp"
#include "bspde/tridiagonal.hpp"

using namespace bspde;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sine_mode(const Grid& g, int m) {
    std::vector<double> v;
    for (int j = 1; j <= g.n_x(); ++j) v.push_back(std::sin(m * kPi * g.node(j)));
    return v;
}

/// Eigenvalue of the Dirichlet second difference for mode m.
double mode_eigenvalue(const Grid& g, int m) {
    const double s = std::sin(m * kPi * g.h() / 2.0);
    return 4.0 / (g.h() * g.h()) * s * s;
}

}  // namespace

TEST(Grid, SpacingAndNodes) {
    const Grid g = Grid::build(0.0, 1.0, 31);
    EXPECT_DOUBLE_EQ(g.h(), 1.0 / 32.0);
    EXPECT_DOUBLE_EQ(g.node(0), 0.0);
    EXPECT_DOUBLE_EQ(g.node(32), 1.0);
    EXPECT_DOUBLE_EQ(g.edge_midpoint(0), 0.5 / 32.0);
    EXPECT_EQ(g.interior_nodes().size(), 31u);
}

TEST(Grid, Guards) {
    EXPECT_THROW(Grid::build(0.0, 1.0, 1), GuardError);
    EXPECT_THROW(Grid::build(1.0, 1.0, 8), GuardError);
    EXPECT_THROW(Grid::build(0.0, INFINITY, 8), GuardError);
    EXPECT_THROW(Grid::build(NAN, 1.0, 8), GuardError);
}

TEST(Grid, NormsOfSineModeMatchClosedForms) {
    const Grid g = Grid::build(0.0, 1.0, 24);
    for (int m : {1, 3}) {
        const auto v = sine_mode(g, m);
        const double mu = mode_eigenvalue(g, m);
        // h * sum sin^2 = 1/2 on the full mode
        EXPECT_NEAR(discrete_norm(g, v, NormKind::H0), std::sqrt(0.5), 1e-14);
        EXPECT_NEAR(h1_seminorm(g, v), std::sqrt(0.5 * mu), 1e-12);
        EXPECT_NEAR(discrete_norm(g, v, NormKind::H1), std::sqrt(0.5 + 0.5 * mu), 1e-12);
        EXPECT_NEAR(discrete_norm(g, v, NormKind::H2), std::sqrt(0.5 + 0.5 * mu + 0.5 * mu * mu), 1e-9);
        EXPECT_NEAR(discrete_norm(g, v, NormKind::Hminus1), std::sqrt(0.5 / mu), 1e-14);
    }
}

TEST(Grid, NormOfZeroIsZero) {
    const Grid g = Grid::build(-1.0, 2.0, 10);
    const auto z = g.zeros();
    for (auto k : {NormKind::Hminus1, NormKind::H0, NormKind::H1, NormKind::H2}) {
        EXPECT_EQ(discrete_norm(g, z, k), 0.0) << to_string(k);
    }
}

TEST(Grid, WeightedNormWithUnitWeightsIsSeminorm) {
    const Grid g = Grid::build(0.0, 2.0, 15);
    std::vector<double> v;
    for (int j = 1; j <= g.n_x(); ++j) v.push_back(std::cos(g.node(j)) * g.node(j));
    const std::vector<double> ones(16, 1.0);
    EXPECT_NEAR(weighted_h1_norm(g, v, ones), h1_seminorm(g, v), 1e-14);
    const std::vector<double> fours(16, 4.0);
    EXPECT_NEAR(weighted_h1_norm(g, v, fours), 2.0 * h1_seminorm(g, v), 1e-13);
}

TEST(Grid, WeightedNormRejectsBadWeights) {
    const Grid g = Grid::build(0.0, 1.0, 4);
    const std::vector<double> v(4, 1.0);
    std::vector<double> w(5, 1.0);
    w[2] = 0.0;
    EXPECT_THROW(weighted_h1_norm(g, v, w), CoefficientError);
    EXPECT_THROW(weighted_h1_norm(g, v, std::vector<double>(4, 1.0)), ShapeError);
}

TEST(Grid, ShapeMismatchThrows) {
    const Grid g = Grid::build(0.0, 1.0, 4);
    EXPECT_THROW(discrete_norm(g, std::vector<double>(5, 1.0), NormKind::H0), ShapeError);
}

TEST(Grid, DirichletLaplacianSolve) {
    const Grid g = Grid::build(0.0, 1.0, 20);
    std::vector<double> f;
    for (int j = 1; j <= g.n_x(); ++j) f.push_back(1.0 + g.node(j));
    const auto z = solve_dirichlet_laplacian(g, f);
    const double ih2 = 1.0 / (g.h() * g.h());
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double l = j > 0 ? z[j - 1] : 0.0;
        const double r = j + 1 < z.size() ? z[j + 1] : 0.0;
        EXPECT_NEAR((2.0 * z[j] - l - r) * ih2, f[j], 1e-11);
    }
}

TEST(Tridiagonal, ThomasMatchesDenseSolve) {
    const std::size_t n = 7;
    Tridiagonal m(n);
    for (std::size_t j = 0; j < n; ++j) {
        m.diag[j] = 4.0 + 0.1 * static_cast<double>(j);
        if (j > 0) m.lower[j] = -1.0 + 0.05 * static_cast<double>(j);
        if (j + 1 < n) m.upper[j] = -0.7;
    }
    std::vector<double> x_true(n);
    for (std::size_t j = 0; j < n; ++j) x_true[j] = std::sin(1.0 + static_cast<double>(j));
    std::vector<double> b(n), bt(n, 0.0), scratch;
    m.apply(x_true, b);
    m.apply_transpose_add(1.0, x_true, bt);
    ASSERT_TRUE(thomas_solve(m, b, scratch));
    ASSERT_TRUE(thomas_solve_transposed(m, bt, scratch));
    for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(b[j], x_true[j], 1e-14);
        EXPECT_NEAR(bt[j], x_true[j], 1e-14);
    }
}

TEST(Tridiagonal, TransposeAgreesWithTransposeApply) {
    Tridiagonal m(5);
    for (std::size_t j = 0; j < 5; ++j) {
        m.diag[j] = static_cast<double>(j) + 1.0;
        if (j > 0) m.lower[j] = 0.5 * static_cast<double>(j);
        if (j < 4) m.upper[j] = -0.3 * static_cast<double>(j + 1);
    }
    const std::vector<double> x{1.0, -2.0, 0.5, 3.0, -1.0};
    std::vector<double> a(5), b(5, 0.0);
    m.transposed().apply(x, a);
    m.apply_transpose_add(1.0, x, b);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(a[j], b[j]);
    EXPECT_EQ(m.transposed().transposed(), m);
}

TEST(Tridiagonal, SingularPivotReported) {
    Tridiagonal m(3);
    std::vector<double> rhs{1.0, 1.0, 1.0}, scratch;
    EXPECT_FALSE(thomas_solve(m, rhs, scratch));
}
