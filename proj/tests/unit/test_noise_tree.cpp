#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "bspde/coefficients.hpp"
#include "bspde/error.hpp"
#include "bspde/noise_tree.hpp"
#include "bspde/spacetime_norm.hpp"

using namespace bspde;

TEST(NoiseTree, Guards) {
    EXPECT_THROW(NoiseTree::build(0, 4, 1.0), GuardError);
    EXPECT_THROW(NoiseTree::build(4, 4, 1.0), GuardError);
    EXPECT_THROW(NoiseTree::build(1, 0, 1.0), GuardError);
    EXPECT_THROW(NoiseTree::build(3, 9, 1.0), GuardError);
    EXPECT_THROW(NoiseTree::build(1, 4, 0.0), GuardError);
    EXPECT_NO_THROW(NoiseTree::build(3, 8, 1.0));
}

TEST(NoiseTree, IndexingAndIncrements) {
    const auto t = NoiseTree::build(2, 3, 0.75);
    EXPECT_EQ(t->branching(), 4u);
    EXPECT_EQ(t->level_size(3), 64u);
    EXPECT_EQ(t->total_nodes(), 1u + 4u + 16u + 64u);
    EXPECT_DOUBLE_EQ(t->dt(), 0.25);
    EXPECT_DOUBLE_EQ(t->probability(2), 1.0 / 16.0);
    const std::size_t c = t->child(5, 2);
    EXPECT_EQ(t->parent(c), 5u);
    EXPECT_DOUBLE_EQ(t->increment(2, 0), -0.5);
    EXPECT_DOUBLE_EQ(t->increment(2, 1), 0.5);
    // w along the path 0 -> child 3 -> child 1
    const std::size_t n2 = t->child(t->child(0, 3), 1);
    EXPECT_DOUBLE_EQ(t->w(2, n2, 0), 1.0);
    EXPECT_DOUBLE_EQ(t->w(2, n2, 1), 0.0);
}

TEST(NoiseTree, MomentsOfW) {
    const auto t = NoiseTree::build(1, 10, 2.0);
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (std::size_t nu = 0; nu < t->level_size(10); ++nu) {
        const double w = t->w(10, nu, 0);
        m1 += w * t->probability(10);
        m2 += w * w * t->probability(10);
        m4 += w * w * w * w * t->probability(10);
    }
    EXPECT_NEAR(m1, 0.0, 1e-14);
    EXPECT_NEAR(m2, 2.0, 1e-13);
    // E w^4 = 3 T^2 - 2 T dt for Rademacher increments
    EXPECT_NEAR(m4, 3.0 * 4.0 - 2.0 * 2.0 * 0.2, 1e-12);
}

TEST(NoiseTree, ConditionalExpectationOfMartingale) {
    const auto t = NoiseTree::build(2, 4, 1.0);
    const Grid g = Grid::build(0.0, 1.0, 3);
    Slice s(t, g, 4);
    for (std::size_t nu = 0; nu < s.node_count(); ++nu) {
        for (double& v : s.at(nu)) v = t->w(4, nu, 1);
    }
    const Slice e = conditional_expectation(s);
    ASSERT_EQ(e.level(), 3);
    for (std::size_t nu = 0; nu < e.node_count(); ++nu) EXPECT_NEAR(e.at(nu)[0], t->w(3, nu, 1), 1e-15);
}

TEST(NoiseTree, ItoIntegralOfOneIsW) {
    const auto t = NoiseTree::build(2, 5, 1.0);
    const Grid g = Grid::build(0.0, 1.0, 2);
    AdaptedField one(t, g, Layout::Interval);
    one.fill(1.0);
    const Slice I = ito_integral(one, 1, 5);
    for (std::size_t nu = 0; nu < I.node_count(); ++nu) EXPECT_NEAR(I.at(nu)[1], t->w(5, nu, 1), 1e-14);
}

TEST(NoiseTree, RepresentationSingleNoiseHasNoResidual) {
    const auto t = NoiseTree::build(1, 7, 1.0);
    const Grid g = Grid::build(0.0, 1.0, 4);
    Rng rng(3);
    Slice X(t, g, 7);
    for (double& v : X.values()) v = rng.uniform(-2.0, 2.0);
    const MartingaleRepresentation r = martingale_representation(X);
    double res = 0.0;
    for (double v : r.residual.data()) res = std::max(res, std::abs(v));
    EXPECT_LT(res, 1e-13);
    const Slice Y = reconstruct(r);
    for (std::size_t j = 0; j < X.values().size(); ++j) EXPECT_NEAR(Y.values()[j], X.values()[j], 1e-13);
}

TEST(NoiseTree, RepresentationResidualIsOrthogonal) {
    const auto t = NoiseTree::build(2, 3, 1.0);
    const Grid g = Grid::build(0.0, 1.0, 2);
    Rng rng(11);
    Slice X(t, g, 3);
    for (double& v : X.values()) v = rng.uniform(-1.0, 1.0);
    const MartingaleRepresentation r = martingale_representation(X);
    // at every parent, residual over children has zero mean and is orthogonal to each dw_i
    for (int k = 0; k < 3; ++k) {
        for (std::size_t nu = 0; nu < t->level_size(k); ++nu) {
            for (std::size_t j = 0; j < 2; ++j) {
                double mean = 0.0, c0 = 0.0, c1 = 0.0;
                for (std::size_t c = 0; c < 4; ++c) {
                    const double v = r.residual.at(k + 1, t->child(nu, c))[j];
                    mean += v;
                    c0 += v * t->increment(c, 0);
                    c1 += v * t->increment(c, 1);
                }
                EXPECT_NEAR(mean, 0.0, 1e-14);
                EXPECT_NEAR(c0, 0.0, 1e-14);
                EXPECT_NEAR(c1, 0.0, 1e-14);
            }
        }
    }
    const Slice Y = reconstruct(r);
    for (std::size_t j = 0; j < X.values().size(); ++j) EXPECT_NEAR(Y.values()[j], X.values()[j], 1e-14);
}

TEST(NoiseTree, RepresentationOfWSquared) {
    const auto t = NoiseTree::build(1, 6, 1.5);
    const Grid g = Grid::build(0.0, 1.0, 2);
    Slice X(t, g, 6);
    for (std::size_t nu = 0; nu < X.node_count(); ++nu) {
        const double w = t->w(6, nu, 0);
        for (double& v : X.at(nu)) v = w * w;
    }
    const MartingaleRepresentation r = martingale_representation(X);
    EXPECT_NEAR(r.mean[0], 1.5, 1e-14);
    for (int k = 0; k < 6; ++k) {
        for (std::size_t nu = 0; nu < t->level_size(k); ++nu) {
            EXPECT_NEAR(r.gamma[0].at(k, nu)[1], 2.0 * t->w(k, nu, 0), 1e-13);
        }
    }
}

TEST(NoiseTree, FieldCsvLayout) {
    const auto t = NoiseTree::build(1, 1, 1.0);
    const Grid g = Grid::build(0.0, 1.0, 2);
    AdaptedField f(t, g, Layout::Interval);
    f.at(0, 0)[1] = 0.25;
    std::ostringstream os;
    write_field_csv(os, f);
    EXPECT_EQ(os.str(), "level,node_index,grid_index,value\n0,0,1,0\n0,0,2,0.25\n");
}

TEST(NoiseTree, LayoutLevels) {
    const auto t = NoiseTree::build(1, 4, 1.0);
    const Grid g = Grid::build(0.0, 1.0, 2);
    EXPECT_EQ(AdaptedField(t, g, Layout::Nodal).last_level(), 4);
    EXPECT_EQ(AdaptedField(t, g, Layout::Interval).last_level(), 3);
    AdaptedField f(t, g, Layout::Interval);
    EXPECT_THROW(f.slice(4), ShapeError);
}

TEST(SpaceTimeNorm, ConstantFieldNorms) {
    const auto t = NoiseTree::build(1, 4, 2.0);
    const Grid g = Grid::build(0.0, 1.0, 9);
    AdaptedField f(t, g, Layout::Interval);
    f.fill(1.0);
    const double h0sq = 9.0 / 10.0;  // h * n_x
    EXPECT_NEAR(spacetime_norm(f, SpaceTimeKind::X, 0), std::sqrt(2.0 * h0sq), 1e-14);
    EXPECT_NEAR(spacetime_norm(f, SpaceTimeKind::C, 0), std::sqrt(h0sq), 1e-14);
    EXPECT_NEAR(inner_x0(f, f), 2.0 * h0sq, 1e-14);
    AdaptedField n(t, g, Layout::Nodal);
    n.fill(1.0);
    EXPECT_NEAR(y_norm(n, 1), spacetime_norm(n, SpaceTimeKind::X, 1) + spacetime_norm(n, SpaceTimeKind::C, 0),
                1e-14);
}

TEST(SpaceTimeNorm, ExpectationUsesTreeProbabilities) {
    const auto t = NoiseTree::build(2, 3, 1.0);
    const Grid g = Grid::build(0.0, 1.0, 3);
    Slice s(t, g, 3);
    for (std::size_t nu = 0; nu < s.node_count(); ++nu) {
        const double w = t->w(3, nu, 0);
        for (double& v : s.at(nu)) v = w;
    }
    // E ||w||^2_H0 = T * h * n_x
    EXPECT_NEAR(expected_square(s, 0), 1.0 * 0.75, 1e-14);
    EXPECT_NEAR(z_norm(s, 0), std::sqrt(0.75), 1e-14);
}
