#include <cmath>
#include <memory>
#include <numbers>

#include <gtest/gtest.h>

#include "bspde/backward_solver.hpp"
#include "bspde/error.hpp"
#include "bspde/forward_solver.hpp"
#include "bspde/spacetime_norm.hpp"
#include "bspde/verification.hpp"

using namespace bspde;

namespace {

constexpr double kPi = std::numbers::pi;

ExperimentSetup small(const std::string& preset, int N, int M, int n_x) {
    ExperimentSetup s;
    s.preset = parse_preset(preset);
    s.N = N;
    s.M = M;
    s.n_x = n_x;
    return s;
}

double max_abs_diff(const AdaptedField& a, const AdaptedField& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.data().size(); ++j) m = std::max(m, std::abs(a.data()[j] - b.data()[j]));
    return m;
}

BackwardProblem random_backward(const SetupInstance& in, int M, std::uint64_t seed) {
    Rng rng(seed);
    BackwardProblem bp;
    bp.xi = random_field(in.tree, in.grid, Layout::Interval, rng);
    bp.Psi = random_slice(in.tree, in.grid, M, rng);
    return bp;
}

}  // namespace

TEST(ForwardSolver, ZeroDataGivesZero) {
    const SetupInstance in = instantiate(small("transport", 2, 3, 6));
    ForwardProblem fp;
    fp.Phi = zero_slice(*in.ops, 0);
    const ForwardSolution s = solve_forward(*in.ops, fp);
    for (double v : s.u.data()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardSolver, DeterministicHeatModeDecaysExactly) {
    const Grid g = Grid::build(0.0, 1.0, 15);
    const auto tree = NoiseTree::single_path(10, 0.5);
    const OperatorStack ops(std::make_shared<const ModelCoefficients>(make_preset(parse_preset("heat"), 0, 0.0, 1.0)), g,
                            tree);
    std::vector<double> mode;
    for (int j = 1; j <= 15; ++j) mode.push_back(std::sin(kPi * g.node(j)));
    ForwardProblem fp;
    fp.Phi = Slice::broadcast(tree, g, 0, mode);
    const ForwardSolution s = solve_forward(ops, fp);
    const double mu = 4.0 / (g.h() * g.h()) * std::pow(std::sin(kPi * g.h() / 2.0), 2);
    for (int k = 0; k <= 10; ++k) {
        const double factor = std::pow(1.0 + tree->dt() * mu, -k);
        for (int j = 0; j < 15; ++j) EXPECT_NEAR(s.u.at(k, 0)[static_cast<std::size_t>(j)], factor * mode[static_cast<std::size_t>(j)], 1e-14);
    }
}

TEST(ForwardSolver, NodalValuesAverageToDrift) {
    const SetupInstance in = instantiate(small("transport", 2, 4, 8));
    Rng rng(4);
    ForwardProblem fp;
    fp.phi = random_field(in.tree, in.grid, Layout::Interval, rng);
    fp.h = {random_field(in.tree, in.grid, Layout::Interval, rng), random_field(in.tree, in.grid, Layout::Interval, rng)};
    fp.Phi = random_slice(in.tree, in.grid, 0, rng);
    const ForwardSolution s = solve_forward(*in.ops, fp);
    for (int k = 0; k < 4; ++k) {
        const Slice e = conditional_expectation(s.u.slice(k + 1));
        const Slice y = s.drift.slice(k);
        for (std::size_t j = 0; j < e.values().size(); ++j) EXPECT_NEAR(e.values()[j], y.values()[j], 1e-13);
    }
}

TEST(ForwardSolver, Linearity) {
    const SetupInstance in = instantiate(small("driftful", 1, 5, 10));
    Rng rng(8);
    const AdaptedField a = random_field(in.tree, in.grid, Layout::Interval, rng);
    const AdaptedField b = random_field(in.tree, in.grid, Layout::Interval, rng);
    AdaptedField sum = a;
    sum.axpy(2.0, b);
    AdaptedField combo = apply_L(*in.ops, a).u;
    combo.axpy(2.0, apply_L(*in.ops, b).u);
    EXPECT_LT(max_abs_diff(apply_L(*in.ops, sum).u, combo), 1e-13);
}

TEST(ForwardSolver, ShapeMismatchThrows) {
    const SetupInstance in = instantiate(small("heat", 1, 3, 6));
    const SetupInstance other = instantiate(small("heat", 1, 4, 6));
    ForwardProblem fp;
    fp.phi = AdaptedField(other.tree, other.grid, Layout::Interval);
    fp.Phi = zero_slice(*in.ops, 0);
    EXPECT_THROW(solve_forward(*in.ops, fp), ShapeError);
}

TEST(ForwardSolver, TerminalPIsEvaluationOfP) {
    const SetupInstance in = instantiate(small("transport", 1, 4, 8));
    Rng rng(1);
    const AdaptedField v = random_field(in.tree, in.grid, Layout::Interval, rng);
    const Slice a = apply_P0(*in.ops, v);
    const Slice b = evaluate_at(apply_P(*in.ops, v).u, 4);
    for (std::size_t j = 0; j < a.values().size(); ++j) EXPECT_DOUBLE_EQ(a.values()[j], b.values()[j]);
}

TEST(BackwardSolver, AdjointMatchesDynamicProgramming) {
    const SetupInstance in = instantiate(small("transport", 2, 4, 10));
    const BackwardProblem bp = random_backward(in, 4, 3);
    const BackwardSolution a = solve_backward_adjoint(*in.ops, bp);
    const BackwardSolution d = solve_backward_dp(*in.ops, bp);
    EXPECT_LT(max_abs_diff(a.p, d.p), 1e-12);
    for (int i = 0; i < 2; ++i) EXPECT_LT(max_abs_diff(a.chi[static_cast<std::size_t>(i)], d.chi[static_cast<std::size_t>(i)]), 1e-12);
    const Slice pm = a.p.slice(4);
    for (std::size_t j = 0; j < pm.values().size(); ++j) EXPECT_DOUBLE_EQ(pm.values()[j], bp.Psi.values()[j]);
    const EquationResidual r = equation_residual(*in.ops, bp, a);
    EXPECT_LT(r.step, 1e-12);
    EXPECT_LT(r.chi, 1e-12);
}

TEST(BackwardSolver, DualityPairing) {
    const SetupInstance in = instantiate(small("random(3)", 2, 4, 8));
    Rng rng(12);
    ForwardProblem fp;
    fp.phi = random_field(in.tree, in.grid, Layout::Interval, rng);
    fp.h = {random_field(in.tree, in.grid, Layout::Interval, rng), random_field(in.tree, in.grid, Layout::Interval, rng)};
    fp.Phi = random_slice(in.tree, in.grid, 0, rng);
    const BackwardProblem bp = random_backward(in, 4, 13);
    const DualityPairing d = duality_pairing(fp, solve_forward(*in.ops, fp), bp, solve_backward_adjoint(*in.ops, bp));
    EXPECT_LT(d.relative_error(), 1e-12);
    EXPECT_NE(d.forward_side, 0.0);
}

TEST(BackwardSolver, DeterministicHeatMode) {
    const Grid g = Grid::build(0.0, 1.0, 11);
    const auto tree = NoiseTree::single_path(6, 0.3);
    const OperatorStack ops(std::make_shared<const ModelCoefficients>(make_preset(parse_preset("heat"), 0, 0.0, 1.0)), g,
                            tree);
    std::vector<double> mode;
    for (int j = 1; j <= 11; ++j) mode.push_back(std::sin(2.0 * kPi * g.node(j)));
    BackwardProblem bp;
    bp.Psi = Slice::broadcast(tree, g, 6, mode);
    const BackwardSolution s = solve_backward_dp(ops, bp);
    const double mu = 4.0 / (g.h() * g.h()) * std::pow(std::sin(kPi * g.h()), 2);
    for (int k = 0; k <= 6; ++k) {
        const double factor = std::pow(1.0 + tree->dt() * mu, -(6 - k));
        for (std::size_t j = 0; j < mode.size(); ++j) EXPECT_NEAR(s.p.at(k, 0)[j], factor * mode[j], 1e-14);
    }
}

TEST(BackwardSolver, NeumannMatchesDirectRoutes) {
    const SetupInstance in = instantiate(small("transport", 2, 4, 8));
    const BackwardProblem bp = random_backward(in, 4, 5);
    const BackwardSolution d = solve_backward_dp(*in.ops, bp);
    for (double K : {0.0, 5.0}) {
        const BackwardSolution n = solve_backward_neumann(*in.ops, bp, NeumannOptions{K, 1e-12, 50});
        EXPECT_LT(max_abs_diff(n.p, d.p), 1e-11) << "K = " << K;
        EXPECT_EQ(n.diagnostics.route, "neumann");
        EXPECT_LE(n.diagnostics.iterations, 4 + 2);
    }
}

TEST(BackwardSolver, NeumannReportsNonConvergence) {
    const SetupInstance in = instantiate(small("transport", 1, 6, 8));
    const BackwardProblem bp = random_backward(in, 6, 5);
    EXPECT_THROW(solve_backward_neumann(*in.ops, bp, NeumannOptions{0.0, 1e-300, 1}), ConvergenceError);
    EXPECT_THROW(solve_backward_neumann(*in.ops, bp, NeumannOptions{0.0, 0.0, 10}), GuardError);
}

TEST(BackwardSolver, BadWindowThrows) {
    const SetupInstance in = instantiate(small("heat", 1, 4, 6));
    BackwardProblem bp;
    bp.Psi = zero_slice(*in.ops, 2);
    bp.begin = 2;
    EXPECT_THROW(solve_backward_dp(*in.ops, bp), ShapeError);
}

TEST(BackwardSolver, PStarVanishesWithoutNoiseOperators) {
    const SetupInstance in = instantiate(small("heat", 1, 4, 8));
    EXPECT_EQ(estimate_P_star_norm(*in.ops, 0.0).norm, 0.0);
}

TEST(BackwardSolver, PStarEstimateDecreasesInK) {
    const SetupInstance in = instantiate(small("transport", 1, 6, 12));
    double prev = INFINITY;
    for (double K : {0.0, 5.0, 10.0, 20.0}) {
        const PStarEstimate e = estimate_P_star_norm(*in.ops, K);
        EXPECT_LT(e.norm, prev);
        EXPECT_LT(e.residual_gap, 1e-2);
        prev = e.norm;
    }
    const KChoice c = choose_K(*in.ops);
    EXPECT_TRUE(c.satisfied);
    EXPECT_EQ(c.K, 0.0);
}

TEST(BackwardSolver, PStarIsAdjointOfP) {
    const SetupInstance in = instantiate(small("transport", 2, 4, 8));
    Rng rng(6);
    const AdaptedField v = random_field(in.tree, in.grid, Layout::Interval, rng);
    const AdaptedField g = random_field(in.tree, in.grid, Layout::Interval, rng);
    const double lhs = inner_x0(apply_P(*in.ops, v).drift, g);
    const double rhs = inner_x0(v, apply_P_star(*in.ops, g));
    EXPECT_NEAR(lhs, rhs, 1e-13 * std::max(1.0, std::abs(lhs)));
}

TEST(BackwardSolver, KShiftAtZeroIsExact) {
    const SetupInstance in = instantiate(small("transport", 1, 4, 8));
    const BackwardProblem bp = random_backward(in, 4, 2);
    const KShiftDeviation d = k_shift_roundtrip(in.coeffs, in.grid, in.tree, bp, 0.0);
    EXPECT_EQ(d.p, 0.0);
    EXPECT_EQ(d.chi, 0.0);
}

TEST(BackwardSolver, NeumannResidualOrthogonalForTwoNoises) {
    const SetupInstance in = instantiate(small("transport", 2, 3, 6));
    const BackwardProblem bp = random_backward(in, 3, 7);
    const BackwardSolution s = solve_backward_adjoint(*in.ops, bp);
    // p_{k+1} = E[p_{k+1}|nu] + sum_i chi_i dw_i + residual
    const NoiseTree& t = *in.tree;
    for (int k = 0; k < 3; ++k) {
        for (std::size_t nu = 0; nu < t.level_size(k); ++nu) {
            for (std::size_t j = 0; j < 6; ++j) {
                double mean = 0.0;
                for (std::size_t c = 0; c < 4; ++c) mean += 0.25 * s.p.at(k + 1, t.child(nu, c))[j];
                for (std::size_t c = 0; c < 4; ++c) {
                    double v = mean + s.martingale_residual.at(k + 1, t.child(nu, c))[j];
                    for (int i = 0; i < 2; ++i) v += s.chi[static_cast<std::size_t>(i)].at(k, nu)[j] * t.increment(c, i);
                    EXPECT_NEAR(v, s.p.at(k + 1, t.child(nu, c))[j], 1e-12);
                }
            }
        }
    }
}
