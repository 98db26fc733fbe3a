#include "bspde/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "bspde/error.hpp"
#include "bspde/spacetime_norm.hpp"

namespace bspde {

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

/// |<a, x> - <b, y>| over the larger Cauchy-Schwarz bound of the two pairings.
struct Inner {
    double operator()(const AdaptedField& u, const AdaptedField& v) const { return inner_x0(u, v); }
    double operator()(const Slice& u, const Slice& v) const { return inner_z0(u, v); }
};

template <class U, class V, class W, class Z>
double pairing_gap(const U& a, const V& x, const W& b, const Z& y) {
    const Inner inner;
    const double scale = std::max(std::sqrt(inner(a, a) * inner(x, x)), std::sqrt(inner(b, b) * inner(y, y)));
    const double gap = std::abs(inner(a, x) - inner(b, y));
    return scale == 0.0 ? 0.0 : gap / scale;
}

AdaptedField difference(const AdaptedField& a, const AdaptedField& b) {
    AdaptedField d = a;
    d.axpy(-1.0, b);
    return d;
}

double max_abs_levels(const AdaptedField& f, int first, int last) {
    double m = 0.0;
    for (int k = first; k <= last; ++k) {
        for (double v : f.level(k)) m = std::max(m, std::abs(v));
    }
    return m;
}

double max_abs_diff_levels(const AdaptedField& a, const AdaptedField& b, int first, int last) {
    double m = 0.0;
    for (int k = first; k <= last; ++k) {
        auto x = a.level(k);
        auto y = b.level(k);
        for (std::size_t j = 0; j < x.size(); ++j) m = std::max(m, std::abs(x[j] - y[j]));
    }
    return m;
}

double w_or_zero(std::span<const double> w, std::size_t i) { return i < w.size() ? w[i] : 0.0; }

// Smooth data shared by the refinement and perturbation studies.
double data_phi(double s, double t, std::span<const double> w) {
    return (1.0 + 0.5 * std::tanh(w_or_zero(w, 0))) * std::sin(kPi * s) * (1.0 + t);
}
double data_Phi(double s, double, std::span<const double>) {
    return std::sin(kPi * s) + 0.3 * std::sin(3.0 * kPi * s);
}
double data_xi(double s, double t, std::span<const double> w) {
    return std::cos(w_or_zero(w, 0)) * std::sin(2.0 * kPi * s) + 0.5 * std::sin(kPi * s) * t;
}
double data_Psi(double s, double, std::span<const double> w) {
    const double w0 = w_or_zero(w, 0);
    return (1.0 + 0.5 * std::tanh(w0)) * std::sin(kPi * s) + 0.2 * w0 * std::sin(2.0 * kPi * s);
}
double data_xi_perturbation(double s, double t, std::span<const double> w) {
    return s * (1.0 - s) * (1.0 + std::cos(w_or_zero(w, 0) + t));
}
double data_Psi_perturbation(double s, double, std::span<const double> w) {
    return std::sin(2.0 * kPi * s) * std::tanh(w_or_zero(w, 0));
}

DataFunction data_h(int i) {
    return [i](double s, double, std::span<const double> w) {
        return 0.5 * std::cos(w_or_zero(w, static_cast<std::size_t>(i))) * std::sin(2.0 * kPi * s) *
               (1.0 + 0.1 * i);
    };
}

std::string preset_text(const PresetSpec& p) {
    if (p.name == "random") return "random(" + std::to_string(p.seed) + ")";
    return p.name;
}

std::string k_label(double K) { return "K=" + format_double(K); }

double solution_diff_y2(const BackwardSolution& a, const BackwardSolution& b) {
    double d = y_norm(difference(a.p, b.p), 2);
    for (std::size_t i = 0; i < a.chi.size(); ++i) {
        d += spacetime_norm(difference(a.chi[i], b.chi[i]), SpaceTimeKind::X, 1);
    }
    return d;
}

ConditionReport sampled_margins(const ModelCoefficients& model, const Grid& grid, const NoiseTree& tree) {
    return certify(sample_coefficients(model, grid, tree));
}

}  // namespace

std::string ExperimentSetup::label() const {
    return preset_text(preset) + "_N" + std::to_string(N) + "_M" + std::to_string(M) + "_nx" + std::to_string(n_x);
}

void ExperimentSetup::describe(ExperimentReport& report) const {
    report.param("preset", preset_text(preset));
    report.param("preset_amplitude", preset.amplitude);
    report.param("preset_stochastic", static_cast<long long>(preset.stochastic));
    report.param("x_lo", x_lo);
    report.param("x_hi", x_hi);
    report.param("n_x", static_cast<long long>(n_x));
    report.param("N", static_cast<long long>(N));
    report.param("M", static_cast<long long>(M));
    report.param("T", T);
    report.param("seed", static_cast<long long>(seed));
}

SetupInstance instantiate(const ExperimentSetup& setup) {
    Grid grid = Grid::build(setup.x_lo, setup.x_hi, setup.n_x);
    TreePtr tree = setup.N == 0 ? NoiseTree::single_path(setup.M, setup.T) : NoiseTree::build(setup.N, setup.M, setup.T);
    auto coeffs = std::make_shared<const ModelCoefficients>(make_preset(setup.preset, setup.N, setup.x_lo, setup.x_hi));
    auto ops = std::make_unique<OperatorStack>(coeffs, grid, tree);
    return SetupInstance{grid, tree, coeffs, std::move(ops)};
}

AdaptedField random_field(const TreePtr& tree, const Grid& grid, Layout layout, Rng& rng) {
    AdaptedField f(tree, grid, layout);
    for (double& v : f.data()) v = rng.uniform(-1.0, 1.0);
    return f;
}

Slice random_slice(const TreePtr& tree, const Grid& grid, int level, Rng& rng) {
    Slice s(tree, grid, level);
    for (double& v : s.values()) v = rng.uniform(-1.0, 1.0);
    return s;
}

namespace {

void sample_level(const NoiseTree& tree, const Grid& grid, int k, std::size_t node, const DataFunction& g,
                  std::vector<double>& w, std::span<double> out) {
    tree.w_all(k, node, w);
    const double len = grid.x_hi() - grid.x_lo();
    for (int j = 1; j <= grid.n_x(); ++j) {
        const double s = (grid.node(j) - grid.x_lo()) / len;
        out[static_cast<std::size_t>(j - 1)] = g(s, tree.time(k), w);
    }
}

}  // namespace

AdaptedField sample_field(const TreePtr& tree, const Grid& grid, Layout layout, const DataFunction& g) {
    AdaptedField f(tree, grid, layout);
    std::vector<double> w(static_cast<std::size_t>(tree->N()));
    for (int k = 0; k <= f.last_level(); ++k) {
        for (std::size_t nu = 0; nu < tree->level_size(k); ++nu) sample_level(*tree, grid, k, nu, g, w, f.at(k, nu));
    }
    return f;
}

Slice sample_slice(const TreePtr& tree, const Grid& grid, int level, const DataFunction& g) {
    Slice s(tree, grid, level);
    std::vector<double> w(static_cast<std::size_t>(tree->N()));
    for (std::size_t nu = 0; nu < s.node_count(); ++nu) sample_level(*tree, grid, level, nu, g, w, s.at(nu));
    return s;
}

ExperimentReport verify_duality(const ExperimentSetup& setup, int n_trials) {
    if (n_trials < 1) throw GuardError("verify_duality: n_trials must be >= 1");
    const auto t0 = Clock::now();
    ExperimentReport rep("verify_duality");
    setup.describe(rep);
    rep.param("n_trials", static_cast<long long>(n_trials));
    const SetupInstance in = instantiate(setup);
    const OperatorStack& ops = *in.ops;
    const int N = setup.N;
    const int M = setup.M;
    const std::string prov = "solve_forward+solve_backward_adjoint seed=" + std::to_string(setup.seed);

    {
        ForwardProblem fp;
        fp.Phi = zero_slice(ops, 0);
        BackwardProblem bp;
        bp.Psi = zero_slice(ops, M);
        const DualityPairing d = duality_pairing(fp, solve_forward(ops, fp), bp, solve_backward_adjoint(ops, bp));
        rep.holds("zero_inputs_pair_to_zero", d.forward_side == 0.0 && d.backward_side == 0.0, prov);
    }

    Rng rng(setup.seed);
    double pair = 0.0, pair_L = 0.0, pair_ITL = 0.0, pair_Lambda = 0.0, pair_Q = 0.0;
    std::vector<double> pair_M(static_cast<std::size_t>(N), 0.0);
    SchemeOptions q;
    q.drop_noise_operators = true;
    for (int trial = 0; trial < n_trials; ++trial) {
        ForwardProblem fp;
        fp.phi = random_field(in.tree, in.grid, Layout::Interval, rng);
        for (int i = 0; i < N; ++i) fp.h.push_back(random_field(in.tree, in.grid, Layout::Interval, rng));
        fp.Phi = random_slice(in.tree, in.grid, 0, rng);
        BackwardProblem bp;
        bp.xi = random_field(in.tree, in.grid, Layout::Interval, rng);
        bp.Psi = random_slice(in.tree, in.grid, M, rng);

        pair = std::max(pair, duality_pairing(fp, solve_forward(ops, fp), bp, solve_backward_adjoint(ops, bp))
                                  .relative_error());
        pair_Q = std::max(pair_Q, duality_pairing(fp, solve_forward(ops, fp, q), bp,
                                                  solve_backward_adjoint(ops, bp, q))
                                      .relative_error());

        BackwardProblem only_xi;
        only_xi.xi = bp.xi;
        only_xi.Psi = zero_slice(ops, M);
        const BackwardSolution bs_xi = solve_backward_adjoint(ops, only_xi);
        BackwardProblem only_Psi;
        only_Psi.Psi = bp.Psi;
        const BackwardSolution bs_Psi = solve_backward_adjoint(ops, only_Psi);

        const ForwardSolution Lphi = apply_L(ops, fp.phi);
        pair_L = std::max(pair_L, pairing_gap(Lphi.drift, bp.xi, fp.phi, bs_xi.p));
        pair_ITL = std::max(pair_ITL, pairing_gap(Lphi.u.slice(M), bp.Psi, fp.phi, bs_Psi.p));
        for (int i = 0; i < N; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const ForwardSolution Mh = apply_M(ops, i, fp.h[ui]);
            pair_M[ui] = std::max(pair_M[ui], pairing_gap(Mh.drift, bp.xi, fp.h[ui], bs_xi.chi[ui]));
            pair_M[ui] = std::max(pair_M[ui],
                                  pairing_gap(Mh.u.slice(M), bp.Psi, fp.h[ui], bs_Psi.chi[ui]));
        }
        const ForwardSolution LamPhi = apply_Lambda(ops, fp.Phi);
        pair_Lambda =
            std::max(pair_Lambda, pairing_gap(LamPhi.u.slice(M), bp.Psi, fp.Phi, bs_Psi.p.slice(0)));
    }
    const double tol = 1e-11;
    rep.at_most("pairing_rel_error", pair, tol, prov);
    rep.at_most("L_rel_error", pair_L, tol, prov);
    for (int i = 0; i < N; ++i) {
        rep.at_most("M" + std::to_string(i + 1) + "_rel_error", pair_M[static_cast<std::size_t>(i)], tol, prov);
    }
    rep.at_most("ITLambda_rel_error", pair_Lambda, tol, prov);
    rep.at_most("ITL_rel_error", pair_ITL, tol, prov);
    rep.at_most("Q_pairing_rel_error", pair_Q, tol, prov + " noise operators dropped");
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport verify_cross_solver(const ExperimentSetup& setup, int n_trials) {
    if (n_trials < 1) throw GuardError("verify_cross_solver: n_trials must be >= 1");
    const auto t0 = Clock::now();
    ExperimentReport rep("verify_cross_solver");
    setup.describe(rep);
    rep.param("n_trials", static_cast<long long>(n_trials));
    const SetupInstance in = instantiate(setup);
    const OperatorStack& ops = *in.ops;
    Rng rng(setup.seed);
    double p_c0 = 0.0, p_x0 = 0.0, chi_c0 = 0.0, chi_x0 = 0.0, res_adj = 0.0, res_dp = 0.0, p_scale = 0.0;
    for (int trial = 0; trial < n_trials; ++trial) {
        BackwardProblem bp;
        bp.xi = random_field(in.tree, in.grid, Layout::Interval, rng);
        bp.Psi = random_slice(in.tree, in.grid, setup.M, rng);
        const BackwardSolution a = solve_backward_adjoint(ops, bp);
        const BackwardSolution d = solve_backward_dp(ops, bp);
        const AdaptedField dp = difference(a.p, d.p);
        p_c0 = std::max(p_c0, spacetime_norm(dp, SpaceTimeKind::C, 0));
        p_x0 = std::max(p_x0, spacetime_norm(dp, SpaceTimeKind::X, 0));
        p_scale = std::max(p_scale, spacetime_norm(d.p, SpaceTimeKind::C, 0));
        for (std::size_t i = 0; i < a.chi.size(); ++i) {
            const AdaptedField dc = difference(a.chi[i], d.chi[i]);
            chi_c0 = std::max(chi_c0, spacetime_norm(dc, SpaceTimeKind::C, 0));
            chi_x0 = std::max(chi_x0, spacetime_norm(dc, SpaceTimeKind::X, 0));
        }
        const EquationResidual ra = equation_residual(ops, bp, a);
        const EquationResidual rd = equation_residual(ops, bp, d);
        res_adj = std::max({res_adj, ra.step, ra.chi});
        res_dp = std::max({res_dp, rd.step, rd.chi});
    }
    const std::string prov = "solve_backward_adjoint vs solve_backward_dp seed=" + std::to_string(setup.seed);
    const double tol = 1e-10;
    rep.at_most("p_diff_C0", p_c0, tol, prov);
    rep.at_most("p_diff_X0", p_x0, tol, prov);
    rep.at_most("chi_diff_C0", chi_c0, tol, prov);
    rep.at_most("chi_diff_X0", chi_x0, tol, prov);
    rep.at_most("adjoint_equation_residual", res_adj, tol, "solve_backward_adjoint");
    rep.at_most("dp_equation_residual", res_dp, tol, "solve_backward_dp");
    rep.monitor("p_norm_C0", p_scale, "solve_backward_dp");
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport neumann_decomposition(const ExperimentSetup& setup, const NeumannSettings& settings) {
    const auto t0 = Clock::now();
    ExperimentReport rep("neumann_decomposition");
    setup.describe(rep);
    rep.param("tol", settings.tol);
    rep.param("max_iter", static_cast<long long>(settings.max_iter));
    rep.param("contraction_target", settings.target);
    rep.param("K_policy", settings.fixed_K ? "fixed" : "smallest candidate meeting target");
    const SetupInstance in = instantiate(setup);
    const OperatorStack& ops = *in.ops;
    const std::string est_prov = "estimate_P_star_norm iterations=" + std::to_string(kPowerIterations) +
                                 " seed=" + std::to_string(kPowerSeed);

    double K = 0.0;
    double estimate = 0.0;
    if (settings.fixed_K) {
        K = *settings.fixed_K;
        estimate = estimate_P_star_norm(ops, K).norm;
        rep.monitor("P_star_estimate_" + k_label(K), estimate, est_prov);
    } else {
        const KChoice choice = choose_K(ops, settings.K_candidates, settings.target);
        K = choice.K;
        estimate = choice.estimate;
        for (const auto& [k, e] : choice.sweep) rep.monitor("P_star_estimate_" + k_label(k), e, est_prov);
    }
    rep.monitor("K_chosen", K, "choose_K");
    rep.at_most("P_star_estimate_at_K", estimate, settings.target, est_prov);

    Rng rng(setup.seed);
    BackwardProblem bp;
    bp.xi = random_field(in.tree, in.grid, Layout::Interval, rng);
    bp.Psi = random_slice(in.tree, in.grid, setup.M, rng);
    const std::string prov = "solve_backward_neumann K=" + format_double(K) + " seed=" + std::to_string(setup.seed);

    BackwardSolution sol;
    try {
        sol = solve_backward_neumann(ops, bp, NeumannOptions{K, settings.tol, settings.max_iter});
    } catch (const ConvergenceError& e) {
        rep.holds("converged", false, prov);
        rep.monitor("observed_contraction", e.contraction_estimate(), prov);
        rep.runtime_seconds = seconds_since(t0);
        return rep;
    }
    const auto& hist = sol.diagnostics.residual_history;
    rep.holds("converged", true, prov);
    rep.monitor("iterations", sol.diagnostics.iterations, prov);
    for (std::size_t m = 0; m < hist.size(); ++m) rep.monitor("residual_" + std::to_string(m), hist[m], prov);

    // Geometric phase: residuals at or above tol, before the final converged step.
    std::size_t last = 0;
    while (last + 1 < hist.size() && hist[last + 1] >= settings.tol) ++last;
    if (last == 0 || !(hist[0] > 0.0)) {
        rep.skipped("observed_rate_over_estimate", prov + " (fewer than two residuals above tol)");
    } else {
        double max_ratio = 0.0;
        for (std::size_t m = 1; m <= last; ++m) {
            const double r = hist[m] / hist[m - 1];
            rep.monitor("residual_ratio_" + std::to_string(m), r, prov);
            max_ratio = std::max(max_ratio, r);
        }
        const double observed = std::pow(hist[last] / hist[0], 1.0 / static_cast<double>(last));
        rep.monitor("observed_rate", observed, prov);
        rep.within("observed_rate_over_estimate", observed / estimate, 0.9, 1.1, prov + "; " + est_prov);
        rep.at_most("max_ratio_over_estimate", max_ratio / estimate, 1.0, prov + "; " + est_prov);
    }

    const BackwardSolution adj = solve_backward_adjoint(ops, bp);
    const BackwardSolution dp = solve_backward_dp(ops, bp);
    for (const auto& [name, ref] : {std::pair<const char*, const BackwardSolution*>{"adjoint", &adj},
                                    std::pair<const char*, const BackwardSolution*>{"dp", &dp}}) {
        const AdaptedField d = difference(sol.p, ref->p);
        double chi_c0 = 0.0, chi_x0 = 0.0;
        for (std::size_t i = 0; i < sol.chi.size(); ++i) {
            const AdaptedField dc = difference(sol.chi[i], ref->chi[i]);
            chi_c0 = std::max(chi_c0, spacetime_norm(dc, SpaceTimeKind::C, 0));
            chi_x0 = std::max(chi_x0, spacetime_norm(dc, SpaceTimeKind::X, 0));
        }
        const std::string p2 = prov + " vs solve_backward_" + name;
        rep.at_most(std::string("p_diff_C0_vs_") + name, spacetime_norm(d, SpaceTimeKind::C, 0), settings.tol, p2);
        rep.at_most(std::string("p_diff_X0_vs_") + name, spacetime_norm(d, SpaceTimeKind::X, 0), settings.tol, p2);
        rep.at_most(std::string("chi_diff_C0_vs_") + name, chi_c0, settings.tol, p2);
        rep.at_most(std::string("chi_diff_X0_vs_") + name, chi_x0, settings.tol, p2);
    }
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport certify_coefficients(int n_draws, std::uint64_t seed) {
    if (n_draws < 1) throw GuardError("certify_coefficients: n_draws must be >= 1");
    const auto t0 = Clock::now();
    ExperimentReport rep("certify_coefficients");
    rep.param("n_draws", static_cast<long long>(n_draws));
    rep.param("seed", static_cast<long long>(seed));
    rep.param("dimensions", "n = 1 + d mod 3, N = 1 + (d / 3) mod 3");

    const CoefficientSet ex = example1_coefficients();
    const ConditionReport cr = certify(ex);
    rep.within("example1_margin", cr.margin_standard, 0.01 - 1e-12, 0.01 + 1e-12, "check_coercivity");
    rep.within("example1_strengthened_margin", cr.margin_strengthened, -0.49 - 1e-10, -0.49 + 1e-10,
               "check_strengthened_coercivity");

    Rng rng(seed);
    long long implies_violations = 0, implies_positive = 0;
    long long equivalence_violations = 0, equivalence_draws = 0;
    long long criterion_violations = 0, criterion_positive = 0;
    const double slack = 1e-12;
    for (int d = 0; d < n_draws; ++d) {
        const int n = 1 + d % 3;
        const int N = 1 + (d / 3) % 3;
        const int N0 = 1 + (d / 9) % N;
        const CoefficientSample s = random_sample(n, N, N, rng);
        const double standard = smallest_eigenvalue(standard_form(s));
        const double strengthened = smallest_eigenvalue(strengthened_form(s));
        if (strengthened > 0.0) {
            ++implies_positive;
            if (standard < strengthened - slack) ++implies_violations;
        }
        if (n == 1 || N == 1) {
            ++equivalence_draws;
            if (std::abs(standard - strengthened) > slack * std::max(1.0, std::abs(standard))) {
                ++equivalence_violations;
            }
        }
        CoefficientSet partial{n, N, {random_sample(n, N, N0, rng)}};
        const double m0 = check_criterion_N0(partial, N0).margin;
        if (m0 > 0.0) {
            ++criterion_positive;
            if (check_strengthened_coercivity(partial).margin < m0 - slack) ++criterion_violations;
        }
    }
    const std::string prov = "random_sample seed=" + std::to_string(seed);
    rep.at_most("strengthened_implies_standard_violations", static_cast<double>(implies_violations), 0.0, prov);
    rep.at_least("strengthened_positive_draws", static_cast<double>(implies_positive), 1.0, prov);
    rep.at_most("scalar_or_single_noise_equivalence_violations", static_cast<double>(equivalence_violations), 0.0,
                prov);
    rep.at_least("scalar_or_single_noise_draws", static_cast<double>(equivalence_draws), 1.0, prov);
    rep.at_most("single_block_criterion_violations", static_cast<double>(criterion_violations), 0.0, prov);
    rep.at_least("single_block_criterion_positive_draws", static_cast<double>(criterion_positive), 1.0, prov);
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport certify_preset(const ExperimentSetup& setup) {
    const auto t0 = Clock::now();
    ExperimentReport rep("certify_preset");
    setup.describe(rep);
    const SetupInstance in = instantiate(setup);
    const ConditionReport cr = sampled_margins(*in.coeffs, in.grid, *in.tree);
    const ParameterBounds pb = parameter_bounds(*in.coeffs, in.grid, *in.tree);
    const std::string prov = "sample_coefficients on every interior node, interval and tree node";
    rep.monitor("margin_standard", cr.margin_standard, prov);
    rep.monitor("margin_strengthened", cr.margin_strengthened, prov);
    rep.monitor("b_sup", pb.b, prov);
    rep.monitor("b_min", pb.b_min, prov);
    rep.monitor("f_sup", pb.f, prov);
    rep.monitor("lambda_sup", pb.lambda, prov);
    rep.monitor("lambda_plus", pb.lambda_plus, prov);
    rep.monitor("beta_sup", pb.beta, prov);
    rep.monitor("beta_bar_sup", pb.beta_bar, prov);
    rep.monitor("db_dx_sup", pb.db_dx, pb.derivative_method);
    rep.monitor("df_dx_sup", pb.df_dx, pb.derivative_method);
    rep.monitor("dbeta_dx_sup", pb.dbeta_dx, pb.derivative_method);
    rep.monitor("beta_at_boundary", pb.beta_at_boundary, prov);
    const SchemeValidation v = validate_scheme(*in.coeffs, in.grid, *in.tree);
    rep.holds("scheme_valid", v.ok(), "validate_scheme");
    rep.monitor("cfl_value", v.cfl_value, "validate_scheme");
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport martingale_experiment(int n_trials, std::uint64_t seed, int n_x) {
    if (n_trials < 1) throw GuardError("martingale_experiment: n_trials must be >= 1");
    const auto t0 = Clock::now();
    ExperimentReport rep("martingale_representation");
    rep.param("n_trials", static_cast<long long>(n_trials));
    rep.param("seed", static_cast<long long>(seed));
    rep.param("n_x", static_cast<long long>(n_x));
    const Grid grid = Grid::build(0.0, 1.0, n_x);
    Rng rng(seed);
    for (int N : {1, 2}) {
        const int M = N == 1 ? 8 : 6;
        const double T = 1.0;
        rep.param("M_N" + std::to_string(N), static_cast<long long>(M));
        const TreePtr tree = NoiseTree::build(N, M, T);
        const std::string tag = "_N" + std::to_string(N);
        const std::string prov = "martingale_representation+reconstruct seed=" + std::to_string(seed);
        double recon = 0.0, residual = 0.0;
        for (int trial = 0; trial < n_trials; ++trial) {
            const Slice X = random_slice(tree, grid, M, rng);
            const MartingaleRepresentation r = martingale_representation(X);
            const Slice Y = reconstruct(r);
            for (std::size_t j = 0; j < X.values().size(); ++j) {
                recon = std::max(recon, std::abs(X.values()[j] - Y.values()[j]));
            }
            residual = std::max(residual, max_abs_levels(r.residual, 0, M));
        }
        rep.at_most("reconstruction_error" + tag, recon, 1e-12, prov);
        if (N == 1) {
            rep.at_most("residual_max" + tag, residual, 1e-12, prov);
        } else {
            rep.monitor("residual_max" + tag, residual, prov);
        }

        // X = w_1(T)^2: mean T, gamma_1 = 2 w_1(t_k), other components zero.
        Slice X(tree, grid, M);
        for (std::size_t nu = 0; nu < X.node_count(); ++nu) {
            const double w = tree->w(M, nu, 0);
            for (double& v : X.at(nu)) v = w * w;
        }
        const MartingaleRepresentation r = martingale_representation(X);
        double mean_err = 0.0, gamma_err = 0.0;
        for (double v : r.mean) mean_err = std::max(mean_err, std::abs(v - T));
        for (int k = 0; k < M; ++k) {
            for (std::size_t nu = 0; nu < tree->level_size(k); ++nu) {
                for (int i = 0; i < N; ++i) {
                    const double expected = i == 0 ? 2.0 * tree->w(k, nu, 0) : 0.0;
                    for (double v : r.gamma[static_cast<std::size_t>(i)].at(k, nu)) {
                        gamma_err = std::max(gamma_err, std::abs(v - expected));
                    }
                }
            }
        }
        rep.at_most("w_squared_mean_error" + tag, mean_err, 1e-12, "closed form vs enumeration");
        rep.at_most("w_squared_gamma_error" + tag, gamma_err, 1e-12, "closed form vs enumeration");
    }
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport verify_semigroup(const ExperimentSetup& setup, int tau_level, int s_level) {
    if (tau_level < 0 || tau_level >= s_level || s_level >= setup.M) {
        throw GuardError("verify_semigroup: need 0 <= tau < s < M, got tau = " + std::to_string(tau_level) +
                         ", s = " + std::to_string(s_level));
    }
    const auto t0 = Clock::now();
    ExperimentReport rep("verify_semigroup");
    setup.describe(rep);
    rep.param("tau_level", static_cast<long long>(tau_level));
    rep.param("s_level", static_cast<long long>(s_level));
    const SetupInstance in = instantiate(setup);
    const OperatorStack& ops = *in.ops;
    Rng rng(setup.seed);
    BackwardProblem bp;
    bp.xi = random_field(in.tree, in.grid, Layout::Interval, rng);
    bp.Psi = random_slice(in.tree, in.grid, setup.M, rng);

    using Solver = BackwardSolution (*)(const OperatorStack&, const BackwardProblem&, const SchemeOptions&);
    for (const auto& [route, solve] : {std::pair<const char*, Solver>{"adjoint", &solve_backward_adjoint},
                                       std::pair<const char*, Solver>{"dp", &solve_backward_dp}}) {
        const BackwardSolution full = solve(ops, bp, {});
        BackwardProblem window;
        window.xi = bp.xi;
        window.Psi = full.p.slice(s_level);
        window.begin = tau_level;
        const BackwardSolution part = solve(ops, window, {});
        const double scale = std::max(1.0, max_abs_levels(full.p, tau_level, s_level));
        const double p_err = max_abs_diff_levels(full.p, part.p, tau_level, s_level) / scale;
        double chi_err = 0.0;
        for (std::size_t i = 0; i < full.chi.size(); ++i) {
            const double cs = std::max(1.0, max_abs_levels(full.chi[i], tau_level, s_level - 1));
            chi_err = std::max(chi_err, max_abs_diff_levels(full.chi[i], part.chi[i], tau_level, s_level - 1) / cs);
        }
        const std::string prov = std::string("solve_backward_") + route + " window re-solve seed=" +
                                 std::to_string(setup.seed);
        rep.at_most(std::string("p_window_error_") + route, p_err, 1e-11, prov);
        rep.at_most(std::string("chi_window_error_") + route, chi_err, 1e-11, prov);
    }
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport energy_ratio_report(const ExperimentSetup& setup, int refinement_levels) {
    if (refinement_levels < 1) throw GuardError("energy_ratio_report: need at least one refinement level");
    const auto t0 = Clock::now();
    ExperimentReport rep("energy_ratio_report");
    setup.describe(rep);
    rep.param("refinement_levels", static_cast<long long>(refinement_levels));
    rep.param("refinement", "M and n_x + 1 doubled per level");

    const SetupInstance coarse = instantiate(setup);
    const ConditionReport cr = sampled_margins(*coarse.coeffs, coarse.grid, *coarse.tree);
    rep.monitor("margin_standard", cr.margin_standard, "sample_coefficients");
    rep.monitor("margin_strengthened", cr.margin_strengthened, "sample_coefficients");
    const bool standard_ok = cr.margin_standard > 0.0;
    const bool strengthened_ok = cr.margin_strengthened > 0.0;

    struct Series {
        std::string name;
        bool asserted;
        std::vector<double> values;
    };
    std::vector<Series> series{{"forward_Y1_ratio", standard_ok, {}},
                               {"forward_Y2_ratio", standard_ok, {}},
                               {"rho1", standard_ok, {}},
                               {"rho2", strengthened_ok, {}}};
    bool undefined = false;

    for (int r = 0; r < refinement_levels; ++r) {
        ExperimentSetup s = setup;
        s.M = setup.M << r;
        s.n_x = ((setup.n_x + 1) << r) - 1;
        const SetupInstance in = instantiate(s);
        const OperatorStack& ops = *in.ops;
        const int N = s.N;

        ForwardProblem fp;
        fp.phi = sample_field(in.tree, in.grid, Layout::Interval, data_phi);
        for (int i = 0; i < N; ++i) fp.h.push_back(sample_field(in.tree, in.grid, Layout::Interval, data_h(i)));
        fp.Phi = sample_slice(in.tree, in.grid, 0, data_Phi);
        BackwardProblem bp;
        bp.xi = sample_field(in.tree, in.grid, Layout::Interval, data_xi);
        bp.Psi = sample_slice(in.tree, in.grid, s.M, data_Psi);

        const ForwardSolution fs = solve_forward(ops, fp);
        const BackwardSolution bs = solve_backward_adjoint(ops, bp);

        double h_x0 = 0.0, h_x1 = 0.0, chi_x0 = 0.0, chi_x1 = 0.0;
        for (const auto& h : fp.h) {
            h_x0 += spacetime_norm(h, SpaceTimeKind::X, 0);
            h_x1 += spacetime_norm(h, SpaceTimeKind::X, 1);
        }
        for (const auto& c : bs.chi) {
            chi_x0 += spacetime_norm(c, SpaceTimeKind::X, 0);
            chi_x1 += spacetime_norm(c, SpaceTimeKind::X, 1);
        }
        const double den_f1 = spacetime_norm(fp.phi, SpaceTimeKind::X, -1) + z_norm(fp.Phi, 0) + h_x0;
        const double den_f2 = spacetime_norm(fp.phi, SpaceTimeKind::X, 0) + z_norm(fp.Phi, 1) + h_x1;
        const double den_b1 = spacetime_norm(bp.xi, SpaceTimeKind::X, -1) + z_norm(bp.Psi, 0);
        const double den_b2 = spacetime_norm(bp.xi, SpaceTimeKind::X, 0) + z_norm(bp.Psi, 1);
        const double nums[4] = {y_norm(fs.drift, fs.u, 1), y_norm(fs.drift, fs.u, 2), y_norm(bs.p, 1) + chi_x0,
                                y_norm(bs.p, 2) + chi_x1};
        const double dens[4] = {den_f1, den_f2, den_b1, den_b2};
        for (std::size_t q = 0; q < series.size(); ++q) {
            const std::string name = series[q].name + "_level" + std::to_string(r);
            if (dens[q] == 0.0) {
                rep.skipped(name, "zero data");
                undefined = true;
                continue;
            }
            const double v = nums[q] / dens[q];
            series[q].values.push_back(v);
            rep.monitor(name, v, "M=" + std::to_string(s.M) + " n_x=" + std::to_string(s.n_x));
        }
    }
    for (const auto& sr : series) {
        const std::string name = sr.name + "_drift_factor";
        if (undefined || sr.values.empty()) {
            rep.skipped(name, "ratios undefined");
            continue;
        }
        const auto [lo, hi] = std::minmax_element(sr.values.begin(), sr.values.end());
        const double drift = *hi / *lo;
        const std::string prov = "max/min over refinement levels";
        if (sr.asserted) {
            rep.at_most(name, drift, 2.0, prov);
        } else {
            rep.monitor(name, drift, prov + "; margin not positive, not asserted");
        }
    }
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

namespace {

ModelCoefficients perturbed_model(const ModelCoefficients& m, double eps, double x_lo, double x_hi) {
    ModelCoefficients p = m;
    p.name = m.name + "+perturbed";
    const double len = x_hi - x_lo;
    auto s_of = [x_lo, len](double x) { return (x - x_lo) / len; };
    p.b = [g = m.b, eps, s_of](double x, const NodeContext& c) {
        return g(x, c) + eps * (0.5 + 0.5 * std::sin(2.0 * kPi * s_of(x)));
    };
    p.f = [g = m.f, eps, s_of](double x, const NodeContext& c) { return g(x, c) + eps * std::cos(kPi * s_of(x)); };
    p.lambda = [g = m.lambda, eps, s_of](double x, const NodeContext& c) { return g(x, c) + eps * (1.0 - s_of(x)); };
    for (std::size_t i = 0; i < p.beta.size(); ++i) {
        p.beta[i] = [g = m.beta[i], eps, s_of](double x, const NodeContext& c) {
            return g(x, c) + eps * std::sin(kPi * s_of(x));
        };
        p.beta_bar[i] = [g = m.beta_bar[i], eps, s_of](double x, const NodeContext& c) {
            return g(x, c) + eps * std::cos(2.0 * kPi * s_of(x));
        };
    }
    return p;
}

void require_margins(const ModelCoefficients& m, const Grid& grid, const NoiseTree& tree, const std::string& what) {
    const ConditionReport cr = sampled_margins(m, grid, tree);
    if (!(cr.margin_standard > 0.0) || !(cr.margin_strengthened > 0.0)) {
        throw CoefficientError("robustness: " + what + " coefficients rejected, margin = " +
                               format_double(cr.margin_standard) + ", strengthened margin = " +
                               format_double(cr.margin_strengthened));
    }
}

}  // namespace

ExperimentReport robustness_experiment(const ExperimentSetup& setup, const std::string& perturbation,
                                       const std::vector<double>& epsilons) {
    if (perturbation != "full" && perturbation != "xi") {
        throw GuardError("robustness: perturbation must be \"full\" or \"xi\", got \"" + perturbation + "\"");
    }
    for (double e : epsilons) {
        if (!(e >= 0.0) || !std::isfinite(e)) throw GuardError("robustness: epsilons must be finite and >= 0");
    }
    const auto t0 = Clock::now();
    ExperimentReport rep("robustness_experiment");
    setup.describe(rep);
    rep.param("perturbation", perturbation);
    std::string eps_text;
    for (double e : epsilons) eps_text += (eps_text.empty() ? "" : ";") + format_double(e);
    rep.param("epsilons", eps_text);

    const SetupInstance in = instantiate(setup);
    require_margins(*in.coeffs, in.grid, *in.tree, "base");
    BackwardProblem bp;
    bp.xi = sample_field(in.tree, in.grid, Layout::Interval, data_xi);
    bp.Psi = sample_slice(in.tree, in.grid, setup.M, data_Psi);
    const AdaptedField xi_pert = sample_field(in.tree, in.grid, Layout::Interval, data_xi_perturbation);
    const Slice Psi_pert = sample_slice(in.tree, in.grid, setup.M, data_Psi_perturbation);
    const BackwardSolution base = solve_backward_adjoint(*in.ops, bp);
    const std::string prov = "solve_backward_adjoint pairs, perturbation=" + perturbation;

    std::vector<double> d(epsilons.size(), 0.0);
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        const double eps = epsilons[e];
        BackwardProblem pp = bp;
        pp.xi.axpy(eps, xi_pert);
        std::unique_ptr<OperatorStack> own;
        const OperatorStack* ops = in.ops.get();
        if (perturbation == "full") {
            for (std::size_t j = 0; j < pp.Psi.values().size(); ++j) pp.Psi.values()[j] += eps * Psi_pert.values()[j];
            auto pm = std::make_shared<const ModelCoefficients>(
                perturbed_model(*in.coeffs, eps, setup.x_lo, setup.x_hi));
            require_margins(*pm, in.grid, *in.tree, "perturbed (eps = " + format_double(eps) + ")");
            own = std::make_unique<OperatorStack>(pm, in.grid, in.tree);
            ops = own.get();
        }
        d[e] = solution_diff_y2(solve_backward_adjoint(*ops, pp), base);
        rep.monitor("distance_eps=" + format_double(eps), d[e], prov);
    }

    std::vector<std::size_t> order(epsilons.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return epsilons[a] < epsilons[b]; });
    int asserted = 0;
    for (std::size_t oi : order) {
        const double eps = epsilons[oi];
        if (eps == 0.0) {
            rep.at_most("distance_at_zero_eps", d[oi], 0.0, prov);
            continue;
        }
        const auto twice = std::find(epsilons.begin(), epsilons.end(), 2.0 * eps);
        if (twice == epsilons.end()) continue;
        const double ratio = d[static_cast<std::size_t>(twice - epsilons.begin())] / d[oi];
        const std::string name = "ratio_d2eps_over_deps_eps=" + format_double(eps);
        if (perturbation == "xi") {
            rep.within(name, ratio, 2.0 - 1e-10, 2.0 + 1e-10, prov);
        } else if (asserted < 2) {
            rep.within(name, ratio, 1.5, 2.5, prov);
            ++asserted;
        } else {
            rep.monitor(name, ratio, prov);
        }
    }
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport gradient_estimate_experiment(const GradientSettings& settings) {
    if (settings.K_list.empty() || settings.M_weights.empty()) {
        throw GuardError("gradient estimate: K_list and M_weights must be non-empty");
    }
    const auto t0 = Clock::now();
    ExperimentReport rep("gradient_estimate_experiment");
    rep.param("b_preset", "heat");
    rep.param("n_x", static_cast<long long>(settings.n_x));
    rep.param("M", static_cast<long long>(settings.M));
    rep.param("T", settings.T);
    rep.param("eps", settings.eps);
    rep.param("seed", static_cast<long long>(settings.seed));
    std::string ks, ms;
    for (double K : settings.K_list) ks += (ks.empty() ? "" : ";") + format_double(K);
    for (double m : settings.M_weights) ms += (ms.empty() ? "" : ";") + format_double(m);
    rep.param("K_list", ks);
    rep.param("M_weights", ms);
    rep.param("lhs", "sup_k |u_k|^2_WH1 + M_w sup_k |u_k|^2_H0");
    rep.param("rhs", "(1 + eps)/2 sum_k dt |h_k|^2_H0");

    const Grid grid = Grid::build(0.0, 1.0, settings.n_x);
    const TreePtr tree = NoiseTree::single_path(settings.M, settings.T);
    Rng rng(settings.seed);
    const AdaptedField h = random_field(tree, grid, Layout::Interval, rng);
    const double hx = spacetime_norm(h, SpaceTimeKind::X, 0);
    const double rhs = 0.5 * (1.0 + settings.eps) * hx * hx;
    const ModelCoefficients heat = make_preset(PresetSpec{}, 0, 0.0, 1.0);
    std::vector<double> edge_b(static_cast<std::size_t>(grid.n_x() + 1));
    const NodeContext ctx0{};
    for (int e = 0; e <= grid.n_x(); ++e) edge_b[static_cast<std::size_t>(e)] = heat.b(grid.edge_midpoint(e), ctx0);

    std::vector<std::vector<double>> ratios(settings.M_weights.size());
    for (double K : settings.K_list) {
        auto coeffs = std::make_shared<const ModelCoefficients>(heat.with_lambda_offset(-K));
        const OperatorStack ops(coeffs, grid, tree);
        BackwardProblem bp;
        bp.xi = h;
        bp.Psi = zero_slice(ops, settings.M);
        const BackwardSolution sol = solve_backward_dp(ops, bp);
        double grad2 = 0.0, l2 = 0.0;
        for (int k = 0; k <= settings.M; ++k) {
            auto u = sol.p.at(k, 0);
            const double g = weighted_h1_norm(grid, u, edge_b);
            const double z = discrete_norm(grid, u, NormKind::H0);
            grad2 = std::max(grad2, g * g);
            l2 = std::max(l2, z * z);
        }
        for (std::size_t m = 0; m < settings.M_weights.size(); ++m) {
            const double r = rhs == 0.0 ? 0.0 : (grad2 + settings.M_weights[m] * l2) / rhs;
            ratios[m].push_back(r);
            rep.monitor("ratio_" + k_label(K) + "_Mw=" + format_double(settings.M_weights[m]), r,
                        "solve_backward_dp single path, lambda - K");
        }
    }
    for (std::size_t m = 0; m < settings.M_weights.size(); ++m) {
        const std::string tag = "_Mw=" + format_double(settings.M_weights[m]);
        bool monotone = true;
        for (std::size_t j = 1; j < ratios[m].size(); ++j) monotone = monotone && ratios[m][j] <= ratios[m][j - 1];
        rep.holds("monotone_in_K" + tag, monotone, "K sweep in list order");
        rep.at_most("ratio_at_last_K" + tag, ratios[m].back(), 1.05, "largest swept K");
    }
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport contraction_report(const ExperimentSetup& setup, const std::vector<double>& K_list) {
    if (K_list.empty()) throw GuardError("contraction_report: K_list must be non-empty");
    const auto t0 = Clock::now();
    ExperimentReport rep("contraction_report");
    setup.describe(rep);
    const SetupInstance in = instantiate(setup);
    const ConditionReport cr = sampled_margins(*in.coeffs, in.grid, *in.tree);
    rep.monitor("margin_strengthened", cr.margin_strengthened, "sample_coefficients");
    const std::string prov = "estimate_P_star_norm iterations=" + std::to_string(kPowerIterations) +
                             " seed=" + std::to_string(kPowerSeed);
    std::vector<double> est;
    for (double K : K_list) {
        const PStarEstimate e = estimate_P_star_norm(*in.ops, K);
        est.push_back(e.norm);
        rep.monitor("P_star_estimate_" + k_label(K), e.norm, prov);
        rep.monitor("residual_gap_" + k_label(K), e.residual_gap, prov);
    }
    bool contracts = false, monotone = true;
    for (std::size_t j = 0; j < est.size(); ++j) {
        contracts = contracts || est[j] < 1.0;
        if (j > 0) monotone = monotone && est[j] <= est[j - 1] * (1.0 + 1e-12);
    }
    if (cr.margin_strengthened > 0.0) {
        rep.holds("some_K_contracts", contracts, prov);
        rep.holds("monotone_in_K", monotone, prov);
    } else {
        rep.monitor("some_K_contracts", contracts ? 1.0 : 0.0, prov + "; margin not positive, not asserted");
        rep.monitor("monotone_in_K", monotone ? 1.0 : 0.0, prov + "; margin not positive, not asserted");
    }
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

namespace {

struct HeatErrors {
    double forward = 0.0;
    double backward = 0.0;
};

HeatErrors heat_errors(int n_x, int M, double T) {
    const Grid grid = Grid::build(0.0, 1.0, n_x);
    const TreePtr tree = NoiseTree::single_path(M, T);
    const OperatorStack ops(std::make_shared<const ModelCoefficients>(make_preset(PresetSpec{}, 0, 0.0, 1.0)), grid,
                            tree);
    std::vector<double> mode(static_cast<std::size_t>(n_x));
    for (int j = 1; j <= n_x; ++j) mode[static_cast<std::size_t>(j - 1)] = std::sin(kPi * grid.node(j));
    const double pi2 = kPi * kPi;
    HeatErrors e;

    ForwardProblem fp;
    fp.Phi = Slice::broadcast(tree, grid, 0, mode);
    const ForwardSolution fs = solve_forward(ops, fp);
    for (int k = 1; k <= M; ++k) {
        const double decay = std::exp(-pi2 * tree->time(k));
        auto u = fs.u.at(k, 0);
        for (std::size_t j = 0; j < mode.size(); ++j) e.forward = std::max(e.forward, std::abs(u[j] - mode[j] * decay));
    }

    BackwardProblem bp;
    bp.Psi = Slice::broadcast(tree, grid, M, mode);
    const BackwardSolution bs = solve_backward_dp(ops, bp);
    for (int k = 0; k < M; ++k) {
        const double decay = std::exp(-pi2 * (T - tree->time(k)));
        auto p = bs.p.at(k, 0);
        for (std::size_t j = 0; j < mode.size(); ++j) e.backward = std::max(e.backward, std::abs(p[j] - mode[j] * decay));
    }
    return e;
}

}  // namespace

ExperimentReport heat_convergence(const HeatSettings& settings) {
    if (settings.dt_levels.size() < 2 || settings.h_levels.size() < 2) {
        throw GuardError("heat_convergence: need at least two refinement levels per study");
    }
    const auto t0 = Clock::now();
    ExperimentReport rep("heat_convergence");
    rep.param("T", settings.T);
    rep.param("fine_n_x", static_cast<long long>(settings.fine_n_x));
    rep.param("fine_M", static_cast<long long>(settings.fine_M));
    rep.param("exact", "sin(pi x) exp(-pi^2 t)");
    rep.param("error", "max over time levels and nodes");

    auto study = [&](const std::string& name, const std::vector<int>& levels, bool time_study, double factor) {
        std::vector<HeatErrors> errs;
        for (int L : levels) {
            errs.push_back(time_study ? heat_errors(settings.fine_n_x, L, settings.T)
                                      : heat_errors(L, settings.fine_M, settings.T));
            const std::string tag = (time_study ? "_M=" : "_n_x=") + std::to_string(L);
            rep.monitor(name + "_forward_error" + tag, errs.back().forward, "solve_forward single path");
            rep.monitor(name + "_backward_error" + tag, errs.back().backward, "solve_backward_dp single path");
        }
        for (std::size_t j = 1; j < errs.size(); ++j) {
            const std::string tag = "_" + std::to_string(levels[j - 1]) + "_to_" + std::to_string(levels[j]);
            rep.within(name + "_forward_ratio" + tag, errs[j - 1].forward / errs[j].forward, 0.7 * factor,
                       1.3 * factor, "solve_forward single path");
            rep.within(name + "_backward_ratio" + tag, errs[j - 1].backward / errs[j].backward, 0.7 * factor,
                       1.3 * factor, "solve_backward_dp single path");
        }
    };
    study("dt", settings.dt_levels, true, 2.0);
    study("h", settings.h_levels, false, 4.0);
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

ExperimentReport k_shift_experiment(const ExperimentSetup& setup, double K, const std::vector<int>& M_levels) {
    if (M_levels.empty()) throw GuardError("k_shift: M_levels must be non-empty");
    if (!(K >= 0.0)) throw GuardError("k_shift: K must be >= 0");
    const auto t0 = Clock::now();
    ExperimentReport rep("k_shift_roundtrip");
    setup.describe(rep);
    rep.param("K", K);
    std::string ms;
    for (int m : M_levels) ms += (ms.empty() ? "" : ";") + std::to_string(m);
    rep.param("M_levels", ms);
    rep.param("compounding", "(1 + dt K)^(M - k)");
    std::vector<KShiftDeviation> devs;
    for (int M : M_levels) {
        ExperimentSetup s = setup;
        s.M = M;
        const SetupInstance in = instantiate(s);
        BackwardProblem bp;
        bp.xi = sample_field(in.tree, in.grid, Layout::Interval, data_xi);
        bp.Psi = sample_slice(in.tree, in.grid, M, data_Psi);
        devs.push_back(k_shift_roundtrip(in.coeffs, in.grid, in.tree, bp, K));
        rep.monitor("p_deviation_M=" + std::to_string(M), devs.back().p, "solve_backward_dp, lambda and lambda - K");
        rep.monitor("chi_deviation_M=" + std::to_string(M), devs.back().chi, "solve_backward_dp, lambda and lambda - K");
    }
    if (K == 0.0) {
        double worst = 0.0;
        for (const auto& d : devs) worst = std::max({worst, d.p, d.chi});
        rep.at_most("deviation_at_zero_K", worst, 0.0, "identical solves");
    } else {
        for (std::size_t j = 1; j < devs.size(); ++j) {
            if (M_levels[j] != 2 * M_levels[j - 1]) continue;
            const std::string tag = "_M=" + std::to_string(M_levels[j - 1]) + "_to_" + std::to_string(M_levels[j]);
            rep.within("p_deviation_ratio" + tag, devs[j - 1].p / devs[j].p, 1.4, 2.6, "first order in dt");
            if (devs[j].chi > 0.0) {
                rep.within("chi_deviation_ratio" + tag, devs[j - 1].chi / devs[j].chi, 1.4, 2.6, "first order in dt");
            }
        }
    }
    rep.runtime_seconds = seconds_since(t0);
    return rep;
}

}  // namespace bspde
