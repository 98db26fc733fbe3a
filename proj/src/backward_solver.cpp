#include "bspde/backward_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bspde/coefficients.hpp"
#include "bspde/error.hpp"
#include "bspde/spacetime_norm.hpp"

namespace bspde {

namespace {

int check_problem(const OperatorStack& ops, const BackwardProblem& problem) {
    const NoiseTree& tree = ops.tree();
    if (!problem.Psi.tree() || !problem.Psi.tree()->same_shape(tree) || !(problem.Psi.grid() == ops.grid())) {
        throw ShapeError("backward problem: Psi does not match the grid/tree");
    }
    const int end = problem.Psi.level();
    if (problem.begin < 0 || problem.begin >= end) {
        throw ShapeError("backward problem: need 0 <= begin < end, got begin = " + std::to_string(problem.begin) +
                         ", end = " + std::to_string(end));
    }
    if (!problem.xi.empty()) {
        if (!problem.xi.tree()->same_shape(tree) || !(problem.xi.grid() == ops.grid()) ||
            problem.xi.layout() != Layout::Interval) {
            throw ShapeError("backward problem: xi does not match the grid/tree");
        }
    }
    if (!(problem.K_shift >= 0.0)) throw GuardError("backward problem: K_shift must be >= 0");
    return end;
}

double damping_of(const OperatorStack& ops, const BackwardProblem& problem, const SchemeOptions& options) {
    return options.damping / (1.0 + ops.tree().dt() * problem.K_shift);
}

BackwardSolution empty_solution(const OperatorStack& ops, const char* route) {
    BackwardSolution sol;
    sol.p = AdaptedField(ops.tree_ptr(), ops.grid(), Layout::Nodal);
    sol.chi.reserve(static_cast<std::size_t>(ops.tree().N()));
    for (int i = 0; i < ops.tree().N(); ++i) sol.chi.emplace_back(ops.tree_ptr(), ops.grid(), Layout::Interval);
    sol.martingale_residual = AdaptedField(ops.tree_ptr(), ops.grid(), Layout::Nodal);
    sol.diagnostics.route = route;
    return sol;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

void fill_martingale_residual(const OperatorStack& ops, BackwardSolution& sol, int begin, int end) {
    const NoiseTree& tree = ops.tree();
    const auto nx = static_cast<std::size_t>(ops.grid().n_x());
    const double inv_nb = 1.0 / static_cast<double>(tree.branching());
    std::vector<double> mean(nx);
    for (int k = begin; k < end; ++k) {
        for (std::size_t nu = 0; nu < tree.level_size(k); ++nu) {
            std::fill(mean.begin(), mean.end(), 0.0);
            for (std::size_t c = 0; c < tree.branching(); ++c) {
                auto v = sol.p.at(k + 1, tree.child(nu, c));
                for (std::size_t j = 0; j < nx; ++j) mean[j] += v[j];
            }
            for (double& v : mean) v *= inv_nb;
            for (std::size_t c = 0; c < tree.branching(); ++c) {
                const std::size_t ch = tree.child(nu, c);
                auto v = sol.p.at(k + 1, ch);
                auto r = sol.martingale_residual.at(k + 1, ch);
                for (std::size_t j = 0; j < nx; ++j) {
                    double d = v[j] - mean[j];
                    for (int i = 0; i < tree.N(); ++i) {
                        d -= sol.chi[static_cast<std::size_t>(i)].at(k, nu)[j] * tree.increment(c, i);
                    }
                    r[j] = d;
                }
            }
        }
    }
}

BackwardSolution solve_backward_adjoint(const OperatorStack& ops, const BackwardProblem& problem,
                                        const SchemeOptions& options) {
    const int end = check_problem(ops, problem);
    const NoiseTree& tree = ops.tree();
    const int N = tree.N();
    const double dt = tree.dt();
    const double h = ops.grid().h();
    const double theta = damping_of(ops, problem, options);
    const auto nx = static_cast<std::size_t>(ops.grid().n_x());

    BackwardSolution sol = empty_solution(ops, "adjoint");
    sol.p.set_slice(problem.Psi);

    // Raw adjoints of the forward edge operations for the functional
    // J = sum_k dt pi_k h <y_k, xi_k> + pi_end h <u_end, Psi>.
    Slice wbar_next = problem.Psi;
    {
        const double scale = tree.probability(end) * h;
        for (double& v : wbar_next.values()) v *= scale;
    }
    std::vector<double> scratch;
    std::vector<double> nbar(nx * static_cast<std::size_t>(N));
    for (int k = end - 1; k >= problem.begin; --k) {
        Slice wbar(ops.tree_ptr(), ops.grid(), k);
        const double pi = tree.probability(k);
        for (std::size_t nu = 0; nu < tree.level_size(k); ++nu) {
            const OperatorSlot& slot = ops.at(k, nu);
            auto ybar = wbar.at(nu);
            if (!problem.xi.empty()) {
                auto xi = problem.xi.at(k, nu);
                for (std::size_t j = 0; j < nx; ++j) ybar[j] = dt * pi * h * xi[j];
            }
            std::fill(nbar.begin(), nbar.end(), 0.0);
            for (std::size_t c = 0; c < tree.branching(); ++c) {
                auto wc = wbar_next.at(tree.child(nu, c));
                for (std::size_t j = 0; j < nx; ++j) ybar[j] += wc[j];
                for (int i = 0; i < N; ++i) {
                    const double dw = tree.increment(c, i);
                    double* ni = nbar.data() + static_cast<std::size_t>(i) * nx;
                    for (std::size_t j = 0; j < nx; ++j) ni[j] += dw * wc[j];
                }
            }
            for (int i = 0; i < N; ++i) {
                std::span<const double> ni(nbar.data() + static_cast<std::size_t>(i) * nx, nx);
                if (!options.drop_noise_operators) {
                    slot.B[static_cast<std::size_t>(i)].apply_transpose_add(1.0, ni, ybar);
                }
                auto chi = sol.chi[static_cast<std::size_t>(i)].at(k, nu);
                const double s = 1.0 / (dt * pi * h);
                for (std::size_t j = 0; j < nx; ++j) chi[j] = ni[j] * s;
            }
            if (!thomas_solve_transposed(slot.step, ybar, scratch)) {
                throw SolverError("adjoint: singular transposed step", k, nu);
            }
            for (double& v : ybar) v *= theta;
            auto p = sol.p.at(k, nu);
            const double s = 1.0 / (pi * h);
            for (std::size_t j = 0; j < nx; ++j) p[j] = ybar[j] * s;
        }
        wbar_next = std::move(wbar);
    }
    fill_martingale_residual(ops, sol, problem.begin, end);
    return sol;
}

BackwardSolution solve_backward_dp(const OperatorStack& ops, const BackwardProblem& problem,
                                   const SchemeOptions& options) {
    const int end = check_problem(ops, problem);
    const NoiseTree& tree = ops.tree();
    const int N = tree.N();
    const double dt = tree.dt();
    const double theta = damping_of(ops, problem, options);
    const auto nx = static_cast<std::size_t>(ops.grid().n_x());
    const double inv_nb = 1.0 / static_cast<double>(tree.branching());

    BackwardSolution sol = empty_solution(ops, "dp");
    sol.p.set_slice(problem.Psi);
    std::vector<double> scratch;
    std::vector<double> forcing(nx);
    for (int k = end - 1; k >= problem.begin; --k) {
        for (std::size_t nu = 0; nu < tree.level_size(k); ++nu) {
            const OperatorSlot& slot = ops.at(k, nu);
            auto pk = sol.p.at(k, nu);
            std::fill(pk.begin(), pk.end(), 0.0);
            for (std::size_t c = 0; c < tree.branching(); ++c) {
                auto v = sol.p.at(k + 1, tree.child(nu, c));
                for (std::size_t j = 0; j < nx; ++j) pk[j] += v[j];
            }
            for (double& v : pk) v *= inv_nb;
            if (!problem.xi.empty()) {
                auto xi = problem.xi.at(k, nu);
                std::copy(xi.begin(), xi.end(), forcing.begin());
            } else {
                std::fill(forcing.begin(), forcing.end(), 0.0);
            }
            for (int i = 0; i < N; ++i) {
                auto chi = sol.chi[static_cast<std::size_t>(i)].at(k, nu);
                for (std::size_t c = 0; c < tree.branching(); ++c) {
                    const double dw = tree.increment(c, i);
                    auto v = sol.p.at(k + 1, tree.child(nu, c));
                    for (std::size_t j = 0; j < nx; ++j) chi[j] += v[j] * dw;
                }
                for (double& v : chi) v *= inv_nb / dt;
                if (!options.drop_noise_operators) {
                    slot.B[static_cast<std::size_t>(i)].apply_transpose_add(1.0, chi, forcing);
                }
            }
            for (std::size_t j = 0; j < nx; ++j) pk[j] += dt * forcing[j];
            if (!thomas_solve(slot.step_star, pk, scratch)) {
                throw SolverError("dp: singular (I - dt A*_h)", k, nu);
            }
            for (double& v : pk) v *= theta;
        }
    }
    fill_martingale_residual(ops, sol, problem.begin, end);
    return sol;
}

AdaptedField apply_P_star(const OperatorStack& ops, const AdaptedField& g, const SchemeOptions& options) {
    BackwardProblem bp;
    bp.xi = g;
    bp.Psi = zero_slice(ops, ops.tree().M());
    SchemeOptions q = options;
    q.drop_noise_operators = true;
    const BackwardSolution s = solve_backward_adjoint(ops, bp, q);
    AdaptedField out(ops.tree_ptr(), ops.grid(), Layout::Interval);
    const NoiseTree& tree = ops.tree();
    for (int k = 0; k < tree.M(); ++k) {
        for (std::size_t nu = 0; nu < tree.level_size(k); ++nu) {
            const OperatorSlot& slot = ops.at(k, nu);
            for (int i = 0; i < tree.N(); ++i) {
                slot.B[static_cast<std::size_t>(i)].apply_transpose_add(
                    1.0, s.chi[static_cast<std::size_t>(i)].at(k, nu), out.at(k, nu));
            }
        }
    }
    return out;
}

BackwardSolution solve_backward_neumann(const OperatorStack& ops, const BackwardProblem& problem,
                                        const NeumannOptions& options) {
    const int end = check_problem(ops, problem);
    if (!(options.tol > 0.0)) throw GuardError("neumann: tol must be > 0");
    if (!(options.K >= 0.0)) throw GuardError("neumann: K must be >= 0");
    const NoiseTree& tree = ops.tree();
    const int N = tree.N();
    const double dt = tree.dt();
    const double growth = 1.0 + dt * options.K;
    auto c_of = [&](int k) { return std::pow(growth, end - k); };

    // B = 0 sweeps carry the problem's own damping times 1/(1 + dt K).
    SchemeOptions q0;
    q0.drop_noise_operators = true;
    q0.damping = 1.0 / growth;

    AdaptedField xi_shifted(ops.tree_ptr(), ops.grid(), Layout::Interval);
    if (!problem.xi.empty()) {
        for (int k = problem.begin; k < end; ++k) {
            auto src = problem.xi.level(k);
            auto dst = xi_shifted.level(k);
            const double s = 1.0 / c_of(k + 1);
            for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] * s;
        }
    }

    auto G = [&](const AdaptedField& g) {
        BackwardProblem bp{g, problem.Psi, problem.K_shift, problem.begin};
        const BackwardSolution s = solve_backward_adjoint(ops, bp, q0);
        AdaptedField out = xi_shifted;
        for (int k = problem.begin; k < end; ++k) {
            for (std::size_t nu = 0; nu < tree.level_size(k); ++nu) {
                const OperatorSlot& slot = ops.at(k, nu);
                for (int i = 0; i < N; ++i) {
                    slot.B[static_cast<std::size_t>(i)].apply_transpose_add(
                        1.0, s.chi[static_cast<std::size_t>(i)].at(k, nu), out.at(k, nu));
                }
            }
        }
        return out;
    };

    BackwardDiagnostics diag;
    diag.route = "neumann";
    AdaptedField g = G(AdaptedField(ops.tree_ptr(), ops.grid(), Layout::Interval));
    bool converged = false;
    for (int m = 0; m < options.max_iter; ++m) {
        AdaptedField next = G(g);
        AdaptedField diff = next;
        diff.axpy(-1.0, g);
        const double r = std::sqrt(inner_x0(diff, diff));
        diag.residual_history.push_back(r);
        diag.iterations = m + 1;
        g = std::move(next);
        if (r < options.tol) {
            converged = true;
            break;
        }
    }
    diag.final_residual = diag.residual_history.empty() ? 0.0 : diag.residual_history.back();
    if (!converged) {
        const auto& hst = diag.residual_history;
        double rate = std::numeric_limits<double>::quiet_NaN();
        if (hst.size() >= 2 && hst[hst.size() - 2] > 0.0) rate = hst.back() / hst[hst.size() - 2];
        throw ConvergenceError("neumann: no convergence within " + std::to_string(options.max_iter) +
                                   " iterations (last residual " + std::to_string(diag.final_residual) +
                                   ", observed contraction " + std::to_string(rate) + ")",
                               rate);
    }

    BackwardProblem bp{g, problem.Psi, problem.K_shift, problem.begin};
    BackwardSolution sol = solve_backward_adjoint(ops, bp, q0);
    for (int k = problem.begin; k < end; ++k) {
        const double ck = c_of(k);
        for (double& v : sol.p.level(k)) v *= ck;
        const double ck1 = c_of(k + 1);
        for (auto& chi : sol.chi) {
            for (double& v : chi.level(k)) v *= ck1;
        }
    }
    fill_martingale_residual(ops, sol, problem.begin, end);
    sol.diagnostics = diag;
    return sol;
}

PStarEstimate estimate_P_star_norm(const OperatorStack& ops, double K, int iterations, std::uint64_t seed) {
    const NoiseTree& tree = ops.tree();
    SchemeOptions opts;
    opts.damping = 1.0 / (1.0 + tree.dt() * K);
    PStarEstimate est;
    if (tree.N() == 0) return est;

    AdaptedField v(ops.tree_ptr(), ops.grid(), Layout::Interval);
    Rng rng(seed);
    for (double& x : v.data()) x = rng.uniform(-1.0, 1.0);
    auto x0_norm = [](const AdaptedField& f) { return std::sqrt(inner_x0(f, f)); };
    v.scale(1.0 / x0_norm(v));
    for (int it = 0; it < iterations; ++it) {
        const AdaptedField a = apply_P_star(ops, v, opts);
        const double sigma = x0_norm(a);
        est.norm = sigma;
        est.iterations = it + 1;
        if (sigma == 0.0) {
            est.residual_gap = 0.0;
            return est;
        }
        AdaptedField b = apply_P(ops, a, opts).drift;
        AdaptedField gap = b;
        gap.axpy(-sigma * sigma, v);
        est.residual_gap = x0_norm(gap) / (sigma * sigma);
        const double nb = x0_norm(b);
        if (nb == 0.0) return est;
        b.scale(1.0 / nb);
        v = std::move(b);
    }
    return est;
}

KChoice choose_K(const OperatorStack& ops, const std::vector<double>& candidates, double target) {
    KChoice choice;
    for (double K : candidates) {
        const double e = estimate_P_star_norm(ops, K).norm;
        choice.sweep.emplace_back(K, e);
        if (!choice.satisfied && e <= target) {
            choice.K = K;
            choice.estimate = e;
            choice.satisfied = true;
            break;
        }
    }
    if (!choice.satisfied && !choice.sweep.empty()) {
        choice.K = choice.sweep.back().first;
        choice.estimate = choice.sweep.back().second;
    }
    return choice;
}

KShiftDeviation k_shift_roundtrip(const std::shared_ptr<const ModelCoefficients>& coeffs, const Grid& grid,
                                  const TreePtr& tree, const BackwardProblem& problem, double K) {
    const OperatorStack base(coeffs, grid, tree);
    const OperatorStack shifted(std::make_shared<const ModelCoefficients>(coeffs->with_lambda_offset(-K)), grid,
                                tree);
    const int end = problem.Psi.level();
    const double growth = 1.0 + tree->dt() * K;
    BackwardProblem shifted_problem = problem;
    if (!problem.xi.empty()) {
        for (int k = problem.begin; k < end; ++k) {
            const double s = 1.0 / std::pow(growth, end - k - 1);
            for (double& v : shifted_problem.xi.level(k)) v *= s;
        }
    }
    const BackwardSolution a = solve_backward_dp(base, problem);
    const BackwardSolution b = solve_backward_dp(shifted, shifted_problem);
    KShiftDeviation dev;
    for (int k = problem.begin; k <= end; ++k) {
        const double s = std::pow(growth, end - k);
        auto pa = a.p.level(k);
        auto pb = b.p.level(k);
        for (std::size_t j = 0; j < pa.size(); ++j) dev.p = std::max(dev.p, std::abs(pb[j] * s - pa[j]));
        if (k < end) {
            const double s1 = std::pow(growth, end - k - 1);
            for (std::size_t i = 0; i < a.chi.size(); ++i) {
                auto ca = a.chi[i].level(k);
                auto cb = b.chi[i].level(k);
                for (std::size_t j = 0; j < ca.size(); ++j) dev.chi = std::max(dev.chi, std::abs(cb[j] * s1 - ca[j]));
            }
        }
    }
    return dev;
}

EquationResidual equation_residual(const OperatorStack& ops, const BackwardProblem& problem,
                                   const BackwardSolution& sol, const SchemeOptions& options) {
    const int end = check_problem(ops, problem);
    const NoiseTree& tree = ops.tree();
    const double dt = tree.dt();
    const double theta = damping_of(ops, problem, options);
    const auto nx = static_cast<std::size_t>(ops.grid().n_x());
    const double inv_nb = 1.0 / static_cast<double>(tree.branching());
    EquationResidual res;
    std::vector<double> rhs(nx), lhs(nx), chi(nx);
    for (int k = problem.begin; k < end; ++k) {
        for (std::size_t nu = 0; nu < tree.level_size(k); ++nu) {
            const OperatorSlot& slot = ops.at(k, nu);
            std::fill(rhs.begin(), rhs.end(), 0.0);
            for (std::size_t c = 0; c < tree.branching(); ++c) {
                auto v = sol.p.at(k + 1, tree.child(nu, c));
                for (std::size_t j = 0; j < nx; ++j) rhs[j] += inv_nb * v[j];
            }
            std::vector<double> forcing(nx, 0.0);
            if (!problem.xi.empty()) {
                auto xi = problem.xi.at(k, nu);
                std::copy(xi.begin(), xi.end(), forcing.begin());
            }
            for (int i = 0; i < tree.N(); ++i) {
                std::fill(chi.begin(), chi.end(), 0.0);
                for (std::size_t c = 0; c < tree.branching(); ++c) {
                    auto v = sol.p.at(k + 1, tree.child(nu, c));
                    const double dw = tree.increment(c, i);
                    for (std::size_t j = 0; j < nx; ++j) chi[j] += v[j] * dw * inv_nb / dt;
                }
                auto stored = sol.chi[static_cast<std::size_t>(i)].at(k, nu);
                for (std::size_t j = 0; j < nx; ++j) {
                    res.chi = std::max(res.chi, std::abs(stored[j] - chi[j]) / std::max(1.0, std::abs(chi[j])));
                }
                if (!options.drop_noise_operators) {
                    slot.B[static_cast<std::size_t>(i)].apply_transpose_add(1.0, stored, forcing);
                }
            }
            for (std::size_t j = 0; j < nx; ++j) rhs[j] += dt * forcing[j];
            slot.step_star.apply(sol.p.at(k, nu), lhs);
            double diff = 0.0;
            for (std::size_t j = 0; j < nx; ++j) diff = std::max(diff, std::abs(lhs[j] / theta - rhs[j]));
            res.step = std::max(res.step, diff / std::max(1.0, max_abs(rhs)));
        }
    }
    return res;
}

double DualityPairing::relative_error() const {
    const double scale = std::max(std::abs(forward_side), std::abs(backward_side));
    if (scale == 0.0) return 0.0;
    return std::abs(forward_side - backward_side) / scale;
}

DualityPairing duality_pairing(const ForwardProblem& fp, const ForwardSolution& fs, const BackwardProblem& bp,
                               const BackwardSolution& bs) {
    DualityPairing d;
    const int M = fs.u.tree()->M();
    if (!bp.xi.empty()) d.forward_side += inner_x0(fs.drift, bp.xi);
    d.forward_side += inner_z0(fs.u.slice(M), bp.Psi);
    if (!fp.phi.empty()) d.backward_side += inner_x0(fp.phi, bs.p);
    for (std::size_t i = 0; i < fp.h.size(); ++i) d.backward_side += inner_x0(fp.h[i], bs.chi[i]);
    d.backward_side += inner_z0(fp.Phi, bs.p.slice(fp.Phi.level()));
    return d;
}

}  // namespace bspde
