#include "bspde/forward_solver.hpp"

#include <algorithm>
#include <string>

#include "bspde/error.hpp"

namespace bspde {

namespace {

void check_field(const OperatorStack& ops, const AdaptedField& f, Layout layout, const char* what) {
    if (f.empty()) return;
    if (!f.tree()->same_shape(ops.tree()) || !(f.grid() == ops.grid()) || f.layout() != layout) {
        throw ShapeError(std::string("forward problem: ") + what + " does not match the grid/tree");
    }
}

}  // namespace

Slice zero_slice(const OperatorStack& ops, int level) { return Slice(ops.tree_ptr(), ops.grid(), level); }

ForwardSolution solve_forward(const OperatorStack& ops, const ForwardProblem& problem,
                              const SchemeOptions& options) {
    const NoiseTree& tree = ops.tree();
    const Grid& grid = ops.grid();
    const int N = tree.N();
    const double dt = tree.dt();
    const auto nx = static_cast<std::size_t>(grid.n_x());

    check_field(ops, problem.phi, Layout::Interval, "phi");
    if (!problem.h.empty() && problem.h.size() != static_cast<std::size_t>(N)) {
        throw ShapeError("forward problem: need one h_i per noise component");
    }
    for (const auto& hi : problem.h) check_field(ops, hi, Layout::Interval, "h_i");
    if (!problem.Phi.tree() || !problem.Phi.tree()->same_shape(tree) || !(problem.Phi.grid() == grid)) {
        throw ShapeError("forward problem: Phi does not match the grid/tree");
    }
    const int s = problem.Phi.level();
    if (s >= tree.M()) throw ShapeError("forward problem: start level must be < M");

    ForwardSolution sol{AdaptedField(ops.tree_ptr(), grid, Layout::Nodal),
                        AdaptedField(ops.tree_ptr(), grid, Layout::Interval)};
    sol.u.set_slice(problem.Phi);

    std::vector<double> scratch;
    std::vector<double> noise(nx * static_cast<std::size_t>(N));
    for (int k = s; k < tree.M(); ++k) {
        for (std::size_t nu = 0; nu < tree.level_size(k); ++nu) {
            const OperatorSlot& slot = ops.at(k, nu);
            auto y = sol.drift.at(k, nu);
            auto uk = sol.u.at(k, nu);
            std::copy(uk.begin(), uk.end(), y.begin());
            if (!problem.phi.empty()) {
                auto phi = problem.phi.at(k, nu);
                for (std::size_t j = 0; j < nx; ++j) y[j] += dt * phi[j];
            }
            if (!thomas_solve(slot.step, y, scratch)) {
                throw SolverError("forward: singular (I - dt A_h)", k, nu);
            }
            if (options.damping != 1.0) {
                for (double& v : y) v *= options.damping;
            }
            // noise amplitudes n_i = B_i y + h_i
            std::fill(noise.begin(), noise.end(), 0.0);
            for (int i = 0; i < N; ++i) {
                std::span<double> ni(noise.data() + static_cast<std::size_t>(i) * nx, nx);
                if (!options.drop_noise_operators) slot.B[static_cast<std::size_t>(i)].apply_add(1.0, y, ni);
                if (!problem.h.empty()) {
                    auto hi = problem.h[static_cast<std::size_t>(i)].at(k, nu);
                    for (std::size_t j = 0; j < nx; ++j) ni[j] += hi[j];
                }
            }
            for (std::size_t c = 0; c < tree.branching(); ++c) {
                auto next = sol.u.at(k + 1, tree.child(nu, c));
                std::copy(y.begin(), y.end(), next.begin());
                for (int i = 0; i < N; ++i) {
                    const double dw = tree.increment(c, i);
                    const double* ni = noise.data() + static_cast<std::size_t>(i) * nx;
                    for (std::size_t j = 0; j < nx; ++j) next[j] += ni[j] * dw;
                }
            }
        }
    }
    return sol;
}

ForwardSolution apply_L(const OperatorStack& ops, const AdaptedField& phi, const SchemeOptions& options) {
    ForwardProblem p;
    p.phi = phi;
    p.Phi = zero_slice(ops, 0);
    return solve_forward(ops, p, options);
}

ForwardSolution apply_M(const OperatorStack& ops, int i, const AdaptedField& h_i, const SchemeOptions& options) {
    if (i < 0 || i >= ops.tree().N()) throw ShapeError("apply_M: component out of range");
    ForwardProblem p;
    p.h.reserve(static_cast<std::size_t>(ops.tree().N()));
    for (int m = 0; m < ops.tree().N(); ++m) {
        if (m == i) p.h.push_back(h_i);
        else p.h.emplace_back(ops.tree_ptr(), ops.grid(), Layout::Interval);
    }
    p.Phi = zero_slice(ops, 0);
    return solve_forward(ops, p, options);
}

ForwardSolution apply_Lambda(const OperatorStack& ops, const Slice& Phi, const SchemeOptions& options) {
    ForwardProblem p;
    p.Phi = Phi;
    return solve_forward(ops, p, options);
}

ForwardSolution apply_Q_family(const OperatorStack& ops, const ForwardProblem& problem,
                               const SchemeOptions& options) {
    SchemeOptions q = options;
    q.drop_noise_operators = true;
    return solve_forward(ops, problem, q);
}

AdaptedField apply_B(const OperatorStack& ops, int i, const AdaptedField& v) {
    check_field(ops, v, Layout::Interval, "B argument");
    AdaptedField out(ops.tree_ptr(), ops.grid(), Layout::Interval);
    const NoiseTree& tree = ops.tree();
    for (int k = 0; k < tree.M(); ++k) {
        for (std::size_t nu = 0; nu < tree.level_size(k); ++nu) {
            ops.at(k, nu).B[static_cast<std::size_t>(i)].apply(v.at(k, nu), out.at(k, nu));
        }
    }
    return out;
}

ForwardSolution apply_P(const OperatorStack& ops, const AdaptedField& v, const SchemeOptions& options) {
    ForwardProblem p;
    p.h.reserve(static_cast<std::size_t>(ops.tree().N()));
    for (int i = 0; i < ops.tree().N(); ++i) p.h.push_back(apply_B(ops, i, v));
    p.Phi = zero_slice(ops, 0);
    return apply_Q_family(ops, p, options);
}

TerminalVariable apply_P0(const OperatorStack& ops, const AdaptedField& v, const SchemeOptions& options) {
    return apply_P(ops, v, options).u.slice(ops.tree().M());
}

Slice evaluate_at(const AdaptedField& u, int k) { return u.slice(k); }

}  // namespace bspde
