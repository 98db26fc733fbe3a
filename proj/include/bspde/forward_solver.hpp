#pragma once

#include <vector>

#include "bspde/noise_tree.hpp"
#include "bspde/operators.hpp"

namespace bspde {

/// Options shared by forward and backward sweeps.
struct SchemeOptions {
    /// Multiplier applied after every implicit solve; 1/(1 + dt K) realizes a
    /// damping shift by K.
    double damping = 1.0;
    /// Q-family: all B_i set to zero.
    bool drop_noise_operators = false;
};

/// d u = (A u + phi) dt + sum_i (B_i u + h_i) dw_i on [t_s, T], u(t_s) = Phi.
/// Empty phi / h mean zero.
struct ForwardProblem {
    AdaptedField phi;             ///< Interval layout
    std::vector<AdaptedField> h;  ///< Interval layout, one per component
    Slice Phi;                    ///< initial condition; its level is the start level s
};

/// Per tree edge (level k node nu, child c):
///   y_k(nu)       = damping (I - dt A_h(k, nu))^{-1} (u_k(nu) + dt phi_k(nu))
///   u_{k+1}(nu c) = y_k(nu) + sum_i (B_i(k, nu) y_k(nu) + h_{i,k}(nu)) dw_i^c
/// `drift` holds y (the F_{t_k}-measurable representative on [t_k, t_{k+1}));
/// `u` the nodal values. Levels before s stay zero.
struct ForwardSolution {
    AdaptedField u;      ///< Nodal
    AdaptedField drift;  ///< Interval
};

ForwardSolution solve_forward(const OperatorStack& ops, const ForwardProblem& problem,
                              const SchemeOptions& options = {});

/// Solution operators of the forward problem: u = L phi + Lambda Phi + sum_i M_i h_i.
ForwardSolution apply_L(const OperatorStack& ops, const AdaptedField& phi, const SchemeOptions& options = {});
ForwardSolution apply_M(const OperatorStack& ops, int i, const AdaptedField& h_i,
                        const SchemeOptions& options = {});
ForwardSolution apply_Lambda(const OperatorStack& ops, const Slice& Phi, const SchemeOptions& options = {});

/// Same scheme with B_i = 0 (Q_0 = drift map, Q_i = noise maps, initial map).
ForwardSolution apply_Q_family(const OperatorStack& ops, const ForwardProblem& problem,
                               const SchemeOptions& options = {});

/// (B_i v)(k, nu) = B_i(k, nu) v_k(nu) on an interval field.
AdaptedField apply_B(const OperatorStack& ops, int i, const AdaptedField& v);

/// P v = sum_i Q_i(B_i v) for an interval field v.
ForwardSolution apply_P(const OperatorStack& ops, const AdaptedField& v, const SchemeOptions& options = {});
/// P_0 v = I_T P v.
TerminalVariable apply_P0(const OperatorStack& ops, const AdaptedField& v, const SchemeOptions& options = {});

/// I_t u = u(., t_k).
Slice evaluate_at(const AdaptedField& u, int k);

/// Zero-initial-condition slice at level s.
Slice zero_slice(const OperatorStack& ops, int level);

}  // namespace bspde
