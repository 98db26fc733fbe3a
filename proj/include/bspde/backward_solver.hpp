#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "bspde/forward_solver.hpp"
#include "bspde/noise_tree.hpp"
#include "bspde/operators.hpp"

namespace bspde {

/// d p + (A* p + sum_i B_i* chi_i + xi) dt = sum_i chi_i dw_i on [t_begin, t_end],
/// p(t_end) = Psi. The end level is Psi's level.
struct BackwardProblem {
    AdaptedField xi;       ///< Interval layout; empty means zero
    TerminalVariable Psi;  ///< terminal slice
    double K_shift = 0.0;  ///< damping: every step is scaled by 1/(1 + dt K)
    int begin = 0;
};

struct BackwardDiagnostics {
    std::string route;
    int iterations = 0;
    std::vector<double> residual_history;  ///< Neumann: ||g^{m+1} - g^m||_{X^0}
    double final_residual = 0.0;
    double contraction_estimate = std::numeric_limits<double>::quiet_NaN();
};

struct BackwardSolution {
    AdaptedField p;                     ///< Nodal
    std::vector<AdaptedField> chi;      ///< Interval, one per component
    AdaptedField martingale_residual;   ///< Nodal; orthogonal part of p's martingale increments
    BackwardDiagnostics diagnostics;
};

/// Exact transpose of the forward edge factorization, accumulated in reverse
/// level order (reverse-mode adjoint). For every forward input
///   sum dt E<y_k, xi_k> + E<u_M, Psi> = sum dt E<phi_k, p_k> + sum_i sum dt E<h_ik, chi_ik> + E<Phi, p_s>.
BackwardSolution solve_backward_adjoint(const OperatorStack& ops, const BackwardProblem& problem,
                                        const SchemeOptions& options = {});

/// Conditional-expectation recursion from p_end = Psi:
///   chi_{i,k}(nu) = E[p_{k+1} dw_i | nu] / dt
///   p_k(nu) = damping (I - dt (A*)_h(k, nu))^{-1} (E[p_{k+1} | nu] + dt (sum_i B_i* chi_{i,k} + xi_k))
BackwardSolution solve_backward_dp(const OperatorStack& ops, const BackwardProblem& problem,
                                   const SchemeOptions& options = {});

struct NeumannOptions {
    double K = 0.0;
    double tol = 1e-8;
    int max_iter = 200;
};

/// Decomposition route: with c_k = (1 + dt K)^{M-k}, q = p / c_k solves the
/// problem damped by 1/(1 + dt K) with xi'_k = xi_k / c_{k+1}. Iterates
///   g^{m+1} = xi' + P0* Psi + P* g^m,  g^0 = xi' + P0* Psi
/// until ||g^{m+1} - g^m||_{X^0} < tol, then recovers q, chi_q from the B = 0
/// adjoint with data (g, Psi) and undoes the shift: p_k = c_k q_k,
/// chi_k = c_{k+1} chi_{q,k}. Throws ConvergenceError past max_iter.
BackwardSolution solve_backward_neumann(const OperatorStack& ops, const BackwardProblem& problem,
                                        const NeumannOptions& options);

/// P* g = sum_i B_i* Q_i* g with the damping of `options`.
AdaptedField apply_P_star(const OperatorStack& ops, const AdaptedField& g, const SchemeOptions& options = {});

struct PStarEstimate {
    double norm = 0.0;        ///< dominant singular value of P* on X^0
    double residual_gap = 0.0;  ///< ||P P* g - s^2 g|| / s^2 at the last iterate
    int iterations = 0;
};

inline constexpr int kPowerIterations = 30;
inline constexpr std::uint64_t kPowerSeed = 20240601;

/// Power iteration on P P* (X^0 inner product) for the operator damped by
/// 1/(1 + dt K). Fixed iteration count and seed.
PStarEstimate estimate_P_star_norm(const OperatorStack& ops, double K, int iterations = kPowerIterations,
                                   std::uint64_t seed = kPowerSeed);

struct KChoice {
    double K = 0.0;
    double estimate = 0.0;
    bool satisfied = false;
    std::vector<std::pair<double, double>> sweep;  ///< (K, estimate)
};

inline const std::vector<double> kDefaultKCandidates{0.0, 2.0, 5.0, 10.0, 20.0, 50.0};
inline constexpr double kDefaultContractionTarget = 0.8;

/// Smallest candidate K whose estimate is <= target.
KChoice choose_K(const OperatorStack& ops, const std::vector<double>& candidates = kDefaultKCandidates,
                 double target = kDefaultContractionTarget);

struct KShiftDeviation {
    double p = 0.0;    ///< max |p_K(t_k) s_k - p(t_k)|
    double chi = 0.0;  ///< max |chi_K(t_k) s_{k+1} - chi(t_k)|
};

/// Solves with lambda and with lambda - K (additive shift in the operator,
/// free term xi_k / s_{k+1}), compounds p_K by s_k = (1 + dt K)^{M-k} and
/// reports the deviation.
KShiftDeviation k_shift_roundtrip(const std::shared_ptr<const ModelCoefficients>& coeffs, const Grid& grid,
                                  const TreePtr& tree, const BackwardProblem& problem, double K);

struct EquationResidual {
    double step = 0.0;  ///< max over nodes of the scaled one-step residual
    double chi = 0.0;   ///< max |chi - E[p dw]/dt|
};

/// Per-node residual of the discrete backward equation, each node scaled by
/// max(1, |rhs|_inf).
EquationResidual equation_residual(const OperatorStack& ops, const BackwardProblem& problem,
                                   const BackwardSolution& sol, const SchemeOptions& options = {});

/// Fills the orthogonal residual channel from p and chi.
void fill_martingale_residual(const OperatorStack& ops, BackwardSolution& sol, int begin, int end);

/// Pairings of the discrete duality identity for one forward/backward pair.
struct DualityPairing {
    double forward_side = 0.0;   ///< <y, xi>_{X^0} + <u_M, Psi>_{Z^0}
    double backward_side = 0.0;  ///< <phi, p>_{X^0} + sum <h_i, chi_i>_{X^0} + <Phi, p_s>_{Z^0}
    double relative_error() const;
};

DualityPairing duality_pairing(const ForwardProblem& fp, const ForwardSolution& fs, const BackwardProblem& bp,
                               const BackwardSolution& bs);

}  // namespace bspde
