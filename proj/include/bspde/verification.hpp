#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bspde/backward_solver.hpp"
#include "bspde/coefficients.hpp"
#include "bspde/forward_solver.hpp"
#include "bspde/noise_tree.hpp"
#include "bspde/operators.hpp"
#include "bspde/report.hpp"

namespace bspde {

/// Grid, tree, preset and seed of one experiment.
struct ExperimentSetup {
    PresetSpec preset;
    double x_lo = 0.0;
    double x_hi = 1.0;
    int n_x = 32;
    int N = 1;
    int M = 8;
    double T = 1.0;
    std::uint64_t seed = 7;

    std::string label() const;
    void describe(ExperimentReport& report) const;
};

/// Grid, tree and operator stack built from a setup.
struct SetupInstance {
    Grid grid;
    TreePtr tree;
    std::shared_ptr<const ModelCoefficients> coeffs;
    std::unique_ptr<OperatorStack> ops;
};

SetupInstance instantiate(const ExperimentSetup& setup);

/// Entries uniform in [-1, 1].
AdaptedField random_field(const TreePtr& tree, const Grid& grid, Layout layout, Rng& rng);
Slice random_slice(const TreePtr& tree, const Grid& grid, int level, Rng& rng);

/// Smooth data g(x, t_k, w(t_k)) sampled on every node of a field or slice.
using DataFunction = std::function<double(double s, double t, std::span<const double> w)>;
AdaptedField sample_field(const TreePtr& tree, const Grid& grid, Layout layout, const DataFunction& g);
Slice sample_slice(const TreePtr& tree, const Grid& grid, int level, const DataFunction& g);

/// Pairing identity of forward and adjoint solves on random data, plus the
/// operator-wise identities for L, M_i, I_T Lambda, I_T L and the Q-family.
ExperimentReport verify_duality(const ExperimentSetup& setup, int n_trials);

/// Adjoint route against the dynamic-programming route on random data.
ExperimentReport verify_cross_solver(const ExperimentSetup& setup, int n_trials);

struct NeumannSettings {
    std::vector<double> K_candidates = kDefaultKCandidates;
    double target = kDefaultContractionTarget;
    std::optional<double> fixed_K;
    double tol = 1e-8;
    int max_iter = 200;
};

/// Neumann-series route with the K policy: observed residual rate against
/// the P* norm estimate, converged solution against both direct routes.
ExperimentReport neumann_decomposition(const ExperimentSetup& setup, const NeumannSettings& settings);

/// Margins of the constant two-dimensional example and the property suites relating the two coercivity
/// conditions on random coefficient draws (n <= 3, N <= 3).
ExperimentReport certify_coefficients(int n_draws, std::uint64_t seed);

/// Margins of a preset sampled on the setup's grid and tree.
ExperimentReport certify_preset(const ExperimentSetup& setup);

/// Reconstruction of random terminal variables for N = 1 and N = 2, the N = 1
/// residual channel and the w(T)^2 closed form.
ExperimentReport martingale_experiment(int n_trials, std::uint64_t seed, int n_x = 8);

/// Backward solve on a window [tau, s] with p(s) as terminal data against the
/// full solve.
ExperimentReport verify_semigroup(const ExperimentSetup& setup, int tau_level, int s_level);

/// Energy ratios of forward and backward solves over dyadic refinements of
/// (M, n_x + 1) starting from the setup.
ExperimentReport energy_ratio_report(const ExperimentSetup& setup, int refinement_levels);

/// Distance between solutions with perturbed and unperturbed data.
/// perturbation: "full" (coefficients, xi, Psi) or "xi".
ExperimentReport robustness_experiment(const ExperimentSetup& setup, const std::string& perturbation,
                                       const std::vector<double>& epsilons);

struct GradientSettings {
    std::vector<double> K_list{0.0, 5.0, 10.0, 20.0, 50.0};
    std::vector<double> M_weights{0.0, 1.0, 5.0};
    double eps = 0.5;
    int n_x = 63;
    int M = 200;
    double T = 1.0;
    std::uint64_t seed = 7;
};

/// Deterministic backward problem u_t + A_K* u = -h, u(T) = 0, b = 1, with
/// A_K = A - K: LHS = sup ||u||^2_{WH1} + M_w sup ||u||^2_{H0} against
/// RHS = (1 + eps)/2 sum dt ||h||^2_{H0}.
ExperimentReport gradient_estimate_experiment(const GradientSettings& settings);

/// P* norm estimate over K.
ExperimentReport contraction_report(const ExperimentSetup& setup, const std::vector<double>& K_list);

struct HeatSettings {
    double T = 0.1;
    int fine_n_x = 511;
    std::vector<int> dt_levels{20, 40, 80};
    int fine_M = 100000;
    std::vector<int> h_levels{7, 15, 31};
};

/// Deterministic heat equation with sin(pi x) data against the analytic
/// solution, forward and backward, refining dt and h separately.
ExperimentReport heat_convergence(const HeatSettings& settings);

/// Additive lambda - K shift against the compounded unshifted solution for
/// successive M.
ExperimentReport k_shift_experiment(const ExperimentSetup& setup, double K, const std::vector<int>& M_levels);

}  // namespace bspde
