#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "bspde/verification.hpp"

namespace bspde {

/// Unreadable or malformed configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One experiment run. INI sections:
///   [experiment]   name, seed, n_trials, n_draws, tau_level, s_level, refinement_levels,
///                  perturbation, epsilons, K_list, M_levels, K
///   [grid]         x_lo, x_hi, n_x
///   [tree]         N, M, T
///   [coefficients] preset, amplitude, stochastic
///   [solver]       route, K_policy, K, K_candidates, contraction_target, tol, max_iter
///   [gradient]     K_list, M_weights, eps, n_x, M, T
///   [heat]         T, fine_n_x, dt_levels, fine_M, h_levels
///   [output]       dir
/// Lists are comma separated.
struct RunConfig {
    std::string experiment;
    ExperimentSetup setup;
    int n_trials = 20;
    int n_draws = 200;
    int tau_level = 2;
    int s_level = 5;
    int refinement_levels = 3;
    std::string perturbation = "full";
    std::vector<double> epsilons{1e-3, 2e-3, 4e-3};
    std::vector<double> K_list{0.0, 5.0, 10.0, 20.0};
    std::vector<int> M_levels{8, 16};
    double K = 10.0;
    std::string route = "adjoint";
    NeumannSettings neumann;
    GradientSettings gradient;
    HeatSettings heat;
    std::filesystem::path output_dir = "out";
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Builds the grid, tree and preset of the setup so guard violations surface
/// before dispatch.
void validate_config(const RunConfig& config);

}  // namespace bspde
