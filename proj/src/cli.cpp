#include "bspde/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "bspde/error.hpp"
#include "bspde/spacetime_norm.hpp"

namespace bspde {

namespace {

ExperimentReport backward_solve(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep("backward_solve");
    cfg.setup.describe(rep);
    rep.param("route", cfg.route);
    const SetupInstance in = instantiate(cfg.setup);
    const OperatorStack& ops = *in.ops;
    Rng rng(cfg.setup.seed);
    BackwardProblem bp;
    bp.xi = random_field(in.tree, in.grid, Layout::Interval, rng);
    bp.Psi = random_slice(in.tree, in.grid, cfg.setup.M, rng);

    BackwardSolution sol;
    if (cfg.route == "adjoint") {
        sol = solve_backward_adjoint(ops, bp);
    } else if (cfg.route == "dp") {
        sol = solve_backward_dp(ops, bp);
    } else {
        double K = 0.0;
        if (cfg.neumann.fixed_K) {
            K = *cfg.neumann.fixed_K;
        } else {
            K = choose_K(ops, cfg.neumann.K_candidates, cfg.neumann.target).K;
        }
        rep.param("K", K);
        sol = solve_backward_neumann(ops, bp, NeumannOptions{K, cfg.neumann.tol, cfg.neumann.max_iter});
        rep.monitor("iterations", sol.diagnostics.iterations, "solve_backward_neumann");
        rep.monitor("final_residual", sol.diagnostics.final_residual, "solve_backward_neumann");
    }
    const std::string prov = "solve_backward_" + cfg.route + " seed=" + std::to_string(cfg.setup.seed);
    const EquationResidual r = equation_residual(ops, bp, sol);
    const double tol = cfg.route == "neumann" ? cfg.neumann.tol : 1e-10;
    rep.at_most("equation_residual_step", r.step, tol, prov);
    rep.at_most("equation_residual_chi", r.chi, tol, prov);
    rep.monitor("p_norm_Y2", y_norm(sol.p, 2), prov);
    for (std::size_t i = 0; i < sol.chi.size(); ++i) {
        rep.monitor("chi" + std::to_string(i + 1) + "_norm_X1", spacetime_norm(sol.chi[i], SpaceTimeKind::X, 1), prov);
    }

    std::filesystem::create_directories(cfg.output_dir);
    {
        std::ofstream f(cfg.output_dir / "backward_solve_p.csv", std::ios::binary);
        write_field_csv(f, sol.p);
    }
    for (std::size_t i = 0; i < sol.chi.size(); ++i) {
        std::ofstream f(cfg.output_dir / ("backward_solve_chi" + std::to_string(i + 1) + ".csv"), std::ios::binary);
        write_field_csv(f, sol.chi[i]);
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() {
    static const std::vector<ExperimentInfo> catalog = {
        {"verify_duality", "pairing identity between forward and adjoint solution operators",
         "preset=heat N=1 M=8 n_x=32 n_trials=20 seed=7"},
        {"verify_cross_solver", "adjoint route against dynamic-programming route",
         "preset=heat N=1 M=8 n_x=32 n_trials=20 seed=7"},
        {"neumann_decomposition", "Neumann series with K policy against direct routes",
         "preset=transport N=1 M=8 n_x=32 tol=1e-8 K_candidates=0,2,5,10,20,50 target=0.8"},
        {"certify_coefficients", "coercivity margins of the two-dimensional example and random draws",
         "n_draws=200 seed=7"},
        {"certify_preset", "sampled margins and parameter bounds of a preset", "preset=heat N=1 M=8 n_x=32"},
        {"martingale_representation", "tree martingale representation and reconstruction",
         "n_trials=20 seed=7 N=1,2"},
        {"verify_semigroup", "window re-solve against the full backward solve",
         "preset=heat N=1 M=8 n_x=32 tau_level=2 s_level=5"},
        {"energy_ratio_report", "energy ratios of forward and backward solves under refinement",
         "preset=heat N=1 M=4 n_x=7 refinement_levels=3"},
        {"robustness_experiment", "solution distance under scaled perturbations",
         "preset=heat N=1 M=8 n_x=32 perturbation=full epsilons=0.001,0.002,0.004"},
        {"gradient_estimate_experiment", "weighted gradient bound of the deterministic shifted problem",
         "K_list=0,5,10,20,50 M_weights=0,1,5 eps=0.5 n_x=63 M=200"},
        {"contraction_report", "P* norm estimate over K", "preset=transport N=1 M=8 n_x=32 K_list=0,5,10,20"},
        {"heat_convergence", "heat equation against sin(pi x) exp(-pi^2 t)",
         "T=0.1 dt_levels=20,40,80 fine_n_x=511 h_levels=7,15,31 fine_M=20000"},
        {"k_shift_roundtrip", "additive lambda - K shift against the compounded solution",
         "preset=transport N=1 K=10 M_levels=8,16"},
        {"backward_solve", "one backward solve with the configured route; writes p and chi fields",
         "preset=heat N=1 M=8 n_x=32 route=adjoint"},
    };
    return catalog;
}

void list_experiments(std::ostream& out) {
    for (const auto& e : experiment_catalog()) {
        out << e.name << "  " << e.description << "  [" << e.defaults << "]\n";
    }
}

ExperimentReport run_experiment(const RunConfig& cfg) {
    const std::string& name = cfg.experiment;
    if (name == "verify_duality") return verify_duality(cfg.setup, cfg.n_trials);
    if (name == "verify_cross_solver") return verify_cross_solver(cfg.setup, cfg.n_trials);
    if (name == "neumann_decomposition") return neumann_decomposition(cfg.setup, cfg.neumann);
    if (name == "certify_coefficients") return certify_coefficients(cfg.n_draws, cfg.setup.seed);
    if (name == "certify_preset") return certify_preset(cfg.setup);
    if (name == "martingale_representation") return martingale_experiment(cfg.n_trials, cfg.setup.seed, cfg.setup.n_x);
    if (name == "verify_semigroup") return verify_semigroup(cfg.setup, cfg.tau_level, cfg.s_level);
    if (name == "energy_ratio_report") return energy_ratio_report(cfg.setup, cfg.refinement_levels);
    if (name == "robustness_experiment") return robustness_experiment(cfg.setup, cfg.perturbation, cfg.epsilons);
    if (name == "gradient_estimate_experiment") return gradient_estimate_experiment(cfg.gradient);
    if (name == "contraction_report") return contraction_report(cfg.setup, cfg.K_list);
    if (name == "heat_convergence") return heat_convergence(cfg.heat);
    if (name == "k_shift_roundtrip") return k_shift_experiment(cfg.setup, cfg.K, cfg.M_levels);
    if (name == "backward_solve") return backward_solve(cfg);
    throw ConfigError("config: unknown experiment '" + name + "' (see 'bspde list')");
}

int run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load_config(config_path);
        if (const char* dir = std::getenv(kOutputDirEnv); dir != nullptr && *dir != '\0') cfg.output_dir = dir;
        const auto& cat = experiment_catalog();
        if (std::none_of(cat.begin(), cat.end(), [&](const ExperimentInfo& e) { return e.name == cfg.experiment; })) {
            throw ConfigError("config: unknown experiment '" + cfg.experiment + "' (see 'bspde list')");
        }
        validate_config(cfg);
    } catch (const std::invalid_argument& e) {
        err << "configuration error: " << e.what() << '\n';
        return 2;
    }

    std::optional<ExperimentReport> rep;
    try {
        rep = run_experiment(cfg);
    } catch (const std::invalid_argument& e) {
        err << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "run failed: " << e.what() << '\n';
        return 1;
    }
    try {
        rep->write_files(cfg.output_dir);
    } catch (const std::exception& e) {
        err << "cannot write output to '" << cfg.output_dir.string() << "': " << e.what() << '\n';
        return 1;
    }
    rep->print_summary(out);
    out << "wrote " << (cfg.output_dir / (rep->experiment() + ".csv")).string() << '\n';
    return rep->passed() ? 0 : 1;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Backward stochastic PDE solvers on binomial noise trees"};
    app.require_subcommand(1);
    std::string config_path;
    CLI::App* run_cmd = app.add_subcommand("run", "run the experiment described by a config file");
    run_cmd->add_option("config", config_path, "INI config file")->required();
    CLI::App* list_cmd = app.add_subcommand("list", "list experiments with their defaults");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (list_cmd->parsed()) {
        list_experiments(std::cout);
        return 0;
    }
    return run(config_path, std::cout, std::cerr);
}

}  // namespace bspde
