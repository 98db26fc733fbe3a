#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "bspde/cli.hpp"
#include "bspde/config.hpp"
#include "bspde/error.hpp"
#include "bspde/report.hpp"
#include "bspde/verification.hpp"

using namespace bspde;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("bspde_unit_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::filesystem::path write_config(const std::filesystem::path& dir, const std::string& body) {
    const auto p = dir / "run.ini";
    std::ofstream(p) << body;
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t failures_of(const ExperimentReport& r) { return r.failures(); }

ExperimentSetup small(const std::string& preset, int N, int M, int n_x) {
    ExperimentSetup s;
    s.preset = parse_preset(preset);
    s.N = N;
    s.M = M;
    s.n_x = n_x;
    return s;
}

}  // namespace

TEST(Report, CsvAndStatus) {
    ExperimentReport r("demo");
    r.param("seed", 7LL);
    r.at_most("a", 0.5, 1.0, "x");
    r.within("b", 3.0, 1.0, 2.0, "y");
    r.monitor("c", 1.25, "z,w");
    r.skipped("d", "none");
    EXPECT_EQ(r.failures(), 1u);
    EXPECT_FALSE(r.passed());
    std::ostringstream os;
    r.write_csv(os);
    EXPECT_EQ(os.str(),
              "experiment,check,value,threshold,status,provenance\n"
              "demo,a,0.5,<=1,pass,x\n"
              "demo,b,3,[1;2],fail,y\n"
              "demo,c,1.25,,monitor,\"z,w\"\n"
              "demo,d,nan,,skipped,none\n");
    std::ostringstream ps;
    r.write_params_csv(ps);
    EXPECT_EQ(ps.str(), "key,value\nseed,7\n");
}

TEST(Config, ParsesSectionsAndLists) {
    std::istringstream in(
        "[experiment]\nname = robustness_experiment\nseed = 11\nepsilons = 0.1, 0.2\n"
        "[grid]\nn_x = 12\n[tree]\nN = 2\nM = 5\nT = 0.5\n"
        "[coefficients]\npreset = transport(1.2)\nstochastic = true\n"
        "[solver]\nK = 3\ntol = 1e-9\n[output]\ndir = here\n");
    const RunConfig c = parse_config(in);
    EXPECT_EQ(c.experiment, "robustness_experiment");
    EXPECT_EQ(c.setup.seed, 11u);
    EXPECT_EQ(c.epsilons, (std::vector<double>{0.1, 0.2}));
    EXPECT_EQ(c.setup.n_x, 12);
    EXPECT_EQ(c.setup.N, 2);
    EXPECT_DOUBLE_EQ(c.setup.T, 0.5);
    EXPECT_EQ(c.setup.preset.name, "transport");
    EXPECT_DOUBLE_EQ(c.setup.preset.amplitude, 1.2);
    EXPECT_TRUE(c.setup.preset.stochastic);
    ASSERT_TRUE(c.neumann.fixed_K.has_value());
    EXPECT_DOUBLE_EQ(*c.neumann.fixed_K, 3.0);
    EXPECT_EQ(c.output_dir, "here");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    std::istringstream a("[experiment]\nname = x\nbogus = 1\n");
    EXPECT_THROW(parse_config(a), ConfigError);
    std::istringstream b("[grid]\nn_x = many\n[experiment]\nname = x\n");
    EXPECT_THROW(parse_config(b), ConfigError);
    std::istringstream c("[grid]\nn_x = 4\n");
    EXPECT_THROW(parse_config(c), ConfigError);
}

TEST(Cli, RunWritesFilesAndExitsZero) {
    const auto dir = temp_dir("run_ok");
    const auto cfg = write_config(dir, "[experiment]\nname = verify_duality\nseed = 7\nn_trials = 3\n"
                                       "[grid]\nn_x = 8\n[tree]\nN = 1\nM = 4\n[coefficients]\npreset = heat\n"
                                       "[output]\ndir = " + (dir / "out").string() + "\n");
    std::ostringstream out, err;
    EXPECT_EQ(run(cfg, out, err), 0) << err.str();
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "verify_duality.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "verify_duality_params.csv"));
}

TEST(Cli, GridGuardExitsTwo) {
    const auto dir = temp_dir("grid_guard");
    const auto cfg = write_config(dir, "[experiment]\nname = verify_duality\n[grid]\nn_x = 1\n[output]\ndir = " +
                                           (dir / "out").string() + "\n");
    std::ostringstream out, err;
    EXPECT_EQ(run(cfg, out, err), 2);
    EXPECT_NE(err.str().find("grid"), std::string::npos);
}

TEST(Cli, UnknownExperimentExitsTwo) {
    const auto dir = temp_dir("unknown");
    const auto cfg = write_config(dir, "[experiment]\nname = no_such_thing\n");
    std::ostringstream out, err;
    EXPECT_EQ(run(cfg, out, err), 2);
    EXPECT_EQ(run(dir / "missing.ini", out, err), 2);
}

TEST(Cli, OutputDirectoryOverride) {
    const auto dir = temp_dir("env");
    const auto cfg = write_config(dir, "[experiment]\nname = certify_coefficients\nn_draws = 10\n[output]\ndir = " +
                                           (dir / "ignored").string() + "\n");
    ::setenv(kOutputDirEnv, (dir / "env_out").string().c_str(), 1);
    std::ostringstream out, err;
    const int code = run(cfg, out, err);
    ::unsetenv(kOutputDirEnv);
    EXPECT_EQ(code, 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "env_out" / "certify_coefficients.csv"));
    EXPECT_FALSE(std::filesystem::exists(dir / "ignored"));
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    const auto dir = temp_dir("determinism");
    std::string outputs[2];
    for (int r = 0; r < 2; ++r) {
        const auto out_dir = dir / ("out" + std::to_string(r));
        const auto cfg = write_config(dir, "[experiment]\nname = verify_cross_solver\nseed = 3\nn_trials = 2\n"
                                           "[grid]\nn_x = 8\n[tree]\nN = 2\nM = 3\n[coefficients]\npreset = random(4)\n"
                                           "[output]\ndir = " + out_dir.string() + "\n");
        std::ostringstream out, err;
        ASSERT_EQ(run(cfg, out, err), 0) << err.str();
        outputs[r] = slurp(out_dir / "verify_cross_solver.csv") + slurp(out_dir / "verify_cross_solver_params.csv");
    }
    EXPECT_EQ(outputs[0], outputs[1]);
}

TEST(Cli, ListContainsExperiments) {
    std::ostringstream os;
    list_experiments(os);
    const std::string s = os.str();
    EXPECT_NE(s.find("verify_duality"), std::string::npos);
    EXPECT_NE(s.find("energy_ratio_report"), std::string::npos);
    EXPECT_GE(std::count(s.begin(), s.end(), '\n'), 6);
}

TEST(Verification, SmallRunsPass) {
    EXPECT_EQ(failures_of(verify_duality(small("transport", 2, 3, 6), 2)), 0u);
    EXPECT_EQ(failures_of(verify_cross_solver(small("random(5)", 1, 4, 6), 2)), 0u);
    EXPECT_EQ(failures_of(verify_semigroup(small("transport", 2, 4, 6), 1, 3)), 0u);
    EXPECT_EQ(failures_of(martingale_experiment(3, 1)), 0u);
    EXPECT_EQ(failures_of(certify_coefficients(30, 2)), 0u);
    EXPECT_EQ(failures_of(contraction_report(small("transport", 1, 4, 8), {0.0, 5.0})), 0u);
}

TEST(Verification, SemigroupGuards) {
    EXPECT_THROW(verify_semigroup(small("heat", 1, 4, 6), 2, 2), GuardError);
    EXPECT_THROW(verify_semigroup(small("heat", 1, 4, 6), 0, 4), GuardError);
}

TEST(Verification, RobustnessAtZeroAndLinearity) {
    const ExperimentReport r = robustness_experiment(small("heat", 1, 4, 8), "xi", {0.0, 1e-3, 2e-3});
    EXPECT_TRUE(r.passed());
    bool saw_zero = false;
    for (const auto& rec : r.records()) {
        if (rec.check == "distance_at_zero_eps") {
            saw_zero = true;
            EXPECT_EQ(rec.value, 0.0);
        }
    }
    EXPECT_TRUE(saw_zero);
    EXPECT_THROW(robustness_experiment(small("heat", 1, 4, 8), "bogus", {1e-3}), GuardError);
}

TEST(Verification, RobustnessRejectsLostCoercivity) {
    EXPECT_THROW(robustness_experiment(small("near_degenerate", 1, 3, 8), "full", {0.5, 1.0}), CoefficientError);
}

TEST(Verification, GradientEstimateWithZeroForcing) {
    GradientSettings g;
    g.K_list = {0.0, 10.0};
    g.n_x = 15;
    g.M = 20;
    const ExperimentReport r = gradient_estimate_experiment(g);
    EXPECT_TRUE(r.passed());
}
