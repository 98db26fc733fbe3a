#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "bspde/verification.hpp"

using namespace bspde;

namespace {

/// One acceptance criterion: a named bundle of experiments with a wall-clock budget.
struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<std::vector<ExperimentReport>()> run;
};

ExperimentSetup setup(const std::string& preset, int N, int M, int n_x) {
    ExperimentSetup s;
    s.preset = parse_preset(preset);
    s.N = N;
    s.M = M;
    s.n_x = n_x;
    s.seed = 7;
    return s;
}

std::vector<ExperimentSetup> pairing_suite() {
    std::vector<ExperimentSetup> out;
    for (const char* preset : {"heat", "transport"}) {
        for (auto [N, M, n_x] : {std::tuple{1, 6, 24}, {1, 8, 32}, {2, 6, 24}, {2, 8, 32}}) {
            out.push_back(setup(preset, N, M, n_x));
        }
    }
    return out;
}

std::vector<Criterion> criteria() {
    std::vector<Criterion> c;
    c.push_back({1, "duality pairing", 60.0, [] {
                     std::vector<ExperimentReport> r;
                     for (const auto& s : pairing_suite()) r.push_back(verify_duality(s, 20));
                     return r;
                 }});
    c.push_back({2, "adjoint and dynamic-programming routes agree", 60.0, [] {
                     std::vector<ExperimentReport> r;
                     for (const auto& s : pairing_suite()) r.push_back(verify_cross_solver(s, 20));
                     return r;
                 }});
    c.push_back({3, "Neumann residual rate matches P* estimate", 90.0, [] {
                     return std::vector<ExperimentReport>{
                         neumann_decomposition(setup("transport", 1, 8, 32), NeumannSettings{})};
                 }});
    c.push_back({4, "coefficient certification", 10.0,
                 [] { return std::vector<ExperimentReport>{certify_coefficients(200, 7)}; }});
    c.push_back({5, "martingale representation", 10.0,
                 [] { return std::vector<ExperimentReport>{martingale_experiment(20, 7)}; }});
    c.push_back({6, "semigroup property", 30.0, [] {
                     std::vector<ExperimentReport> r;
                     for (const char* preset : {"heat", "transport"}) {
                         for (auto [tau, s] : {std::pair{0, 7}, {2, 5}, {1, 6}}) {
                             r.push_back(verify_semigroup(setup(preset, 1, 8, 32), tau, s));
                         }
                     }
                     return r;
                 }});
    c.push_back({7, "energy ratios under refinement", 120.0, [] {
                     return std::vector<ExperimentReport>{energy_ratio_report(setup("heat", 1, 4, 7), 3),
                                                          energy_ratio_report(setup("transport", 1, 4, 7), 3)};
                 }});
    c.push_back({8, "robustness is linear in the perturbation", 60.0, [] {
                     const std::vector<double> eps{1e-3, 2e-3, 4e-3};
                     return std::vector<ExperimentReport>{
                         robustness_experiment(setup("heat", 1, 8, 32), "full", eps),
                         robustness_experiment(setup("heat", 1, 8, 32), "xi", eps),
                         robustness_experiment(setup("transport", 1, 8, 32), "full", eps)};
                 }});
    c.push_back({9, "gradient estimate", 20.0,
                 [] { return std::vector<ExperimentReport>{gradient_estimate_experiment(GradientSettings{})}; }});
    c.push_back({10, "heat convergence orders", 30.0, [] {
                     HeatSettings h;
                     h.fine_M = 20000;
                     return std::vector<ExperimentReport>{heat_convergence(h)};
                 }});
    return c;
}

std::string csv_bytes_tree(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out += std::filesystem::relative(f, dir).string() + "\n" + ss.str();
    }
    return out;
}

void write_all(const std::vector<ExperimentReport>& reports, const std::filesystem::path& dir, int id) {
    for (std::size_t j = 0; j < reports.size(); ++j) {
        const auto sub = dir / (std::to_string(id) + "_" + std::to_string(j));
        reports[j].write_files(sub);
    }
}

void print_line(int id, bool ok, const std::string& name, const std::string& detail) {
    std::printf("criterion %2d %s  %s  (%s)\n", id, ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main() {
    using Clock = std::chrono::steady_clock;
    const auto root = std::filesystem::temp_directory_path() / "bspde_acceptance";
    std::filesystem::remove_all(root);
    const auto first = root / "first";
    const auto second = root / "second";

    bool all_ok = true;
    const auto list = criteria();
    for (const auto& c : list) {
        const auto t0 = Clock::now();
        std::vector<ExperimentReport> reports;
        std::string detail;
        bool ok = true;
        try {
            reports = c.run();
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        std::size_t failures = 0;
        for (const auto& r : reports) {
            failures += r.failures();
            for (const auto& rec : r.records()) {
                if (rec.status == CheckStatus::Fail) {
                    std::printf("    %s/%s = %s, threshold %s\n", r.experiment().c_str(), rec.check.c_str(),
                                format_double(rec.value).c_str(), rec.threshold_text().c_str());
                }
            }
        }
        if (ok) {
            ok = failures == 0 && seconds <= c.budget_seconds;
            std::ostringstream d;
            d << failures << " failed checks, " << seconds << " s of " << c.budget_seconds << " s";
            detail = d.str();
            write_all(reports, first, c.id);
        }
        print_line(c.id, ok, c.name, detail);
        all_ok = all_ok && ok;
    }

    bool identical = true;
    std::string detail = "byte-identical CSV output";
    try {
        for (const auto& c : list) write_all(c.run(), second, c.id);
        identical = csv_bytes_tree(first) == csv_bytes_tree(second);
        if (!identical) detail = "CSV output differs between runs";
    } catch (const std::exception& e) {
        identical = false;
        detail = std::string("exception: ") + e.what();
    }
    print_line(11, identical, "deterministic reruns", detail);
    all_ok = all_ok && identical;
    return all_ok ? 0 : 1;
}
