#include "bspde/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bspde/error.hpp"

namespace bspde {

namespace {

template <class T>
T parse_value(const std::string& key, const std::string& text) {
    try {
        return boost::lexical_cast<T>(boost::algorithm::trim_copy(text));
    } catch (const boost::bad_lexical_cast&) {
        throw ConfigError("config: cannot parse '" + text + "' for key '" + key + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(text));
    if (t == "1" || t == "true" || t == "yes") return true;
    if (t == "0" || t == "false" || t == "no") return false;
    throw ConfigError("config: cannot parse '" + text + "' as a boolean for key '" + key + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<std::string> parts;
    boost::algorithm::split(parts, text, boost::algorithm::is_any_of(","));
    std::vector<T> out;
    for (const auto& p : parts) {
        if (boost::algorithm::trim_copy(p).empty()) continue;
        out.push_back(parse_value<T>(key, p));
    }
    if (out.empty()) throw ConfigError("config: empty list for key '" + key + "'");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <class T, class Member>
Setter set(Member member) {
    return [member](RunConfig& c, const std::string& key, const std::string& v) {
        member(c) = parse_value<T>(key, v);
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"experiment.name", [](RunConfig& c, const std::string&, const std::string& v) {
             c.experiment = boost::algorithm::trim_copy(v);
         }},
        {"experiment.seed", set<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.setup.seed; })},
        {"experiment.n_trials", set<int>([](RunConfig& c) -> int& { return c.n_trials; })},
        {"experiment.n_draws", set<int>([](RunConfig& c) -> int& { return c.n_draws; })},
        {"experiment.tau_level", set<int>([](RunConfig& c) -> int& { return c.tau_level; })},
        {"experiment.s_level", set<int>([](RunConfig& c) -> int& { return c.s_level; })},
        {"experiment.refinement_levels", set<int>([](RunConfig& c) -> int& { return c.refinement_levels; })},
        {"experiment.perturbation", [](RunConfig& c, const std::string&, const std::string& v) {
             c.perturbation = boost::algorithm::trim_copy(v);
         }},
        {"experiment.epsilons", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.epsilons = parse_list<double>(k, v);
         }},
        {"experiment.K_list", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.K_list = parse_list<double>(k, v);
         }},
        {"experiment.M_levels", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.M_levels = parse_list<int>(k, v);
         }},
        {"experiment.K", set<double>([](RunConfig& c) -> double& { return c.K; })},
        {"grid.x_lo", set<double>([](RunConfig& c) -> double& { return c.setup.x_lo; })},
        {"grid.x_hi", set<double>([](RunConfig& c) -> double& { return c.setup.x_hi; })},
        {"grid.n_x", set<int>([](RunConfig& c) -> int& { return c.setup.n_x; })},
        {"tree.N", set<int>([](RunConfig& c) -> int& { return c.setup.N; })},
        {"tree.M", set<int>([](RunConfig& c) -> int& { return c.setup.M; })},
        {"tree.T", set<double>([](RunConfig& c) -> double& { return c.setup.T; })},
        {"coefficients.preset", [](RunConfig& c, const std::string&, const std::string& v) {
             const double amplitude = c.setup.preset.amplitude;
             const bool stochastic = c.setup.preset.stochastic;
             c.setup.preset = parse_preset(boost::algorithm::trim_copy(v));
             if (c.setup.preset.amplitude < 0.0) c.setup.preset.amplitude = amplitude;
             c.setup.preset.stochastic = stochastic;
         }},
        {"coefficients.amplitude", set<double>([](RunConfig& c) -> double& { return c.setup.preset.amplitude; })},
        {"coefficients.stochastic", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.setup.preset.stochastic = parse_bool(k, v);
         }},
        {"solver.route", [](RunConfig& c, const std::string&, const std::string& v) {
             c.route = boost::algorithm::trim_copy(v);
         }},
        {"solver.K_policy", [](RunConfig& c, const std::string& k, const std::string& v) {
             const std::string p = boost::algorithm::trim_copy(v);
             if (p == "auto") {
                 c.neumann.fixed_K.reset();
             } else if (p == "fixed") {
                 if (!c.neumann.fixed_K) c.neumann.fixed_K = 0.0;
             } else {
                 throw ConfigError("config: " + k + " must be 'auto' or 'fixed', got '" + p + "'");
             }
         }},
        {"solver.K", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.neumann.fixed_K = parse_value<double>(k, v);
         }},
        {"solver.K_candidates", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.neumann.K_candidates = parse_list<double>(k, v);
         }},
        {"solver.contraction_target", set<double>([](RunConfig& c) -> double& { return c.neumann.target; })},
        {"solver.tol", set<double>([](RunConfig& c) -> double& { return c.neumann.tol; })},
        {"solver.max_iter", set<int>([](RunConfig& c) -> int& { return c.neumann.max_iter; })},
        {"gradient.K_list", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.gradient.K_list = parse_list<double>(k, v);
         }},
        {"gradient.M_weights", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.gradient.M_weights = parse_list<double>(k, v);
         }},
        {"gradient.eps", set<double>([](RunConfig& c) -> double& { return c.gradient.eps; })},
        {"gradient.n_x", set<int>([](RunConfig& c) -> int& { return c.gradient.n_x; })},
        {"gradient.M", set<int>([](RunConfig& c) -> int& { return c.gradient.M; })},
        {"gradient.T", set<double>([](RunConfig& c) -> double& { return c.gradient.T; })},
        {"heat.T", set<double>([](RunConfig& c) -> double& { return c.heat.T; })},
        {"heat.fine_n_x", set<int>([](RunConfig& c) -> int& { return c.heat.fine_n_x; })},
        {"heat.fine_M", set<int>([](RunConfig& c) -> int& { return c.heat.fine_M; })},
        {"heat.dt_levels", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.heat.dt_levels = parse_list<int>(k, v);
         }},
        {"heat.h_levels", [](RunConfig& c, const std::string& k, const std::string& v) {
             c.heat.h_levels = parse_list<int>(k, v);
         }},
        {"output.dir", [](RunConfig& c, const std::string&, const std::string& v) {
             c.output_dir = boost::algorithm::trim_copy(v);
         }},
    };
    return table;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    const auto& table = setters();
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            const auto it = table.find(full);
            if (it == table.end()) throw ConfigError("config: unknown key '" + full + "'");
            it->second(cfg, full, value.data());
        }
    }
    cfg.gradient.seed = cfg.setup.seed;
    if (cfg.experiment.empty()) throw ConfigError("config: [experiment] name is required");
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot read '" + path.string() + "'");
    return parse_config(f);
}

void validate_config(const RunConfig& config) {
    const ExperimentSetup& s = config.setup;
    Grid::build(s.x_lo, s.x_hi, s.n_x);
    if (s.N == 0) {
        NoiseTree::single_path(s.M, s.T);
    } else {
        NoiseTree::build(s.N, s.M, s.T);
    }
    make_preset(s.preset, s.N, s.x_lo, s.x_hi);
    if (config.n_trials < 1) throw GuardError("config: n_trials must be >= 1");
    if (config.neumann.tol <= 0.0) throw GuardError("config: solver tol must be > 0");
    if (config.neumann.max_iter < 1) throw GuardError("config: solver max_iter must be >= 1");
    if (config.route != "adjoint" && config.route != "dp" && config.route != "neumann") {
        throw GuardError("config: solver route must be adjoint, dp or neumann, got '" + config.route + "'");
    }
}

}  // namespace bspde
