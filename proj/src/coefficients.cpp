#include "bspde/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "bspde/error.hpp"

namespace bspde {

namespace {

constexpr double kPi = std::numbers::pi;

ScalarField constant(double c) {
    return [c](double, const NodeContext&) { return c; };
}

void check_symmetric(const CoefficientSample& s) {
    if (s.b.rows() != s.b.cols()) throw CoefficientError("b is not square");
    const double asym = (s.b - s.b.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12) {
        throw CoefficientError("b is not symmetric (max |b - b^T| = " + std::to_string(asym) + ")");
    }
}

double w_component(const NodeContext& ctx, std::size_t i) {
    return i < ctx.w.size() ? ctx.w[i] : 0.0;
}

}  // namespace

ModelCoefficients ModelCoefficients::with_lambda_offset(double delta) const {
    ModelCoefficients out = *this;
    ScalarField base = lambda;
    out.lambda = [base, delta](double x, const NodeContext& ctx) { return base(x, ctx) + delta; };
    return out;
}

std::vector<std::string> preset_names() {
    return {"heat", "transport", "driftful", "near_degenerate", "random"};
}

PresetSpec parse_preset(const std::string& text) {
    PresetSpec spec;
    const auto open = text.find('(');
    spec.name = text.substr(0, open);
    if (open != std::string::npos) {
        const auto close = text.find(')', open);
        if (close == std::string::npos) throw GuardError("preset: unbalanced parenthesis in '" + text + "'");
        const std::string arg = text.substr(open + 1, close - open - 1);
        try {
            if (spec.name == "random") {
                spec.seed = std::stoull(arg);
            } else {
                spec.amplitude = std::stod(arg);
            }
        } catch (const std::exception&) {
            throw GuardError("preset: bad argument '" + arg + "' in '" + text + "'");
        }
    }
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), spec.name) == names.end()) {
        throw GuardError("preset: unknown preset '" + spec.name + "'");
    }
    return spec;
}

ModelCoefficients make_preset(const PresetSpec& spec, int N, double x_lo, double x_hi) {
    if (N < 0) throw GuardError("preset: N must be >= 0");
    const double len = x_hi - x_lo;
    auto s_of = [x_lo, len](double x) { return (x - x_lo) / len; };
    ModelCoefficients m;
    m.name = spec.name;
    m.N = N;
    m.b = constant(1.0);
    m.f = constant(0.0);
    m.lambda = constant(0.0);
    m.beta.assign(static_cast<std::size_t>(N), constant(0.0));
    m.beta_bar.assign(static_cast<std::size_t>(N), constant(0.0));

    if (spec.name == "heat") {
        return m;
    }
    if (spec.name == "transport") {
        const double a = spec.amplitude >= 0.0 ? spec.amplitude : 0.8;
        const bool stochastic = spec.stochastic && N > 0;
        m.b = [s_of, stochastic](double x, const NodeContext& ctx) {
            double v = 1.0 + 0.2 * s_of(x);
            if (stochastic) v += 0.1 * std::tanh(w_component(ctx, 0));
            return v;
        };
        m.noise_dependent = stochastic;
        m.f = constant(0.5);
        m.lambda = constant(-0.5);
        for (int i = 0; i < N; ++i) {
            const double ai = a / std::sqrt(static_cast<double>(N)) * (1.0 - 0.1 * i);
            m.beta[static_cast<std::size_t>(i)] = [s_of, ai](double x, const NodeContext&) {
                return ai * std::sin(kPi * s_of(x));
            };
            const double ci = 0.2 / (i + 1);
            m.beta_bar[static_cast<std::size_t>(i)] = [s_of, ci](double x, const NodeContext&) {
                return ci * std::cos(kPi * s_of(x));
            };
        }
        return m;
    }
    if (spec.name == "driftful") {
        const double a = spec.amplitude >= 0.0 ? spec.amplitude : 0.5;
        m.f = [s_of](double x, const NodeContext&) { return 1.0 + 2.0 * std::sin(2.0 * kPi * s_of(x)); };
        m.lambda = constant(1.0);
        for (int i = 0; i < N; ++i) {
            const double ai = a / std::sqrt(static_cast<double>(N));
            m.beta[static_cast<std::size_t>(i)] = [s_of, ai](double x, const NodeContext&) {
                const double s = s_of(x);
                return ai * 4.0 * s * (1.0 - s);
            };
            m.beta_bar[static_cast<std::size_t>(i)] = constant(0.3);
        }
        return m;
    }
    if (spec.name == "near_degenerate") {
        const double delta = spec.amplitude >= 0.0 ? spec.amplitude : 0.01;
        if (delta > 1.0) throw GuardError("near_degenerate: margin parameter must be <= 1");
        if (N > 0) m.beta[0] = constant(std::sqrt(2.0 * (1.0 - delta)));
        return m;
    }
    if (spec.name == "random") {
        Rng rng(spec.seed);
        const double b1 = rng.uniform(0.0, 0.3);
        const double ph1 = rng.uniform(0.0, 2.0 * kPi);
        const double f0 = rng.uniform(-1.0, 1.0);
        const double f1 = rng.uniform(-1.0, 1.0);
        const double ph2 = rng.uniform(0.0, 2.0 * kPi);
        const double l0 = rng.uniform(-1.0, 0.5);
        const bool noisy = N > 0;
        m.time_dependent = true;
        m.noise_dependent = noisy;
        m.b = [s_of, b1, ph1, noisy](double x, const NodeContext& ctx) {
            double v = 1.0 + b1 * std::sin(kPi * s_of(x) + ph1);
            if (noisy) v += 0.1 * std::tanh(w_component(ctx, 0)) * std::cos(ctx.t);
            return v;
        };
        m.f = [s_of, f0, f1, ph2](double x, const NodeContext&) {
            return f0 + f1 * std::cos(kPi * s_of(x) + ph2);
        };
        m.lambda = [s_of, l0](double x, const NodeContext& ctx) {
            return l0 + 0.2 * std::sin(2.0 * kPi * s_of(x)) * std::cos(ctx.t);
        };
        const double amax = std::sqrt(0.6 / std::max(N, 1)) / 1.2;
        for (int i = 0; i < N; ++i) {
            const double ai = rng.uniform(-amax, amax);
            const double ci = rng.uniform(-0.5, 0.5);
            const auto iu = static_cast<std::size_t>(i);
            m.beta[iu] = [s_of, ai, iu](double x, const NodeContext& ctx) {
                return ai * std::sin(kPi * s_of(x)) * (1.0 + 0.2 * std::tanh(w_component(ctx, iu)));
            };
            m.beta_bar[iu] = [s_of, ci](double x, const NodeContext&) {
                return ci + 0.1 * std::cos(kPi * s_of(x));
            };
        }
        return m;
    }
    throw GuardError("preset: unknown preset '" + spec.name + "'");
}

CoefficientSet sample_coefficients(const ModelCoefficients& model, const Grid& grid,
                                   const NoiseTree& tree) {
    CoefficientSet set;
    set.n = 1;
    set.N = model.N;
    const int levels = model.time_dependent ? tree.M() : 1;
    std::vector<double> w(static_cast<std::size_t>(tree.N()));
    for (int k = 0; k < levels; ++k) {
        const std::size_t nodes = model.noise_dependent ? tree.level_size(k) : 1;
        for (std::size_t nu = 0; nu < nodes; ++nu) {
            tree.w_all(k, nu, w);
            const NodeContext ctx{k, tree.time(k), nu, w};
            for (int j = 1; j <= grid.n_x(); ++j) {
                const double x = grid.node(j);
                CoefficientSample s;
                s.b = Eigen::MatrixXd::Constant(1, 1, model.b(x, ctx));
                s.f = Eigen::VectorXd::Constant(1, model.f(x, ctx));
                s.lambda = model.lambda(x, ctx);
                s.beta = Eigen::MatrixXd::Zero(1, model.N);
                s.beta_bar = Eigen::VectorXd::Zero(model.N);
                for (int i = 0; i < model.N; ++i) {
                    s.beta(0, i) = model.beta[static_cast<std::size_t>(i)](x, ctx);
                    s.beta_bar(i) = model.beta_bar[static_cast<std::size_t>(i)](x, ctx);
                }
                s.where = SampleLocation{{x}, k, nu};
                set.samples.push_back(std::move(s));
            }
        }
    }
    return set;
}

CoefficientSet example1_coefficients() {
    CoefficientSet set;
    set.n = 2;
    set.N = 2;
    CoefficientSample s;
    s.beta = Eigen::MatrixXd::Identity(2, 2);  // beta_1 = e_1, beta_2 = e_2
    s.b = 0.5 * (s.beta.col(0) * s.beta.col(0).transpose() + s.beta.col(1) * s.beta.col(1).transpose()) +
          0.01 * Eigen::MatrixXd::Identity(2, 2);
    s.f = Eigen::VectorXd::Zero(2);
    s.beta_bar = Eigen::VectorXd::Zero(2);
    s.where = SampleLocation{{0.0, 0.0}, 0, 0};
    set.samples.push_back(std::move(s));
    return set;
}

CoefficientSample random_sample(int n, int N, int active_noise, Rng& rng) {
    CoefficientSample s;
    Eigen::MatrixXd g(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) g(r, c) = rng.uniform(-1.0, 1.0);
    s.b = g * g.transpose() / n + rng.uniform(0.0, 0.5) * Eigen::MatrixXd::Identity(n, n);
    s.b = 0.5 * (s.b + s.b.transpose());
    const double scale = rng.uniform(0.0, 1.5);
    s.beta = Eigen::MatrixXd::Zero(n, N);
    for (int i = 0; i < std::min(active_noise, N); ++i)
        for (int r = 0; r < n; ++r) s.beta(r, i) = scale * rng.uniform(-1.0, 1.0);
    s.f = Eigen::VectorXd::Zero(n);
    s.beta_bar = Eigen::VectorXd::Zero(N);
    s.where = SampleLocation{std::vector<double>(static_cast<std::size_t>(n), 0.0), 0, 0};
    return s;
}

double smallest_eigenvalue(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

Eigen::MatrixXd standard_form(const CoefficientSample& s) {
    Eigen::MatrixXd m = s.b;
    for (int i = 0; i < s.beta.cols(); ++i) m -= 0.5 * s.beta.col(i) * s.beta.col(i).transpose();
    return m;
}

Eigen::MatrixXd strengthened_form(const CoefficientSample& s) {
    const auto n = s.b.rows();
    const auto N = s.beta.cols();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n * N, n * N);
    Eigen::VectorXd stacked(n * N);
    for (Eigen::Index i = 0; i < N; ++i) {
        m.block(i * n, i * n, n, n) = s.b;
        stacked.segment(i * n, n) = s.beta.col(i);
    }
    m -= 0.5 * stacked * stacked.transpose();
    return m;
}

MarginResult check_coercivity(const CoefficientSet& coeffs) {
    MarginResult r{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t k = 0; k < coeffs.samples.size(); ++k) {
        check_symmetric(coeffs.samples[k]);
        const double m = smallest_eigenvalue(standard_form(coeffs.samples[k]));
        if (m < r.margin) r = {m, k};
    }
    return r;
}

MarginResult check_strengthened_coercivity(const CoefficientSet& coeffs) {
    MarginResult r{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t k = 0; k < coeffs.samples.size(); ++k) {
        const CoefficientSample& s = coeffs.samples[k];
        check_symmetric(s);
        const double m = s.beta.cols() == 0 ? smallest_eigenvalue(s.b) : smallest_eigenvalue(strengthened_form(s));
        if (m < r.margin) r = {m, k};
    }
    return r;
}

MarginResult check_criterion_N0(const CoefficientSet& coeffs, int N0) {
    if (N0 < 1 || N0 > coeffs.N) {
        throw GuardError("criterion N0 must be in [1, N], got " + std::to_string(N0));
    }
    MarginResult r{std::numeric_limits<double>::infinity(), 0};
    for (std::size_t k = 0; k < coeffs.samples.size(); ++k) {
        const CoefficientSample& s = coeffs.samples[k];
        check_symmetric(s);
        for (int i = N0; i < s.beta.cols(); ++i) {
            if (s.beta.col(i).cwiseAbs().maxCoeff() != 0.0) {
                throw CoefficientError("criterion N0 = " + std::to_string(N0) + ": beta_" +
                                       std::to_string(i + 1) + " is not identically zero");
            }
        }
        for (int i = 0; i < N0; ++i) {
            const Eigen::MatrixXd m = s.b - 0.5 * N0 * s.beta.col(i) * s.beta.col(i).transpose();
            const double e = smallest_eigenvalue(m);
            if (e < r.margin) r = {e, k};
        }
    }
    return r;
}

ConditionReport certify(const CoefficientSet& coeffs, std::optional<int> N0) {
    ConditionReport rep;
    const MarginResult a = check_coercivity(coeffs);
    const MarginResult b = check_strengthened_coercivity(coeffs);
    rep.margin_standard = a.margin;
    rep.margin_strengthened = b.margin;
    rep.argmin_standard = coeffs.samples.at(a.argmin).where;
    rep.argmin_strengthened = coeffs.samples.at(b.argmin).where;
    if (N0) {
        const MarginResult c = check_criterion_N0(coeffs, *N0);
        rep.margin_N0 = c.margin;
        rep.argmin_N0 = coeffs.samples.at(c.argmin).where;
    }
    return rep;
}

void write_condition_csv(std::ostream& os, const ConditionReport& report) {
    os << "margin,value,x,level,node\n";
    char buf[64];
    auto row = [&](const char* name, double v, const SampleLocation& where) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << name << ',' << buf << ',';
        for (std::size_t d = 0; d < where.x.size(); ++d) {
            std::snprintf(buf, sizeof buf, "%.17g", where.x[d]);
            os << (d ? " " : "") << buf;
        }
        os << ',' << where.level << ',' << where.node << '\n';
    };
    row("standard", report.margin_standard, report.argmin_standard);
    row("strengthened", report.margin_strengthened, report.argmin_strengthened);
    if (report.margin_N0) row("N0", *report.margin_N0, *report.argmin_N0);
}

ParameterBounds parameter_bounds(const ModelCoefficients& model, const Grid& grid, const NoiseTree& tree) {
    ParameterBounds pb;
    pb.b_min = std::numeric_limits<double>::infinity();
    pb.margin = std::numeric_limits<double>::infinity();
    const double step = 0.5 * grid.h();
    auto deriv = [step](const ScalarField& g, double x, const NodeContext& ctx) {
        return (g(x + step, ctx) - g(x - step, ctx)) / (2.0 * step);
    };
    const int levels = model.time_dependent ? tree.M() : 1;
    std::vector<double> w(static_cast<std::size_t>(tree.N()));
    for (int k = 0; k < levels; ++k) {
        const std::size_t nodes = model.noise_dependent ? tree.level_size(k) : 1;
        for (std::size_t nu = 0; nu < nodes; ++nu) {
            tree.w_all(k, nu, w);
            const NodeContext ctx{k, tree.time(k), nu, w};
            for (int j = 0; j <= grid.n_x() + 1; ++j) {
                const double x = grid.node(j);
                const bool boundary = j == 0 || j == grid.n_x() + 1;
                double beta_sq = 0.0;
                for (int i = 0; i < model.N; ++i) {
                    const double bi = model.beta[static_cast<std::size_t>(i)](x, ctx);
                    beta_sq += bi * bi;
                    pb.beta = std::max(pb.beta, std::abs(bi));
                    pb.beta_bar = std::max(pb.beta_bar, std::abs(model.beta_bar[static_cast<std::size_t>(i)](x, ctx)));
                    pb.dbeta_dx = std::max(pb.dbeta_dx, std::abs(deriv(model.beta[static_cast<std::size_t>(i)], x, ctx)));
                    if (boundary) pb.beta_at_boundary = std::max(pb.beta_at_boundary, std::abs(bi));
                }
                const double bv = model.b(x, ctx);
                const double lv = model.lambda(x, ctx);
                pb.b = std::max(pb.b, std::abs(bv));
                pb.b_min = std::min(pb.b_min, bv);
                pb.f = std::max(pb.f, std::abs(model.f(x, ctx)));
                pb.lambda = std::max(pb.lambda, std::abs(lv));
                pb.lambda_plus = std::max(pb.lambda_plus, lv);
                pb.db_dx = std::max(pb.db_dx, std::abs(deriv(model.b, x, ctx)));
                pb.df_dx = std::max(pb.df_dx, std::abs(deriv(model.f, x, ctx)));
                pb.margin = std::min(pb.margin, bv - 0.5 * beta_sq);
            }
        }
    }
    return pb;
}

}  // namespace bspde
