#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bspde/grid.hpp"
#include "bspde/noise_tree.hpp"

namespace bspde {

/// Evaluation slot for coefficients on [t_k, t_{k+1}) at a tree node.
struct NodeContext {
    int level = 0;
    double t = 0.0;
    std::size_t node = 0;
    std::span<const double> w;  ///< w(t_k) at the node, one entry per component
};

using ScalarField = std::function<double(double x, const NodeContext&)>;

/// 1-D coefficients of A v = (b v)'' - (f v)' + lambda v and
/// B_i v = -(beta_i v)' + beta_bar_i v.
struct ModelCoefficients {
    std::string name;
    int N = 0;
    ScalarField b;
    ScalarField f;
    ScalarField lambda;
    std::vector<ScalarField> beta;
    std::vector<ScalarField> beta_bar;
    bool time_dependent = false;
    bool noise_dependent = false;

    /// Copy with lambda replaced by lambda + delta.
    ModelCoefficients with_lambda_offset(double delta) const;
};

/// Preset selector. amplitude < 0 selects the preset default.
struct PresetSpec {
    std::string name = "heat";
    double amplitude = -1.0;
    std::uint64_t seed = 0;
    bool stochastic = false;
};

/// Parses "heat", "transport", "driftful", "near_degenerate", "random(17)".
PresetSpec parse_preset(const std::string& text);
std::vector<std::string> preset_names();

/// Presets on [x_lo, x_hi]; s = (x - x_lo)/(x_hi - x_lo).
///   heat            b = 1, all else 0
///   transport       b = 1 + 0.2 s (+ 0.1 tanh(w_1) when stochastic), f = 0.5, lambda = -0.5,
///                   beta_i = a_i sin(pi s), beta_bar_i = 0.2 cos(pi s) / (i + 1), a = 0.8
///   driftful        b = 1, f = 1 + 2 sin(2 pi s), lambda = 1, beta_i = a 4 s (1 - s) / sqrt(N),
///                   beta_bar_i = 0.3, a = 0.5
///   near_degenerate b = 1, beta_1 = sqrt(2 (1 - a)), others 0, a = 0.01 (the margin)
///   random(seed)    Fourier-type fields, time and noise dependent, margin >= 0.25
ModelCoefficients make_preset(const PresetSpec& spec, int N, double x_lo, double x_hi);

/// Deterministic 64-bit generator with a fixed uniform mapping.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

struct SampleLocation {
    std::vector<double> x;
    int level = 0;
    std::size_t node = 0;
};

/// Coefficients frozen at one (x, interval, node) sample, general dimension n.
struct CoefficientSample {
    Eigen::MatrixXd b;          ///< n x n
    Eigen::MatrixXd beta;       ///< n x N, column i is beta_i
    Eigen::VectorXd f;          ///< n
    double lambda = 0.0;
    Eigen::VectorXd beta_bar;   ///< N
    SampleLocation where;
};

struct CoefficientSet {
    int n = 1;
    int N = 0;
    std::vector<CoefficientSample> samples;
};

/// Samples a 1-D model at every interior node, every interval and every tree node.
CoefficientSet sample_coefficients(const ModelCoefficients& model, const Grid& grid,
                                   const NoiseTree& tree);

/// Constant two-dimensional coefficients with standard margin 0.01 and
/// strengthened margin -0.49.
CoefficientSet example1_coefficients();

/// Random coefficient sample with symmetric positive semidefinite-ish b and
/// random beta; beta_i = 0 for i >= active_noise.
CoefficientSample random_sample(int n, int N, int active_noise, Rng& rng);

struct MarginResult {
    double margin = 0.0;
    std::size_t argmin = 0;  ///< index into CoefficientSet::samples
};

/// min lambda_min(b - 1/2 sum beta_i beta_i^T)
MarginResult check_coercivity(const CoefficientSet& coeffs);
/// min lambda_min(I_N (x) b - 1/2 beta beta^T), beta the stacked nN-vector
MarginResult check_strengthened_coercivity(const CoefficientSet& coeffs);
/// min over i <= N0 of lambda_min(b - N0/2 beta_i beta_i^T); throws if beta_i != 0 for i > N0
MarginResult check_criterion_N0(const CoefficientSet& coeffs, int N0);

/// Per-sample forms, exposed for property tests.
Eigen::MatrixXd standard_form(const CoefficientSample& s);
Eigen::MatrixXd strengthened_form(const CoefficientSample& s);
double smallest_eigenvalue(const Eigen::MatrixXd& symmetric);

struct ConditionReport {
    double margin_standard = 0.0;
    double margin_strengthened = 0.0;
    std::optional<double> margin_N0;
    SampleLocation argmin_standard;
    SampleLocation argmin_strengthened;
    std::optional<SampleLocation> argmin_N0;
};

ConditionReport certify(const CoefficientSet& coeffs, std::optional<int> N0 = std::nullopt);

/// CSV: margin,value,x,level,node
void write_condition_csv(std::ostream& os, const ConditionReport& report);

/// Sup-norms of the 1-D coefficients and their x-derivatives (centered
/// differences with step h/2), plus the coercivity margin.
struct ParameterBounds {
    double b = 0.0, f = 0.0, lambda = 0.0, lambda_plus = 0.0, beta = 0.0, beta_bar = 0.0;
    double db_dx = 0.0, df_dx = 0.0, dbeta_dx = 0.0;
    double b_min = 0.0;
    double margin = 0.0;
    double beta_at_boundary = 0.0;  ///< max |beta_i| at x_lo and x_hi
    std::string derivative_method = "centered differences, step h/2";
};

ParameterBounds parameter_bounds(const ModelCoefficients& model, const Grid& grid, const NoiseTree& tree);

}  // namespace bspde
