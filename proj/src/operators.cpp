#include "bspde/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "bspde/error.hpp"

namespace bspde {

Tridiagonal assemble_A(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx) {
    const auto n = static_cast<std::size_t>(grid.n_x());
    const double h = grid.h();
    const double ih2 = 1.0 / (h * h);
    const double i2h = 0.5 / h;
    std::vector<double> b(n), f(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = grid.node(static_cast<int>(j) + 1);
        b[j] = c.b(x, ctx);
        f[j] = c.f(x, ctx);
    }
    Tridiagonal m(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = grid.node(static_cast<int>(j) + 1);
        m.diag[j] = -2.0 * b[j] * ih2 + c.lambda(x, ctx);
        if (j > 0) m.lower[j] = b[j - 1] * ih2 + f[j - 1] * i2h;
        if (j + 1 < n) m.upper[j] = b[j + 1] * ih2 - f[j + 1] * i2h;
    }
    return m;
}

Tridiagonal assemble_A_star(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx) {
    return assemble_A(c, grid, ctx).transposed();
}

Tridiagonal assemble_A_star_direct(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx) {
    const auto n = static_cast<std::size_t>(grid.n_x());
    const double h = grid.h();
    const double ih2 = 1.0 / (h * h);
    const double i2h = 0.5 / h;
    Tridiagonal m(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = grid.node(static_cast<int>(j) + 1);
        const double bj = c.b(x, ctx);
        const double fj = c.f(x, ctx);
        m.diag[j] = -2.0 * bj * ih2 + c.lambda(x, ctx);
        if (j > 0) m.lower[j] = bj * ih2 - fj * i2h;
        if (j + 1 < n) m.upper[j] = bj * ih2 + fj * i2h;
    }
    return m;
}

Tridiagonal assemble_B(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx, int i) {
    if (i < 0 || i >= c.N) throw ShapeError("assemble_B: component out of range");
    const auto n = static_cast<std::size_t>(grid.n_x());
    const double i2h = 0.5 / grid.h();
    const ScalarField& beta = c.beta[static_cast<std::size_t>(i)];
    const ScalarField& beta_bar = c.beta_bar[static_cast<std::size_t>(i)];
    std::vector<double> be(n + 1);
    for (std::size_t e = 0; e <= n; ++e) be[e] = beta(grid.edge_midpoint(static_cast<int>(e)), ctx);
    Tridiagonal m(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = grid.node(static_cast<int>(j) + 1);
        // interior j sits between edges j (left) and j+1 (right)
        m.diag[j] = -(be[j + 1] - be[j]) * i2h + beta_bar(x, ctx);
        if (j > 0) m.lower[j] = be[j] * i2h;
        if (j + 1 < n) m.upper[j] = -be[j + 1] * i2h;
    }
    return m;
}

Tridiagonal assemble_B_star(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx, int i) {
    return assemble_B(c, grid, ctx, i).transposed();
}

OperatorStack::OperatorStack(std::shared_ptr<const ModelCoefficients> coeffs, const Grid& grid, TreePtr tree,
                             std::size_t cache_limit_bytes)
    : coeffs_(std::move(coeffs)), grid_(grid), tree_(std::move(tree)) {
    if (!coeffs_ || !tree_) throw ShapeError("operator stack: null coefficients or tree");
    if (coeffs_->N != tree_->N()) {
        throw ShapeError("operator stack: coefficients have N = " + std::to_string(coeffs_->N) +
                         ", tree has N = " + std::to_string(tree_->N()));
    }
    const int levels = coeffs_->time_dependent ? tree_->M() : 1;
    level_offset_.resize(static_cast<std::size_t>(levels) + 1);
    std::size_t slots = 0;
    for (int k = 0; k < levels; ++k) {
        level_offset_[static_cast<std::size_t>(k)] = slots;
        slots += coeffs_->noise_dependent ? tree_->level_size(k) : 1;
    }
    level_offset_[static_cast<std::size_t>(levels)] = slots;
    const std::size_t slot_bytes = static_cast<std::size_t>(3 + coeffs_->N) * 3 *
                                   static_cast<std::size_t>(grid_.n_x()) * sizeof(double);
    cached_ = slots * slot_bytes <= cache_limit_bytes;
    if (cached_) cache_.resize(slots);
}

std::size_t OperatorStack::key(int k, std::size_t node) const {
    const int kk = coeffs_->time_dependent ? k : 0;
    const std::size_t nn = coeffs_->noise_dependent ? node : 0;
    return level_offset_[static_cast<std::size_t>(kk)] + nn;
}

NodeContext OperatorStack::context(int k, std::size_t node, std::vector<double>& w_scratch) const {
    w_scratch.resize(static_cast<std::size_t>(tree_->N()));
    tree_->w_all(k, node, w_scratch);
    return NodeContext{k, tree_->time(k), node, w_scratch};
}

OperatorSlot OperatorStack::assemble(int k, std::size_t node) const {
    std::vector<double> w;
    const NodeContext ctx = context(k, node, w);
    OperatorSlot slot;
    slot.A = assemble_A(*coeffs_, grid_, ctx);
    slot.step = slot.A.implicit_step_matrix(tree_->dt());
    slot.step_star = assemble_A_star(*coeffs_, grid_, ctx).implicit_step_matrix(tree_->dt());
    slot.B.reserve(static_cast<std::size_t>(coeffs_->N));
    for (int i = 0; i < coeffs_->N; ++i) slot.B.push_back(assemble_B(*coeffs_, grid_, ctx, i));
    return slot;
}

const OperatorSlot& OperatorStack::at(int k, std::size_t node) const {
    if (k < 0 || k >= tree_->M() || node >= tree_->level_size(k)) {
        throw ShapeError("operator stack: slot (" + std::to_string(k) + ", " + std::to_string(node) +
                         ") out of range");
    }
    if (!cached_) {
        scratch_ = assemble(k, node);
        return scratch_;
    }
    auto& entry = cache_[key(k, node)];
    if (!entry) entry = std::make_unique<OperatorSlot>(assemble(k, node));
    return *entry;
}

SchemeValidation validate_scheme(const ModelCoefficients& c, const Grid& grid, const NoiseTree& tree,
                                 bool second_fe) {
    SchemeValidation v;
    const ParameterBounds pb = parameter_bounds(c, grid, tree);
    const double dt = tree.dt();
    v.dt_lambda_plus = dt * pb.lambda_plus;
    v.margin = pb.margin;
    double b_inf = 0.0;
    {
        const int levels = c.time_dependent ? tree.M() : 1;
        std::vector<double> w(static_cast<std::size_t>(tree.N()));
        for (int k = 0; k < levels; ++k) {
            const std::size_t nodes = c.noise_dependent ? tree.level_size(k) : 1;
            for (std::size_t nu = 0; nu < nodes; ++nu) {
                tree.w_all(k, nu, w);
                const NodeContext ctx{k, tree.time(k), nu, w};
                for (int i = 0; i < c.N; ++i) b_inf = std::max(b_inf, assemble_B(c, grid, ctx, i).inf_norm());
            }
        }
    }
    v.cfl_value = dt * (pb.lambda + pb.beta_bar + b_inf);
    if (!(v.dt_lambda_plus < 1.0)) {
        v.errors.push_back("dt * max(lambda, 0) = " + std::to_string(v.dt_lambda_plus) +
                           " must be < 1 for the implicit step");
    }
    if (!(pb.margin > 0.0)) {
        v.errors.push_back("coercivity margin min(b - 1/2 sum beta_i^2) = " + std::to_string(pb.margin) +
                           " must be > 0");
    }
    if (v.cfl_value > 0.5) {
        v.warnings.push_back("noise CFL quantity dt (max|lambda| + max|beta_bar| + max||B_h||) = " +
                             std::to_string(v.cfl_value) + " exceeds 0.5");
    }
    if (second_fe && pb.beta_at_boundary > 1e-12) {
        v.warnings.push_back("beta does not vanish at the boundary (max " + std::to_string(pb.beta_at_boundary) +
                             "); second-inequality ratios are not covered by the estimate");
    }
    return v;
}

void write_matrix_csv(std::ostream& os, const Tridiagonal& m) {
    os << "row,col,value\n";
    char buf[64];
    auto put = [&](std::size_t r, std::size_t col, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << r + 1 << ',' << col + 1 << ',' << buf << '\n';
    };
    for (std::size_t j = 0; j < m.size(); ++j) {
        if (j > 0) put(j, j - 1, m.lower[j]);
        put(j, j, m.diag[j]);
        if (j + 1 < m.size()) put(j, j + 1, m.upper[j]);
    }
}

}  // namespace bspde
