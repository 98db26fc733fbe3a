#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "bspde/coefficients.hpp"
#include "bspde/grid.hpp"
#include "bspde/noise_tree.hpp"
#include "bspde/tridiagonal.hpp"

namespace bspde {

/// A_h v = (b v)'' - (f v)' + lambda v with b, f, lambda at the nodes:
///   row j: [b_{j-1}/h^2 + f_{j-1}/(2h),  -2 b_j/h^2 + lambda_j,  b_{j+1}/h^2 - f_{j+1}/(2h)]
Tridiagonal assemble_A(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx);
/// (A_h)^T.
Tridiagonal assemble_A_star(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx);
/// Direct non-divergence stencil b_j D2 v + f_j D0 v + lambda_j v.
Tridiagonal assemble_A_star_direct(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx);

/// B_i v = -(beta_i v)' + beta_bar_i v, beta at edge midpoints:
///   row j: [beta_{j-1/2}/(2h),  -(beta_{j+1/2} - beta_{j-1/2})/(2h) + beta_bar_j,  -beta_{j+1/2}/(2h)]
Tridiagonal assemble_B(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx, int i);
/// (B_{i,h})^T.
Tridiagonal assemble_B_star(const ModelCoefficients& c, const Grid& grid, const NodeContext& ctx, int i);

/// Operators frozen on one interval [t_k, t_{k+1}) at one node.
struct OperatorSlot {
    Tridiagonal A;
    Tridiagonal step;       ///< I - dt A_h
    Tridiagonal step_star;  ///< I - dt (A*)_h, built from the assembled A*
    std::vector<Tridiagonal> B;
};

/// Per-(interval, node) operators, assembled lazily. Coefficients that do not
/// depend on time or noise share one slot across levels or nodes. Not safe for
/// concurrent use.
class OperatorStack {
public:
    OperatorStack(std::shared_ptr<const ModelCoefficients> coeffs, const Grid& grid, TreePtr tree,
                  std::size_t cache_limit_bytes = std::size_t{512} << 20);

    const OperatorSlot& at(int k, std::size_t node) const;

    const ModelCoefficients& coefficients() const noexcept { return *coeffs_; }
    const std::shared_ptr<const ModelCoefficients>& coefficients_ptr() const noexcept { return coeffs_; }
    const Grid& grid() const noexcept { return grid_; }
    const NoiseTree& tree() const noexcept { return *tree_; }
    const TreePtr& tree_ptr() const noexcept { return tree_; }
    int N() const noexcept { return coeffs_->N; }

    NodeContext context(int k, std::size_t node, std::vector<double>& w_scratch) const;

private:
    OperatorSlot assemble(int k, std::size_t node) const;
    std::size_t key(int k, std::size_t node) const;

    std::shared_ptr<const ModelCoefficients> coeffs_;
    Grid grid_;
    TreePtr tree_;
    bool cached_ = true;
    std::vector<std::size_t> level_offset_;
    mutable std::vector<std::unique_ptr<OperatorSlot>> cache_;
    mutable OperatorSlot scratch_;
};

struct SchemeValidation {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    double cfl_value = 0.0;    ///< dt (max|lambda| + max|beta_bar| + max ||B_h||_inf)
    double dt_lambda_plus = 0.0;
    double margin = 0.0;
    bool ok() const noexcept { return errors.empty(); }
};

/// Up-front checks for the implicit step: dt * max lambda^+ < 1 and
/// coercivity margin > 0 are errors; the CFL-type quantity above 0.5 is a
/// warning, as is nonzero beta at the boundary when `second_fe` is set.
SchemeValidation validate_scheme(const ModelCoefficients& c, const Grid& grid, const NoiseTree& tree,
                                 bool second_fe = false);

/// CSV triplets: row,col,value (1-based interior indices).
void write_matrix_csv(std::ostream& os, const Tridiagonal& m);

}  // namespace bspde
