#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "bspde/grid.hpp"

namespace bspde {

/// Full 2^N-ary tree of depth M for the N-dimensional Wiener process with
/// Rademacher increments +-sqrt(dt). The node at level k+1 reached from node
/// nu by child word c has index nu * 2^N + c; bit i of c set means
/// dw_i = +sqrt(dt).
class NoiseTree {
public:
    /// N in {1,2,3}, M >= 1, N*M <= 24.
    static std::shared_ptr<const NoiseTree> build(int N, int M, double T);
    /// Degenerate tree without noise (N = 0): one node per level. Used for
    /// deterministic solves.
    static std::shared_ptr<const NoiseTree> single_path(int M, double T);

    int N() const noexcept { return N_; }
    int M() const noexcept { return M_; }
    double T() const noexcept { return T_; }
    double dt() const noexcept { return dt_; }
    double sqrt_dt() const noexcept { return sqrt_dt_; }
    double time(int k) const noexcept { return k * dt_; }

    std::size_t branching() const noexcept { return std::size_t{1} << N_; }
    std::size_t level_size(int k) const noexcept { return std::size_t{1} << (N_ * k); }
    std::size_t total_nodes() const noexcept;
    /// Probability of a single level-k node, 2^{-Nk}.
    double probability(int k) const noexcept { return probabilities_[static_cast<std::size_t>(k)]; }

    std::size_t child(std::size_t node, std::size_t c) const noexcept { return (node << N_) | c; }
    std::size_t parent(std::size_t node) const noexcept { return node >> N_; }

    /// Increment dw_i^c attached to child word c.
    double increment(std::size_t c, int i) const noexcept {
        return ((c >> i) & 1U) ? sqrt_dt_ : -sqrt_dt_;
    }

    /// w_i(t_k) at the level-k node.
    double w(int k, std::size_t node, int i) const noexcept;
    /// All components of w(t_k) at the node, written to out (size N).
    void w_all(int k, std::size_t node, std::span<double> out) const noexcept;

    bool same_shape(const NoiseTree& other) const noexcept {
        return N_ == other.N_ && M_ == other.M_ && T_ == other.T_;
    }

private:
    NoiseTree(int N, int M, double T);

    int N_;
    int M_;
    double T_;
    double dt_;
    double sqrt_dt_;
    std::vector<double> probabilities_;
};

using TreePtr = std::shared_ptr<const NoiseTree>;

/// Grid vectors for every node of one tree level.
class Slice {
public:
    Slice() = default;
    Slice(TreePtr tree, const Grid& grid, int level);

    /// Deterministic slice: every node carries v.
    static Slice broadcast(TreePtr tree, const Grid& grid, int level, std::span<const double> v);

    int level() const noexcept { return level_; }
    std::size_t node_count() const noexcept { return nodes_; }
    const Grid& grid() const noexcept { return grid_; }
    const TreePtr& tree() const noexcept { return tree_; }

    std::span<double> at(std::size_t node) noexcept {
        return {values_.data() + node * nx(), nx()};
    }
    std::span<const double> at(std::size_t node) const noexcept {
        return {values_.data() + node * nx(), nx()};
    }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::size_t nx() const noexcept { return static_cast<std::size_t>(grid_.n_x()); }

    TreePtr tree_;
    Grid grid_ = Grid::build(0.0, 1.0, 2);
    int level_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> values_;
};

/// Terminal random variable: a level-M slice.
using TerminalVariable = Slice;

enum class Layout {
    Nodal,     ///< levels 0..M (values at time nodes t_k)
    Interval,  ///< levels 0..M-1 (values on [t_k, t_{k+1}), F_{t_k}-measurable)
};

/// Map (level, node) -> grid vector. Adaptedness is structural: a value is
/// indexed by the node, i.e. by the increment word up to its level.
class AdaptedField {
public:
    AdaptedField() = default;
    AdaptedField(TreePtr tree, const Grid& grid, Layout layout);

    const TreePtr& tree() const noexcept { return tree_; }
    const Grid& grid() const noexcept { return grid_; }
    Layout layout() const noexcept { return layout_; }
    int last_level() const noexcept;
    bool empty() const noexcept { return !tree_; }

    std::span<double> at(int k, std::size_t node) noexcept {
        return {data_.data() + (offsets_[static_cast<std::size_t>(k)] + node) * nx(), nx()};
    }
    std::span<const double> at(int k, std::size_t node) const noexcept {
        return {data_.data() + (offsets_[static_cast<std::size_t>(k)] + node) * nx(), nx()};
    }
    /// All values of level k, node-major.
    std::span<double> level(int k) noexcept;
    std::span<const double> level(int k) const noexcept;

    Slice slice(int k) const;
    void set_slice(const Slice& s);

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    void fill(double v);
    void axpy(double alpha, const AdaptedField& x);
    void scale(double alpha);
    bool same_shape(const AdaptedField& other) const noexcept;

private:
    std::size_t nx() const noexcept { return static_cast<std::size_t>(grid_.n_x()); }

    TreePtr tree_;
    Grid grid_ = Grid::build(0.0, 1.0, 2);
    Layout layout_ = Layout::Nodal;
    std::vector<std::size_t> offsets_;
    std::vector<double> data_;
};

/// E[X | F_{t_k}] for a level-(k+1) slice: average over the 2^N children.
Slice conditional_expectation(const Slice& s);

/// Exact expectation over all nodes of the slice level.
GridVector expectation(const Slice& s);

/// At each level-t node: sum_{m<t} xi(m, ancestor) dw_j^{(m)} along the path.
/// The integrand is read at levels 0..t-1 (either layout).
Slice ito_integral(const AdaptedField& integrand, int j, int t);

struct MartingaleRepresentation {
    GridVector mean;
    std::vector<AdaptedField> gamma;  ///< per component, Interval layout
    AdaptedField residual;            ///< Nodal layout; level 0 is zero
};

/// Clark-type decomposition on the tree. gamma_i(k, nu) = E[X dw_i^{(k)} | nu] / dt
/// applied to the martingale X_k = E[X | F_{t_k}]; residual at child = the
/// martingale increment minus sum_i gamma_i dw_i.
MartingaleRepresentation martingale_representation(const TerminalVariable& X);

/// mean + sum_i ito_integral(gamma_i) + accumulated residuals, evaluated at the leaves.
TerminalVariable reconstruct(const MartingaleRepresentation& rep);

/// CSV: level,node_index,grid_index,value
void write_field_csv(std::ostream& os, const AdaptedField& field);

}  // namespace bspde
