#include "bspde/noise_tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "bspde/error.hpp"

namespace bspde {

NoiseTree::NoiseTree(int N, int M, double T)
    : N_(N), M_(M), T_(T), dt_(T / M), sqrt_dt_(std::sqrt(T / M)) {
    probabilities_.resize(static_cast<std::size_t>(M + 1));
    for (int k = 0; k <= M; ++k) probabilities_[static_cast<std::size_t>(k)] = std::ldexp(1.0, -N * k);
}

std::shared_ptr<const NoiseTree> NoiseTree::build(int N, int M, double T) {
    if (N < 1 || N > 3) throw GuardError("tree: N must be in {1,2,3}, got " + std::to_string(N));
    if (M < 1) throw GuardError("tree: M must be >= 1, got " + std::to_string(M));
    if (N * M > 24) {
        throw GuardError("tree: N*M = " + std::to_string(N * M) + " exceeds the memory guard 24");
    }
    if (!(T > 0.0) || !std::isfinite(T)) throw GuardError("tree: T must be positive");
    return std::shared_ptr<const NoiseTree>(new NoiseTree(N, M, T));
}

std::shared_ptr<const NoiseTree> NoiseTree::single_path(int M, double T) {
    if (M < 1) throw GuardError("tree: M must be >= 1, got " + std::to_string(M));
    if (!(T > 0.0) || !std::isfinite(T)) throw GuardError("tree: T must be positive");
    return std::shared_ptr<const NoiseTree>(new NoiseTree(0, M, T));
}

std::size_t NoiseTree::total_nodes() const noexcept {
    std::size_t s = 0;
    for (int k = 0; k <= M_; ++k) s += level_size(k);
    return s;
}

double NoiseTree::w(int k, std::size_t node, int i) const noexcept {
    int up = 0;
    for (int m = 0; m < k; ++m) {
        if ((node >> (m * N_ + i)) & 1U) ++up;
    }
    return sqrt_dt_ * (2 * up - k);
}

void NoiseTree::w_all(int k, std::size_t node, std::span<double> out) const noexcept {
    for (int i = 0; i < N_; ++i) out[static_cast<std::size_t>(i)] = w(k, node, i);
}

Slice::Slice(TreePtr tree, const Grid& grid, int level)
    : tree_(std::move(tree)), grid_(grid), level_(level) {
    if (!tree_) throw ShapeError("slice: null tree");
    if (level < 0 || level > tree_->M()) {
        throw ShapeError("slice: level " + std::to_string(level) + " out of range");
    }
    nodes_ = tree_->level_size(level);
    values_.assign(nodes_ * nx(), 0.0);
}

Slice Slice::broadcast(TreePtr tree, const Grid& grid, int level, std::span<const double> v) {
    Slice s(std::move(tree), grid, level);
    if (v.size() != static_cast<std::size_t>(grid.n_x())) throw ShapeError("slice: vector length");
    for (std::size_t nu = 0; nu < s.node_count(); ++nu) std::copy(v.begin(), v.end(), s.at(nu).begin());
    return s;
}

AdaptedField::AdaptedField(TreePtr tree, const Grid& grid, Layout layout)
    : tree_(std::move(tree)), grid_(grid), layout_(layout) {
    if (!tree_) throw ShapeError("field: null tree");
    const int last = last_level();
    offsets_.resize(static_cast<std::size_t>(last + 2));
    std::size_t off = 0;
    for (int k = 0; k <= last; ++k) {
        offsets_[static_cast<std::size_t>(k)] = off;
        off += tree_->level_size(k);
    }
    offsets_[static_cast<std::size_t>(last + 1)] = off;
    data_.assign(off * nx(), 0.0);
}

int AdaptedField::last_level() const noexcept {
    if (!tree_) return -1;
    return layout_ == Layout::Nodal ? tree_->M() : tree_->M() - 1;
}

std::span<double> AdaptedField::level(int k) noexcept {
    const auto a = offsets_[static_cast<std::size_t>(k)] * nx();
    const auto b = offsets_[static_cast<std::size_t>(k) + 1] * nx();
    return {data_.data() + a, b - a};
}

std::span<const double> AdaptedField::level(int k) const noexcept {
    const auto a = offsets_[static_cast<std::size_t>(k)] * nx();
    const auto b = offsets_[static_cast<std::size_t>(k) + 1] * nx();
    return {data_.data() + a, b - a};
}

Slice AdaptedField::slice(int k) const {
    if (k < 0 || k > last_level()) throw ShapeError("field: level " + std::to_string(k) + " out of range");
    Slice s(tree_, grid_, k);
    auto src = level(k);
    std::copy(src.begin(), src.end(), s.values().begin());
    return s;
}

void AdaptedField::set_slice(const Slice& s) {
    if (s.level() < 0 || s.level() > last_level()) throw ShapeError("field: slice level out of range");
    if (!(s.grid() == grid_) || !s.tree()->same_shape(*tree_)) throw ShapeError("field: slice shape");
    auto dst = level(s.level());
    std::copy(s.values().begin(), s.values().end(), dst.begin());
}

void AdaptedField::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void AdaptedField::axpy(double alpha, const AdaptedField& x) {
    if (!same_shape(x)) throw ShapeError("field: axpy shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * x.data_[i];
}

void AdaptedField::scale(double alpha) {
    for (double& v : data_) v *= alpha;
}

bool AdaptedField::same_shape(const AdaptedField& other) const noexcept {
    return tree_ && other.tree_ && tree_->same_shape(*other.tree_) && grid_ == other.grid_ &&
           layout_ == other.layout_;
}

Slice conditional_expectation(const Slice& s) {
    if (s.level() < 1) throw ShapeError("conditional_expectation: slice must be at level >= 1");
    const NoiseTree& tree = *s.tree();
    Slice out(s.tree(), s.grid(), s.level() - 1);
    const std::size_t nb = tree.branching();
    const double p = 1.0 / static_cast<double>(nb);
    for (std::size_t nu = 0; nu < out.node_count(); ++nu) {
        auto dst = out.at(nu);
        for (std::size_t c = 0; c < nb; ++c) {
            auto src = s.at(tree.child(nu, c));
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
        for (double& v : dst) v *= p;
    }
    return out;
}

GridVector expectation(const Slice& s) {
    GridVector m = s.grid().zeros();
    const double p = s.tree()->probability(s.level());
    for (std::size_t nu = 0; nu < s.node_count(); ++nu) {
        auto v = s.at(nu);
        for (std::size_t j = 0; j < m.size(); ++j) m[j] += v[j];
    }
    for (double& v : m) v *= p;
    return m;
}

Slice ito_integral(const AdaptedField& integrand, int j, int t) {
    const NoiseTree& tree = *integrand.tree();
    if (j < 0 || j >= tree.N()) throw ShapeError("ito_integral: component out of range");
    if (t < 0 || t > tree.M() || t - 1 > integrand.last_level()) {
        throw ShapeError("ito_integral: level out of range");
    }
    Slice acc(integrand.tree(), integrand.grid(), 0);
    for (int m = 0; m < t; ++m) {
        Slice next(integrand.tree(), integrand.grid(), m + 1);
        for (std::size_t nu = 0; nu < acc.node_count(); ++nu) {
            auto base = acc.at(nu);
            auto xi = integrand.at(m, nu);
            for (std::size_t c = 0; c < tree.branching(); ++c) {
                const double dw = tree.increment(c, j);
                auto dst = next.at(tree.child(nu, c));
                for (std::size_t g = 0; g < dst.size(); ++g) dst[g] = base[g] + xi[g] * dw;
            }
        }
        acc = std::move(next);
    }
    return acc;
}

MartingaleRepresentation martingale_representation(const TerminalVariable& X) {
    const TreePtr& tp = X.tree();
    const NoiseTree& tree = *tp;
    const int M = tree.M();
    if (X.level() != M) throw ShapeError("martingale_representation: X must live on level M");
    const Grid& grid = X.grid();
    const auto nx = static_cast<std::size_t>(grid.n_x());
    const std::size_t nb = tree.branching();
    const double inv_nb = 1.0 / static_cast<double>(nb);

    MartingaleRepresentation rep;
    rep.gamma.reserve(static_cast<std::size_t>(tree.N()));
    for (int i = 0; i < tree.N(); ++i) rep.gamma.emplace_back(tp, grid, Layout::Interval);
    rep.residual = AdaptedField(tp, grid, Layout::Nodal);

    Slice upper = X;
    for (int k = M - 1; k >= 0; --k) {
        Slice lower = conditional_expectation(upper);
        for (std::size_t nu = 0; nu < lower.node_count(); ++nu) {
            auto mean = lower.at(nu);
            for (int i = 0; i < tree.N(); ++i) {
                auto g = rep.gamma[static_cast<std::size_t>(i)].at(k, nu);
                for (std::size_t c = 0; c < nb; ++c) {
                    const double dw = tree.increment(c, i);
                    auto v = upper.at(tree.child(nu, c));
                    for (std::size_t j = 0; j < nx; ++j) g[j] += v[j] * dw;
                }
                for (double& v : g) v *= inv_nb / tree.dt();
            }
            for (std::size_t c = 0; c < nb; ++c) {
                const std::size_t ch = tree.child(nu, c);
                auto v = upper.at(ch);
                auto r = rep.residual.at(k + 1, ch);
                for (std::size_t j = 0; j < nx; ++j) {
                    double d = v[j] - mean[j];
                    for (int i = 0; i < tree.N(); ++i) {
                        d -= rep.gamma[static_cast<std::size_t>(i)].at(k, nu)[j] * tree.increment(c, i);
                    }
                    r[j] = d;
                }
            }
        }
        upper = std::move(lower);
    }
    rep.mean.assign(upper.at(0).begin(), upper.at(0).end());
    return rep;
}

TerminalVariable reconstruct(const MartingaleRepresentation& rep) {
    const TreePtr& tp = rep.residual.tree();
    const NoiseTree& tree = *tp;
    const Grid& grid = rep.residual.grid();
    Slice acc = Slice::broadcast(tp, grid, 0, rep.mean);
    for (int k = 0; k < tree.M(); ++k) {
        Slice next(tp, grid, k + 1);
        for (std::size_t nu = 0; nu < acc.node_count(); ++nu) {
            auto base = acc.at(nu);
            for (std::size_t c = 0; c < tree.branching(); ++c) {
                const std::size_t ch = tree.child(nu, c);
                auto dst = next.at(ch);
                auto r = rep.residual.at(k + 1, ch);
                for (std::size_t j = 0; j < dst.size(); ++j) {
                    double v = base[j];
                    for (int i = 0; i < tree.N(); ++i) {
                        v += rep.gamma[static_cast<std::size_t>(i)].at(k, nu)[j] * tree.increment(c, i);
                    }
                    dst[j] = v + r[j];
                }
            }
        }
        acc = std::move(next);
    }
    return acc;
}

void write_field_csv(std::ostream& os, const AdaptedField& field) {
    os << "level,node_index,grid_index,value\n";
    char buf[64];
    for (int k = 0; k <= field.last_level(); ++k) {
        const std::size_t n = field.tree()->level_size(k);
        for (std::size_t nu = 0; nu < n; ++nu) {
            auto v = field.at(k, nu);
            for (std::size_t j = 0; j < v.size(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", v[j]);
                os << k << ',' << nu << ',' << (j + 1) << ',' << buf << '\n';
            }
        }
    }
}

}  // namespace bspde
