#include "bspde/spacetime_norm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bspde/error.hpp"

namespace bspde {

NormKind norm_kind_for(int k) {
    switch (k) {
        case -1: return NormKind::Hminus1;
        case 0: return NormKind::H0;
        case 1: return NormKind::H1;
        case 2: return NormKind::H2;
        default: throw GuardError("norm index must be in {-1,0,1,2}, got " + std::to_string(k));
    }
}

namespace {

double level_expected_square(const Grid& grid, const NoiseTree& tree, std::span<const double> values,
                             int level, int k) {
    const NormKind kind = norm_kind_for(k);
    const auto nx = static_cast<std::size_t>(grid.n_x());
    const std::size_t n = tree.level_size(level);
    double s = 0.0;
    for (std::size_t nu = 0; nu < n; ++nu) {
        const double v = discrete_norm(grid, values.subspan(nu * nx, nx), kind);
        s += v * v;
    }
    return s * tree.probability(level);
}

int interval_levels(const AdaptedField& field) {
    return std::min(field.last_level(), field.tree()->M() - 1);
}

}  // namespace

double expected_square(const Slice& s, int k) {
    return level_expected_square(s.grid(), *s.tree(), s.values(), s.level(), k);
}

double expected_square(const AdaptedField& field, int level, int k) {
    return level_expected_square(field.grid(), *field.tree(), field.level(level), level, k);
}

double spacetime_norm(const AdaptedField& field, SpaceTimeKind kind, int k) {
    if (field.empty()) throw ShapeError("spacetime_norm: empty field");
    const NoiseTree& tree = *field.tree();
    if (kind == SpaceTimeKind::X) {
        double s = 0.0;
        for (int l = 0; l <= interval_levels(field); ++l) s += tree.dt() * expected_square(field, l, k);
        return std::sqrt(s);
    }
    double m = 0.0;
    for (int l = 0; l <= field.last_level(); ++l) m = std::max(m, expected_square(field, l, k));
    return std::sqrt(m);
}

double y_norm(const AdaptedField& nodal, int k) { return y_norm(nodal, nodal, k); }

double y_norm(const AdaptedField& interval_part, const AdaptedField& nodal, int k) {
    return spacetime_norm(interval_part, SpaceTimeKind::X, k) +
           spacetime_norm(nodal, SpaceTimeKind::C, k - 1);
}

double z_norm(const Slice& s, int k) { return std::sqrt(expected_square(s, k)); }

double inner_x0(const AdaptedField& u, const AdaptedField& v) {
    if (!u.tree()->same_shape(*v.tree()) || !(u.grid() == v.grid())) {
        throw ShapeError("inner_x0: shape mismatch");
    }
    const NoiseTree& tree = *u.tree();
    const int last = std::min(interval_levels(u), interval_levels(v));
    double s = 0.0;
    for (int l = 0; l <= last; ++l) {
        auto a = u.level(l);
        auto b = v.level(l);
        double t = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) t += a[i] * b[i];
        s += tree.dt() * tree.probability(l) * u.grid().h() * t;
    }
    return s;
}

double inner_z0(const Slice& u, const Slice& v) {
    if (u.level() != v.level() || !(u.grid() == v.grid())) throw ShapeError("inner_z0: shape mismatch");
    auto a = u.values();
    auto b = v.values();
    double t = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) t += a[i] * b[i];
    return u.tree()->probability(u.level()) * u.grid().h() * t;
}

}  // namespace bspde
