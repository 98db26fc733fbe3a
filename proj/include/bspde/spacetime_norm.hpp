#pragma once

#include "bspde/grid.hpp"
#include "bspde/noise_tree.hpp"

namespace bspde {

enum class SpaceTimeKind { X, C };

/// Spatial norm used for the H^k index k in {-1, 0, 1, 2}.
NormKind norm_kind_for(int k);

/// E ||slice||^2_{H^k}, exact tree expectation.
double expected_square(const Slice& s, int k);
double expected_square(const AdaptedField& field, int level, int k);

/// X^k = (sum_{levels k < M} dt E||f_k||^2_{H^k})^{1/2} over the interval
/// levels of the field (a nodal field contributes its left endpoints);
/// C^k = max over all stored levels of (E||f_k||^2_{H^k})^{1/2} (level-wise).
double spacetime_norm(const AdaptedField& field, SpaceTimeKind kind, int k);

/// Y^k = X^k + C^{k-1}. The X part may come from a separate interval
/// representative (forward drift stage) while the C part uses the nodal field.
double y_norm(const AdaptedField& nodal, int k);
double y_norm(const AdaptedField& interval_part, const AdaptedField& nodal, int k);

/// Z^k norm of a slice: (E||s||^2_{H^k})^{1/2}.
double z_norm(const Slice& s, int k);

/// <u, v>_{X^0} = sum_{levels < M} dt E<u_k, v_k>_{H0}.
double inner_x0(const AdaptedField& u, const AdaptedField& v);
/// <u, v>_{Z^0} = E<u, v>_{H0}.
double inner_z0(const Slice& u, const Slice& v);

}  // namespace bspde
