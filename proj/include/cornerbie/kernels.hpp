#pragma once

// Laplace kernels in two dimensions.
//
// G(x, y) = -log|x - y| / (2 pi). The double-layer kernel is taken with the
// outward normal of the source: K(x, y) = n(x) . grad_x G(x, y). With this
// choice D[1] = -1 inside, -1/2 on edges and 0 outside.

#include <cmath>
#include <numbers>

#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"

namespace cornerbie {

inline constexpr double kInv2Pi = 0.5 / std::numbers::pi;

inline double green_diff(const Vec2& d) {
  const double r2 = d.squaredNorm();
  if (r2 == 0.0) throw Error(ErrorCode::CoincidentPoints, "green at coincident points");
  return -0.25 / std::numbers::pi * std::log(r2);
}

inline double green(const Vec2& x, const Vec2& y) { return green_diff(x - y); }

/// n(x) . grad_x G for d = x - y.
inline double dlp_kernel_diff(const Vec2& n_source, const Vec2& d) {
  const double r2 = d.squaredNorm();
  if (r2 == 0.0) throw Error(ErrorCode::CoincidentPoints, "double layer at coincident points");
  return -kInv2Pi * n_source.dot(d) / r2;
}

/// k(s, t) = K(gamma(s), gamma(t)); exactly 0 when both parameters lie on one edge.
inline double dlp_kernel(const Polygon& P, double s, double t) {
  const ParamPoint x = param_point(P, s), y = param_point(P, t);
  if (x.edge == y.edge) {
    if ((x.point - y.point).squaredNorm() == 0.0) throw Error(ErrorCode::CoincidentPoints, "s == t");
    return 0.0;
  }
  return dlp_kernel_diff(-x.inward_normal, x.point - y.point);
}

/// Normal derivative at gamma(t) of the single layer sourced at gamma(s).
inline double neumann_kernel(const Polygon& P, double s, double t) {
  const ParamPoint x = param_point(P, s), y = param_point(P, t);
  if (x.edge == y.edge) {
    if ((x.point - y.point).squaredNorm() == 0.0) throw Error(ErrorCode::CoincidentPoints, "s == t");
    return 0.0;
  }
  // grad_y G(x, y) = -(y - x) / (2 pi |y - x|^2)
  const Vec2 d = y.point - x.point;
  return -kInv2Pi * (-y.inward_normal).dot(d) / d.squaredNorm();
}

enum class Layer { Single, Double, SingleNormalDerivative };
enum class Side { Interior, Exterior };

/// One-sided boundary limits of layer potentials from the principal value part.
inline double trace_limits(Layer layer, Side side, double boundary_value, double density_value) {
  switch (layer) {
    case Layer::Single:
      return boundary_value;
    case Layer::Double:
      return side == Side::Interior ? boundary_value - 0.5 * density_value : boundary_value + 0.5 * density_value;
    case Layer::SingleNormalDerivative:
      return side == Side::Interior ? boundary_value + 0.5 * density_value : boundary_value - 0.5 * density_value;
  }
  return boundary_value;
}

}  // namespace cornerbie
