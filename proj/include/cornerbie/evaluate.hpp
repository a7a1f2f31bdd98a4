#pragma once

// Potential evaluation off the boundary.
//
// A target is near a panel when its distance to the panel chord is at most
// the chord length; otherwise the panel's node rule is used directly. Near
// smooth panels are integrated adaptively against the Legendre interpolant.
// Near corner panels: Dirichlet densities are interpolated through U; weak
// densities only allow the plain rule, and only for targets at least two
// corner half-widths from the vertex.

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cornerbie/assembly.hpp"
#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/panel_integrals.hpp"
#include "cornerbie/parallel.hpp"
#include "cornerbie/solve.hpp"

namespace cornerbie {

enum class TargetClass { Far, NearSmoothPanel, NearCorner };

inline std::string to_string(TargetClass c) {
  switch (c) {
    case TargetClass::Far: return "far";
    case TargetClass::NearSmoothPanel: return "near_smooth";
    case TargetClass::NearCorner: return "near_corner";
  }
  return "?";
}

struct Classification {
  TargetClass cls = TargetClass::Far;
  int panel = -1;   // nearest near panel
  int corner = -1;  // for NearCorner
  double r = 0.0;   // distance to that vertex
};

inline Classification classify(const Discretization& D, const FramePoint& y) {
  Classification c;
  double best = INFINITY;
  for (std::size_t p = 0; p < D.panels.size(); ++p) {
    const Panel& P = D.panels[p];
    const double d = panel_distance(D, p, y);
    if (d > P.length()) continue;  // ties count as near
    if (P.kind == PanelKind::Corner) {
      const double r = frame_difference(D.polygon, y, FramePoint{P.frame, Vec2::Zero()}).norm();
      if (c.cls != TargetClass::NearCorner || r < c.r) {
        c.cls = TargetClass::NearCorner;
        c.corner = P.frame;
        c.panel = static_cast<int>(p);
        c.r = r;
      }
    } else if (c.cls != TargetClass::NearCorner && d < best) {
      best = d;
      c.cls = TargetClass::NearSmoothPanel;
      c.panel = static_cast<int>(p);
    }
  }
  return c;
}

struct EvalOptions {
  AdaptiveOptions adaptive = panel_adaptive_options();
};

/// Layer used to represent the solution of each equation.
inline KernelKind representation_kernel(BieKind k) { return is_dirichlet(k) ? KernelKind::Double : KernelKind::Single; }

/// u(y) from the density's representation: D[s] (+ int s outside) or S[s].
inline double eval_point(const Discretization& D, const DensityVector& s, const FramePoint& y, const CornerContext* cc,
                         const EvalOptions& opt = {}) {
  const KernelKind kind = representation_kernel(s.kind);
  const Polygon& G = D.polygon;
  const PanelTarget tgt{y, -1, Vec2::Zero()};
  double u = 0.0;
  for (std::size_t p = 0; p < D.panels.size(); ++p) {
    const Panel& P = D.panels[p];
    const double d = panel_distance(D, p, y);
    bool plain = d > P.length();
    if (!plain && P.kind == PanelKind::Corner && s.weak_only) {
      const double r = frame_difference(G, y, FramePoint{P.frame, Vec2::Zero()}).norm();
      const double h = 0.5 * P.length();
      if (r < 2.0 * h) {
        throw Error(ErrorCode::UnresolvedCorner, "target at distance " + std::to_string(r) + " from vertex " +
                                                      std::to_string(P.frame) + " needs a resolve to radius " +
                                                      std::to_string(r));
      }
      plain = true;
    }
    if (plain) {
      for (int j = 0; j < P.order; ++j) {
        const std::size_t i = P.first + j;
        const FramePoint x = D.point(i);
        const Vec2 dx = frame_difference(G, x, y);
        const double k = detail::kernel_value(kind, dx, D.normal(i), Vec2::Zero());
        u += k * std::sqrt(D.nodes[i].weight) * s.values(i);
      }
    } else {
      const std::vector<double> v = panel_weights(D, p, tgt, kind, cc, opt.adaptive);
      for (int j = 0; j < P.order; ++j) u += v[j] * s.values(P.first + j);
    }
  }
  if (s.kind == BieKind::ExteriorDirichlet) {
    for (std::size_t i = 0; i < D.size(); ++i) u += std::sqrt(D.nodes[i].weight) * s.values(i);
  }
  return u;
}

inline std::vector<double> eval_potential(const Discretization& D, const DensityVector& s, const std::vector<FramePoint>& targets,
                                          const CornerContext* cc, const EvalOptions& opt = {}) {
  if (static_cast<std::size_t>(s.values.size()) != D.size()) throw Error(ErrorCode::DimensionMismatch, "density length");
  std::vector<double> out(targets.size());
  parallel_for(targets.size(), [&](std::size_t k) { out[k] = eval_point(D, s, targets[k], cc, opt); });
  return out;
}

struct PolarGridSpec {
  int corner = 0;
  double r_min = 1e-12;
  double r_max = 1e-2;
  int n_r = 10;
  int n_theta = 8;
  bool interior = true;  // sector inside the polygon, else the exterior sector
};

/// Tensor-product polar grid around a vertex, in that vertex's frame:
/// exponential radii from r_min to r_max, uniform angles strictly inside the sector.
inline std::vector<FramePoint> polar_grid(const Polygon& P, const PolarGridSpec& g) {
  const int c = g.corner;
  const Vec2 e = P.edge_dirs[P.outgoing_edge(c)];
  const double phi0 = std::atan2(e.y(), e.x());
  const double open = std::numbers::pi * P.corner_angles[c];
  const double start = g.interior ? phi0 : phi0 + open;
  const double span = g.interior ? open : 2.0 * std::numbers::pi - open;
  std::vector<FramePoint> pts;
  for (int i = 0; i < g.n_r; ++i) {
    const double r = g.n_r == 1 ? g.r_min : g.r_min * std::pow(g.r_max / g.r_min, static_cast<double>(i) / (g.n_r - 1));
    for (int k = 0; k < g.n_theta; ++k) {
      const double th = start + span * (k + 0.5) / g.n_theta;
      pts.push_back(FramePoint{c, Vec2(r * std::cos(th), r * std::sin(th))});
    }
  }
  return pts;
}

/// P_mk = <x_k, sigma_m> with sigma_m the exterior Neumann density for data n_m.
inline Eigen::Matrix2d polarization_tensor(const Discretization& D, const SystemMatrix& A_intd) {
  if (A_intd.kind != BieKind::InteriorDirichlet) throw Error(ErrorCode::InvalidArgument, "polarization needs the interior Dirichlet matrix");
  const Factorization lu(A_intd.values, true);
  Eigen::Matrix2d P;
  for (int m = 0; m < 2; ++m) {
    const Eigen::VectorXd f = sample_data(D, [m](const Vec2&, const Vec2& n) { return n(m); });
    DensityVector s;
    s.kind = BieKind::ExteriorNeumann;
    s.weak_only = true;
    s.values = lu.solve(f);
    for (int k = 0; k < 2; ++k) P(m, k) = weak_inner_product(D, s, [k](const Vec2& x) { return x(k); });
  }
  return P;
}

inline void write_potential_csv(const std::string& path, const Polygon& P, const std::vector<FramePoint>& targets,
                                const std::vector<Classification>& cls, const std::vector<double>& u,
                                const std::vector<double>* ref = nullptr) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << std::setprecision(17);
  out << "x,y,class,u" << (ref ? ",u_ref,abs_err" : "") << '\n';
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const Vec2 g = to_global(P, targets[k]);
    out << g.x() << ',' << g.y() << ',' << to_string(cls[k].cls) << ',' << u[k];
    if (ref) out << ',' << (*ref)[k] << ',' << std::abs(u[k] - (*ref)[k]);
    out << '\n';
  }
}

}  // namespace cornerbie
