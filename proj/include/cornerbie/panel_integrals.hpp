#pragma once

// Accurate integration of a kernel against the interpolant of the density on
// one panel, returned as weights on the panel's sqrt(w)-scaled node values.
// Smooth panels interpolate with Legendre-Lagrange polynomials, corner panels
// with the two-sided singular functions.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cornerbie/corner_basis.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/kernels.hpp"
#include "cornerbie/quadrature.hpp"

namespace cornerbie {

enum class KernelKind {
  Single,        // G(x, y)
  Double,        // n(x) . grad_x G(x, y), x on the panel
  TargetNormal,  // n(y) . grad_y G(x, y)
};

struct PanelTarget {
  FramePoint point;
  int edge = -1;  // edge containing the target, -1 off the boundary
  Vec2 normal = Vec2::Zero();
};

/// Shared corner-panel data. U is scale invariant, so one unit-panel copy serves every corner.
struct CornerContext {
  const CornerBasis* basis = nullptr;
  TwoSidedCorner unit;
  Eigen::PartialPivLU<Eigen::MatrixXd> U_lu;

  explicit CornerContext(const CornerBasis& B) : basis(&B), unit(two_sided_extend(B, 1.0)), U_lu(unit.U) {}
};

namespace detail {

inline double kernel_value(KernelKind kind, const Vec2& d, const Vec2& n_src, const Vec2& n_tgt) {
  // d = x - y
  switch (kind) {
    case KernelKind::Single:
      return green_diff(d);
    case KernelKind::Double:
      return dlp_kernel_diff(n_src, d);
    case KernelKind::TargetNormal:
      return dlp_kernel_diff(n_tgt, -d);
  }
  return 0.0;
}

// Kernels for x = vertex + u dir on a straight edge, in edge coordinates:
// x - y = s dir + nb nrm with s = u + tb. Forming x and then subtracting adds
// rounding noise of relative size eps / dist at every node, which an adaptive
// rule cannot integrate away for targets very near the edge; here
// nu(x).(x - y) = nb is a constant. Callers integrate in s (or a variable
// centred on the foot of the target) so that nodes are dense where the kernel
// peaks.
struct EdgeOffset {
  double tb = 0.0, nb = 0.0;
  double tdir = 0.0, tnrm = 0.0;  // target normal against dir and nrm
  EdgeOffset(const Polygon& G, int frame, const Vec2& dir, const Vec2& nrm, const PanelTarget& y) {
    const Vec2 base = frame_difference(G, FramePoint{frame, Vec2::Zero()}, y.point);
    tb = dir.dot(base);
    nb = nrm.dot(base);
    tdir = y.normal.dot(dir);
    tnrm = y.normal.dot(nrm);
  }
  double kernel(KernelKind kind, double s) const {
    const double r2 = s * s + nb * nb;
    if (r2 == 0.0) throw Error(ErrorCode::CoincidentPoints, "kernel at coincident points");
    switch (kind) {
      case KernelKind::Single:
        return -0.25 / std::numbers::pi * std::log(r2);
      case KernelKind::Double:
        return -kInv2Pi * nb / r2;
      case KernelKind::TargetNormal:
        return kInv2Pi * (s * tdir + nb * tnrm) / r2;
    }
    return 0.0;
  }
};

inline bool kernel_vanishes(KernelKind kind, int src_edge, const PanelTarget& y) {
  return kind != KernelKind::Single && y.edge >= 0 && y.edge == src_edge;
}

}  // namespace detail

inline AdaptiveOptions panel_adaptive_options() {
  AdaptiveOptions o;
  o.abs_tol = 1e-17;
  o.rel_tol = 1e-15;
  o.order = 16;
  o.max_depth = 200;
  return o;
}

/// Weights v over the nodes of panel p with int_p K(x, y) sigma(x) ds_x ~ sum_j v_j sigma_j.
inline std::vector<double> panel_weights(const Discretization& D, std::size_t p, const PanelTarget& y, KernelKind kind,
                                         const CornerContext* cc, const AdaptiveOptions& opt = panel_adaptive_options()) {
  const Panel& P = D.panels[p];
  const int frame = P.frame;
  const Polygon& G = D.polygon;
  if (P.kind == PanelKind::Smooth) {
    const int n = P.order;
    std::vector<double> out(n, 0.0);
    if (detail::kernel_vanishes(kind, P.edge, y)) return out;
    const Vec2 dir = D.direction(frame, 0.5 * (P.a + P.b));
    const Vec2& nrm = G.edge_normals[P.edge];
    std::vector<double> lag(n);
    // The two vertex frames of an edge disagree about its midpoint by rounding,
    // which shows up as an O(eps / dist) error for targets near the switch. All
    // panels of the edge are therefore taken in the frame of the vertex nearer
    // the target's foot, where the switch is exact (br - E + E == br for br >= E / 2).
    const int e = P.edge, e1 = G.next(e);
    const double E = G.edge_lengths[e];
    const double foot = -dir.dot(frame_difference(G, FramePoint{e, Vec2::Zero()}, y.point));
    const int ref = foot <= 0.5 * E ? e : e1;
    const double shift = ref == frame ? 0.0 : (frame == e ? -E : E);
    const detail::EdgeOffset off(G, ref, dir, nrm, y);
    auto f = [&](double s, std::span<double> vals) {
      const double k = off.kernel(kind, s);
      const double u = (s - off.tb) - shift;
      legendre_lagrange_basis(n, (2.0 * u - P.a - P.b) / (P.b - P.a), lag);
      for (int j = 0; j < n; ++j) vals[j] = k * lag[j];
    };
    const AdaptiveResult r = adaptive_integrate_vec(f, n, (P.a + shift) + off.tb, (P.b + shift) + off.tb, opt);
    for (int j = 0; j < n; ++j) out[j] = r.value[j] / std::sqrt(D.nodes[P.first + j].weight);
    return out;
  }
  if (cc == nullptr) throw Error(ErrorCode::InvalidArgument, "corner panel integration needs the corner basis");
  const CornerBasis& B = *cc->basis;
  const int K = B.K;
  const double delta = P.b;
  const double sc = 1.0 / std::sqrt(2.0 * delta);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * K);
  std::vector<double> phi(K + 1);
  for (int side : {-1, 1}) {
    const int edge = side < 0 ? G.incoming_edge(frame) : G.outgoing_edge(frame);
    if (detail::kernel_vanishes(kind, edge, y)) continue;
    const Vec2 dir = side < 0 ? G.edge_dirs[G.incoming_edge(frame)] : G.edge_dirs[G.outgoing_edge(frame)];
    const Vec2& nrm = G.edge_normals[edge];
    const detail::EdgeOffset off(G, frame, dir, nrm, y);
    // u in (0, 1) is the offset side * u * delta; the foot of the target sits at u0.
    // Pieces well away from 0 are integrated in t = u - u0, the rest in u.
    const double u0 = -side * off.tb / delta;
    auto add = [&](double u, double s, std::span<double> vals) {
      const double k = off.kernel(kind, s);
      B.eval_all(u, phi);
      for (int m = 0; m < K; ++m) {
        vals[m] = k * phi[m];
        vals[K + m] = side * k * phi[m];
      }
    };
    auto in_u = [&](double u, std::span<double> vals) { add(u, side * u * delta + off.tb, vals); };
    auto in_t = [&](double t, std::span<double> vals) { add(u0 + t, side * t * delta, vals); };
    const auto& br = B.grid.breaks;
    for (std::size_t q = 0; q + 1 < br.size(); ++q) {
      const bool centred = u0 > 0.0 && br[q] >= 0.25 * u0;
      const AdaptiveResult r = centred ? adaptive_integrate_vec(in_t, 2 * K, br[q] - u0, br[q + 1] - u0, opt)
                                       : adaptive_integrate_vec(in_u, 2 * K, br[q], br[q + 1], opt);
      for (int m = 0; m < 2 * K; ++m) b(m) += r.value[m];
    }
  }
  b *= delta * sc;  // du -> dt and the two-sided normalization
  // int K sigma = b . c with c = U^-T sigma_hat, so v = U^-1 b (U is the same on every scale).
  const Eigen::VectorXd v = cc->U_lu.solve(b);
  return std::vector<double>(v.data(), v.data() + v.size());
}

/// Euclidean distance from a point to the chord of panel p.
inline double panel_distance(const Discretization& D, std::size_t p, const FramePoint& y) {
  const Panel& P = D.panels[p];
  const FramePoint a{P.frame, P.a * D.direction(P.frame, P.a)};
  const FramePoint b{P.frame, P.b * D.direction(P.frame, P.b)};
  // segment vectors are taken in the panel frame so tiny panels far from y keep their extent
  if (P.kind == PanelKind::Corner) {
    const FramePoint v{P.frame, Vec2::Zero()};
    const Vec2 vy = frame_difference(D.polygon, v, y);
    return std::min(detail::point_ray_segment_distance(Vec2::Zero(), vy, a.local),
                    detail::point_ray_segment_distance(Vec2::Zero(), vy, b.local));
  }
  return detail::point_ray_segment_distance(Vec2::Zero(), frame_difference(D.polygon, a, y), b.local - a.local);
}

}  // namespace cornerbie
