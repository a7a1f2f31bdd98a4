#pragma once

// Polygons, arclength parametrization and panel meshes.
//
// Every node and panel is stored relative to a vertex ("frame"): a node is a
// signed arclength offset from its frame vertex. Offsets < 0 lie on the
// incoming edge, offsets > 0 on the outgoing edge. Differences between points
// of the same frame never touch the vertex coordinates, so panels as short as
// 2^-200 stay representable.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "cornerbie/corner_basis.hpp"
#include "cornerbie/errors.hpp"
#include "cornerbie/quadrature.hpp"

namespace cornerbie {

using Vec2 = Eigen::Vector2d;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

struct Polygon {
  std::vector<Vec2> vertices;       // counterclockwise
  std::vector<double> edge_lengths; // edge c joins vertex c to vertex c+1
  double total_length = 0.0;
  std::vector<double> corner_angles;  // alpha_c, interior angle pi * alpha_c
  std::vector<double> corner_params;  // arclength parameter of vertex c
  std::vector<Vec2> edge_dirs;        // unit tangent of edge c
  std::vector<Vec2> edge_normals;     // unit outward normal of edge c

  int size() const { return static_cast<int>(vertices.size()); }
  int next(int c) const { return (c + 1) % size(); }
  int prev(int c) const { return (c + size() - 1) % size(); }
  int incoming_edge(int c) const { return prev(c); }
  int outgoing_edge(int c) const { return c; }

  double signed_area() const {
    double a = 0.0;
    for (int i = 0; i < size(); ++i) a += cross(vertices[i], vertices[next(i)]);
    return 0.5 * a;
  }
};

namespace detail {

inline bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); };
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  auto on_seg = [](const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
           p.y() <= std::max(a.y(), b.y());
  };
  if (d1 == 0 && on_seg(q1, q2, p1)) return true;
  if (d2 == 0 && on_seg(q1, q2, p2)) return true;
  if (d3 == 0 && on_seg(p1, p2, q1)) return true;
  if (d4 == 0 && on_seg(p1, p2, q2)) return true;
  return false;
}

/// Distance from p to the segment a + t d, t in [0, 1].
inline double point_ray_segment_distance(const Vec2& p, const Vec2& a, const Vec2& d) {
  const double dd = d.squaredNorm();
  const double t = dd > 0.0 ? std::clamp((p - a).dot(d) / dd, 0.0, 1.0) : 0.0;
  return (p - (a + t * d)).norm();
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) { return point_ray_segment_distance(p, a, b - a); }

inline double segment_distance(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  if (segments_intersect(p1, p2, q1, q2)) return 0.0;
  return std::min({point_segment_distance(p1, q1, q2), point_segment_distance(p2, q1, q2),
                   point_segment_distance(q1, p1, p2), point_segment_distance(q2, p1, p2)});
}

}  // namespace detail

/// Builds a counterclockwise polygon; clockwise input is reversed (vertex 0 kept first).
inline Polygon build_polygon(std::vector<Vec2> v) {
  if (v.size() < 3) throw Error(ErrorCode::DegenerateAngle, "polygon needs at least 3 vertices");
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i) {
    if ((v[i] - v[(i + 1) % n]).norm() == 0.0) throw Error(ErrorCode::DegenerateAngle, "consecutive vertices coincide");
  }
  double area = 0.0;
  for (int i = 0; i < n; ++i) area += cross(v[i], v[(i + 1) % n]);
  if (area < 0.0) std::reverse(v.begin() + 1, v.end());

  Polygon P;
  P.vertices = v;
  for (int i = 0; i < n; ++i) {
    const Vec2 d = v[(i + 1) % n] - v[i];
    const double len = d.norm();
    P.edge_lengths.push_back(len);
    P.edge_dirs.push_back(d / len);
    P.edge_normals.push_back(Vec2(d.y(), -d.x()) / len);
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    P.corner_params.push_back(s);
    s += P.edge_lengths[i];
  }
  P.total_length = s;
  for (int c = 0; c < n; ++c) {
    const Vec2 out = P.edge_dirs[c];
    const Vec2 back = -P.edge_dirs[P.prev(c)];
    double th = std::atan2(cross(out, back), out.dot(back));
    if (th < 0.0) th += 2.0 * std::numbers::pi;
    const double alpha = th / std::numbers::pi;
    if (!(alpha > 1e-12 && alpha < 2.0 - 1e-12)) throw Error(ErrorCode::DegenerateAngle, "corner angle outside (0, 2pi)");
    if (std::abs(alpha - 1.0) < 1e-12) throw Error(ErrorCode::DegenerateAngle, "straight angle at vertex " + std::to_string(c));
    P.corner_angles.push_back(alpha);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (detail::segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
        throw Error(ErrorCode::SelfIntersecting, "edges " + std::to_string(i) + " and " + std::to_string(j) + " cross");
      }
    }
  }
  return P;
}

struct ParamPoint {
  Vec2 point;
  Vec2 inward_normal;
  int edge = 0;
};

/// gamma(t) with the inward normal of the containing edge, t in [0, L].
inline ParamPoint param_point(const Polygon& P, double t) {
  const double L = P.total_length;
  if (!(t >= 0.0 && t <= L)) throw Error(ErrorCode::InvalidArgument, "parameter outside [0, L]");
  if (t == L) t = 0.0;
  for (int c = 0; c < P.size(); ++c) {
    if (t == P.corner_params[c]) throw Error(ErrorCode::AtCorner, "parameter at vertex " + std::to_string(c));
  }
  int e = static_cast<int>(std::upper_bound(P.corner_params.begin(), P.corner_params.end(), t) - P.corner_params.begin()) - 1;
  ParamPoint r;
  r.edge = e;
  r.point = P.vertices[e] + (t - P.corner_params[e]) * P.edge_dirs[e];
  r.inward_normal = -P.edge_normals[e];
  return r;
}

/// A point expressed relative to a vertex frame; frame < 0 means global coordinates.
struct FramePoint {
  int frame = -1;
  Vec2 local = Vec2::Zero();
};

inline Vec2 to_global(const Polygon& P, const FramePoint& p) {
  return p.frame < 0 ? p.local : Vec2(P.vertices[p.frame] + p.local);
}

/// a - b, exact in the shared frame when both points use the same vertex frame.
inline Vec2 frame_difference(const Polygon& P, const FramePoint& a, const FramePoint& b) {
  if (a.frame == b.frame) return a.local - b.local;
  Vec2 d = a.local - b.local;
  if (a.frame >= 0) d += P.vertices[a.frame];
  if (b.frame >= 0) d -= P.vertices[b.frame];
  return d;
}

enum class PanelKind { Smooth, Corner };

struct Panel {
  PanelKind kind = PanelKind::Smooth;
  int frame = 0;   // owning vertex (the straddled vertex for corner panels)
  int edge = -1;   // edge of a smooth panel; -1 for corner panels
  double a = 0.0;  // frame-relative arclength offsets, a < b
  double b = 0.0;
  int order = 0;
  std::size_t first = 0;  // index of first node

  double length() const { return b - a; }
};

struct Node {
  int frame = 0;
  double offset = 0.0;  // signed arclength from the frame vertex
  double weight = 0.0;
  int panel = 0;
  int edge = 0;
};

struct Discretization {
  Polygon polygon;
  std::vector<Panel> panels;
  std::vector<Node> nodes;
  std::vector<double> corner_delta;  // corner panel half-length per vertex; 0 when absent

  std::size_t size() const { return nodes.size(); }

  Vec2 direction(int frame, double offset) const {
    return offset < 0.0 ? polygon.edge_dirs[polygon.incoming_edge(frame)] : polygon.edge_dirs[polygon.outgoing_edge(frame)];
  }

  FramePoint point(std::size_t i) const {
    const Node& n = nodes[i];
    return FramePoint{n.frame, n.offset * direction(n.frame, n.offset)};
  }

  Vec2 global(std::size_t i) const { return to_global(polygon, point(i)); }

  const Vec2& normal(std::size_t i) const { return polygon.edge_normals[nodes[i].edge]; }

  /// Global arclength parameter in [0, L).
  double param(std::size_t i) const {
    double s = polygon.corner_params[nodes[i].frame] + nodes[i].offset;
    if (s < 0.0) s += polygon.total_length;
    if (s >= polygon.total_length) s -= polygon.total_length;
    return s;
  }

  std::vector<double> weights() const {
    std::vector<double> w(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) w[i] = nodes[i].weight;
    return w;
  }

  std::vector<double> sqrt_weights() const {
    std::vector<double> w(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) w[i] = std::sqrt(nodes[i].weight);
    return w;
  }

  /// Index of the corner panel of vertex c, if any.
  std::optional<std::size_t> corner_panel(int c) const {
    for (std::size_t p = 0; p < panels.size(); ++p)
      if (panels[p].kind == PanelKind::Corner && panels[p].frame == c) return p;
    return std::nullopt;
  }

  /// Panel adjacent to corner panel p on the given side (-1 left, +1 right).
  std::optional<std::size_t> flank(std::size_t p, int side) const {
    const Panel& cp = panels[p];
    for (std::size_t q = 0; q < panels.size(); ++q) {
      const Panel& o = panels[q];
      if (o.frame != cp.frame || o.kind != PanelKind::Smooth) continue;
      if (side < 0 && o.b == cp.a) return q;
      if (side > 0 && o.a == cp.b) return q;
    }
    return std::nullopt;
  }
};

namespace detail {

inline void push_gl_panel(Discretization& D, int frame, int edge, double a, double b, int order) {
  Panel p;
  p.kind = PanelKind::Smooth;
  p.frame = frame;
  p.edge = edge;
  p.a = a;
  p.b = b;
  p.order = order;
  p.first = D.nodes.size();
  const Rule r = map_rule(legendre_rule(order), a, b);
  for (int j = 0; j < order; ++j) D.nodes.push_back(Node{frame, r.nodes[j], r.weights[j], static_cast<int>(D.panels.size()), edge});
  D.panels.push_back(p);
}

inline void push_corner_panel(Discretization& D, const Polygon& P, int c, const TwoSidedCorner& C) {
  Panel p;
  p.kind = PanelKind::Corner;
  p.frame = c;
  p.a = -C.delta;
  p.b = C.delta;
  p.order = 2 * C.K;
  p.first = D.nodes.size();
  for (int j = 0; j < 2 * C.K; ++j) {
    const int edge = C.t[j] < 0.0 ? P.incoming_edge(c) : P.outgoing_edge(c);
    D.nodes.push_back(Node{c, C.t[j], C.w[j], static_cast<int>(D.panels.size()), edge});
  }
  D.panels.push_back(p);
}

// Breakpoints (distances from the starting vertex) covering [d0, E - d1] so that
// every piece is no longer than its distance to the nearest end, with dyadic
// growth away from both ends.
inline std::vector<double> edge_breaks(double E, double d0, double d1, double max_len) {
  std::vector<double> left{d0}, right{d1};
  while (2.0 * left.back() <= 0.5 * E) left.push_back(2.0 * left.back());
  while (2.0 * right.back() <= 0.5 * E) right.push_back(2.0 * right.back());
  double gl = left.back(), gr = E - right.back();
  std::vector<double> br = left;
  if (gr < gl) {
    // Ladders overlap: drop the last right breakpoint(s) until the gap is non-negative.
    while (!right.empty() && E - right.back() < gl) right.pop_back();
    gr = right.empty() ? E : E - right.back();
  }
  if (gr > gl) {
    int n = 1;
    auto ok = [&](int m) {
      const double h = (gr - gl) / m;
      for (int i = 0; i < m; ++i) {
        const double a = gl + i * h, b = a + h;
        if (h > std::min(a, E - b) || (max_len > 0.0 && h > max_len)) return false;
      }
      return true;
    };
    while (!ok(n) && n < 1000000) ++n;
    for (int i = 1; i < n; ++i) br.push_back(gl + (gr - gl) * i / n);
    br.push_back(gr);
  }
  for (auto it = right.rbegin() + 1; it != right.rend(); ++it) br.push_back(E - *it);
  if (right.size() == 1 && br.back() != E - d1) br.push_back(E - d1);
  br.erase(std::unique(br.begin(), br.end()), br.end());
  return br;
}

}  // namespace detail

struct MeshOptions {
  std::optional<double> delta;       // uniform corner half-length; default fraction of shortest adjacent edge
  double delta_fraction = 1.0 / 16.0;
  int smooth_order = 16;
  double max_panel_length = 0.0;     // 0: no cap beyond the grading rule
};

inline std::vector<double> corner_deltas(const Polygon& P, const MeshOptions& opt) {
  std::vector<double> d(P.size());
  for (int c = 0; c < P.size(); ++c) {
    d[c] = opt.delta ? *opt.delta
                     : opt.delta_fraction * std::min(P.edge_lengths[P.incoming_edge(c)], P.edge_lengths[P.outgoing_edge(c)]);
  }
  return d;
}

/// Panels of one edge between two corner half-lengths d0 (at vertex e) and d1 (at vertex e+1).
inline void push_edge_panels(Discretization& D, const Polygon& P, int e, double d0, double d1, int order, double max_len) {
  const double E = P.edge_lengths[e];
  const std::vector<double> br = detail::edge_breaks(E, d0, d1, max_len);
  const int c0 = e, c1 = P.next(e);
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    const double a = br[i], b = br[i + 1];
    if (a <= E - b) {  // owned by the nearer vertex; ties go to the edge start
      detail::push_gl_panel(D, c0, e, a, b, order);
    } else {
      detail::push_gl_panel(D, c1, e, a - E, b - E, order);
    }
  }
}

/// Mesh with one corner panel of half-length delta_c per vertex and graded smooth panels.
inline Discretization build_mesh(const Polygon& P, const CornerBasis& basis, const MeshOptions& opt = {}) {
  if (opt.smooth_order < 1 || opt.smooth_order > 64) throw Error(ErrorCode::UnsupportedOrder, "smooth order");
  Discretization D;
  D.polygon = P;
  D.corner_delta = corner_deltas(P, opt);
  for (int c = 0; c < P.size(); ++c) {
    const double d = D.corner_delta[c];
    const double emin = std::min(P.edge_lengths[P.incoming_edge(c)], P.edge_lengths[P.outgoing_edge(c)]);
    if (!(d > 0.0) || !(2.0 * d < 0.5 * emin)) {
      throw Error(ErrorCode::MeshInfeasible, "corner half-length " + std::to_string(d) + " too large at vertex " + std::to_string(c));
    }
  }
  for (int c = 0; c < P.size(); ++c) {
    const TwoSidedCorner C = two_sided_extend(basis, D.corner_delta[c]);
    detail::push_corner_panel(D, P, c, C);
    push_edge_panels(D, P, c, D.corner_delta[c], D.corner_delta[P.next(c)], opt.smooth_order, opt.max_panel_length);
  }
  return D;
}

struct MeshReport {
  bool length_rule = true;      // smooth panel length <= distance to nearest corner
  bool separation_rule = true;  // non-adjacent panels at least 2 delta from the corner
  double min_bernstein_ratio = INFINITY;
  double weight_sum_error = 0.0;
};

/// Checks the grading and separation rules panel by panel.
inline MeshReport validate_mesh(const Discretization& D) {
  MeshReport r;
  const Polygon& P = D.polygon;
  double wsum = 0.0;
  for (const Node& n : D.nodes) wsum += n.weight;
  r.weight_sum_error = std::abs(wsum - P.total_length) / P.total_length;
  for (const Panel& p : D.panels) {
    if (p.kind != PanelKind::Smooth) continue;
    const int e = p.edge;
    const double E = P.edge_lengths[e];
    // distances from the edge start
    const double a = p.frame == e ? p.a : p.a + E;
    const double b = p.frame == e ? p.b : p.b + E;
    const double d0 = a, d1 = E - b;
    const double h = b - a;
    const double tol = 1e-12 * E;
    if (h > std::min(d0, d1) + tol) r.length_rule = false;
    const double del0 = D.corner_delta[e], del1 = D.corner_delta[P.next(e)];
    const bool adj0 = std::abs(d0 - del0) <= tol, adj1 = std::abs(d1 - del1) <= tol;
    if ((!adj0 && del0 > 0.0 && d0 + tol < 2.0 * del0) || (!adj1 && del1 > 0.0 && d1 + tol < 2.0 * del1)) r.separation_rule = false;
    const Vec2 s0 = P.vertices[e] + a * P.edge_dirs[e], s1 = P.vertices[e] + b * P.edge_dirs[e];
    double dmin = INFINITY;
    for (int f = 0; f < P.size(); ++f) {
      if (f == e) continue;
      dmin = std::min(dmin, detail::segment_distance(s0, s1, P.vertices[f], P.vertices[P.next(f)]));
    }
    r.min_bernstein_ratio = std::min(r.min_bernstein_ratio, dmin / (0.5 * h));
  }
  return r;
}

}  // namespace cornerbie
