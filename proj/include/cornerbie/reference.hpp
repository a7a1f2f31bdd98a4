#pragma once

// Brute-force ground truth: Gauss-Legendre panels graded dyadically into
// every vertex, [d 2^-k-1, d 2^-k] for k < L plus [0, d 2^-L] on each leg,
// stored corner-relative, and a dense direct solve of the requested equation.

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "cornerbie/assembly.hpp"
#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/quadrature.hpp"
#include "cornerbie/solve.hpp"

namespace cornerbie {

struct ReferenceOptions {
  int levels = 160;                 // default grading depth L_g
  std::vector<int> corner_levels;   // per-vertex override (empty: all `levels`)
  int order = 16;
  std::size_t max_nodes = 20000;
  double max_panel_length = 0.0;
  bool adaptive_near = false;       // adaptive entries for targets within one panel length
};

/// Graded mesh with the same corner half-lengths (and smooth panels beyond them) as the corner-panel mesh.
inline Discretization build_graded_mesh(const Polygon& P, const std::vector<double>& delta, const ReferenceOptions& opt) {
  const int n = P.size();
  if (static_cast<int>(delta.size()) != n) throw Error(ErrorCode::DimensionMismatch, "one half-length per vertex");
  Discretization D;
  D.polygon = P;
  D.corner_delta.assign(n, 0.0);
  std::size_t count = 0;
  for (int c = 0; c < n; ++c) {
    const int L = opt.corner_levels.empty() ? opt.levels : opt.corner_levels[c];
    if (L < 0 || L > 220) throw Error(ErrorCode::InvalidArgument, "grading depth outside [0, 220]");
    count += static_cast<std::size_t>(2 * (L + 1)) * opt.order;
  }
  if (count > opt.max_nodes) throw Error(ErrorCode::TooLarge, "graded mesh would have " + std::to_string(count) + " corner nodes");
  for (int c = 0; c < n; ++c) {
    const int L = opt.corner_levels.empty() ? opt.levels : opt.corner_levels[c];
    const double d = delta[c];
    const int ein = P.incoming_edge(c), eout = P.outgoing_edge(c);
    for (int k = 0; k < L; ++k) detail::push_gl_panel(D, c, ein, -d * std::ldexp(1.0, -k), -d * std::ldexp(1.0, -k - 1), opt.order);
    detail::push_gl_panel(D, c, ein, -d * std::ldexp(1.0, -L), 0.0, opt.order);
    detail::push_gl_panel(D, c, eout, 0.0, d * std::ldexp(1.0, -L), opt.order);
    for (int k = L - 1; k >= 0; --k) detail::push_gl_panel(D, c, eout, d * std::ldexp(1.0, -k - 1), d * std::ldexp(1.0, -k), opt.order);
    push_edge_panels(D, P, c, d, delta[P.next(c)], opt.order, opt.max_panel_length);
  }
  if (D.size() > opt.max_nodes) throw Error(ErrorCode::TooLarge, "graded mesh has " + std::to_string(D.size()) + " nodes");
  return D;
}

/// Reference solver: assembled once, factored once, reusable for many right-hand sides.
class ReferenceSolver {
 public:
  ReferenceSolver(const Polygon& P, const std::vector<double>& delta, BieKind kind, const ReferenceOptions& opt = {})
      : disc_(std::make_unique<Discretization>(build_graded_mesh(P, delta, opt))), kind_(kind) {
    AssemblyOptions ao;
    ao.paranoid = opt.adaptive_near;
    SystemMatrix A = assemble(*disc_, kind, nullptr, ao);
    lu_ = Factorization(A.values, false);
  }

  const Discretization& disc() const { return *disc_; }
  BieKind kind() const { return kind_; }

  DensityVector solve(const Eigen::VectorXd& f) const {
    if (kind_ == BieKind::InteriorNeumann) {
      double s = 0.0;
      for (std::size_t i = 0; i < disc_->size(); ++i) s += std::sqrt(disc_->nodes[i].weight) * f(i);
      if (std::abs(s) > 1e-12 * std::max(1.0, f.norm())) throw Error(ErrorCode::IncompatibleData, "nonzero mean");
    }
    DensityVector d;
    d.kind = kind_;
    d.values = lu_.solve(f);
    return d;
  }

 private:
  std::unique_ptr<Discretization> disc_;
  BieKind kind_;
  Factorization lu_;
};

/// Panel of D in frame c covering [a, b], if any.
inline std::optional<std::size_t> find_panel(const Discretization& D, int frame, double a, double b) {
  const double tol = 1e-13 * std::max(std::abs(a), std::abs(b));
  for (std::size_t p = 0; p < D.panels.size(); ++p) {
    const Panel& P = D.panels[p];
    if (P.frame == frame && std::abs(P.a - a) <= tol && std::abs(P.b - b) <= tol) return p;
  }
  return std::nullopt;
}

/// Normalized Legendre coefficients of the (unscaled) density on a smooth panel.
inline std::vector<double> panel_legendre(const Discretization& D, const DensityVector& s, std::size_t p) {
  const Panel& P = D.panels[p];
  std::vector<double> v(P.order);
  for (int j = 0; j < P.order; ++j) v[j] = s.values(P.first + j) / std::sqrt(D.nodes[P.first + j].weight);
  return legendre_coefficients(v, P.length());
}

}  // namespace cornerbie
