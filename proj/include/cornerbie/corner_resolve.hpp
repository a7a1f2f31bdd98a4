#pragma once

// Pointwise recovery of a weak (adjoint) density near one corner.
//
// Level j works on [-2d_j, 2d_j], d_j = d 2^-j, in the corner's wedge frame.
// The old local discretization is flank | corner panel (-d_j, d_j) | flank.
// The new one is K | I_j | L_j | J_j | Q with K, Q the old flanks,
// I_j = [-d_j, -d_j/2], J_j = [d_j/2, d_j] Gauss-Legendre panels and L_j the
// corner panel of half-width d_j/2. The right-hand side f - h (h: field of
// the rest of the boundary) is A_old^T sigma_old on the old nodes; on I, L, J
// it is interpolated from the old corner panel through U. Solving
// A_new^T sigma = f~ makes sigma interpolable on I_j, J_j, which are archived.

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cornerbie/assembly.hpp"
#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/panel_integrals.hpp"
#include "cornerbie/singular_quadrature.hpp"
#include "cornerbie/solve.hpp"

namespace cornerbie {

struct ArchivedPanel {
  int level = 0;   // -1 for the level-0 flanks
  double a = 0.0;  // corner-relative offsets
  double b = 0.0;
  std::vector<double> t, w, sigma;  // nodes, weights, sqrt(w)-scaled density
};

struct ResolveLogRow {
  int level = 0;
  double delta_j = 0.0;
  int local_n = 0;
  double residual = 0.0;
  double overlap_mismatch = 0.0;  // L2 difference of flank densities vs the archive they overlap
  std::optional<double> reference_error;
};

/// Node layout of one local problem, offsets in the wedge frame.
struct LocalLayout {
  double h = 1.0;  // d_j
  int M = 16;
  int K = 0;
  std::vector<double> t, w;  // order: K(M) I(M) L(2K) J(M) Q(M)

  std::size_t size() const { return t.size(); }
  std::size_t begin_I() const { return M; }
  std::size_t begin_L() const { return 2 * M; }
  std::size_t begin_J() const { return 2 * M + 2 * K; }
  std::size_t begin_Q() const { return 3 * M + 2 * K; }
};

inline LocalLayout local_layout(const TwoSidedCorner& unit, double h, int M) {
  LocalLayout L;
  L.h = h;
  L.M = M;
  L.K = unit.K;
  auto gl = [&](double a, double b) {
    const Rule r = map_rule(legendre_rule(M), a, b);
    L.t.insert(L.t.end(), r.nodes.begin(), r.nodes.end());
    L.w.insert(L.w.end(), r.weights.begin(), r.weights.end());
  };
  gl(-2.0 * h, -h);
  gl(-h, -0.5 * h);
  for (int j = 0; j < 2 * unit.K; ++j) {
    L.t.push_back(unit.t[j] * 0.5 * h);
    L.w.push_back(unit.w[j] * 0.5 * h);
  }
  gl(0.5 * h, h);
  gl(h, 2.0 * h);
  return L;
}

/// Dirichlet-form matrix of the local problem (same equation as the parent system).
inline Eigen::MatrixXd local_matrix(const Wedge& W, const LocalLayout& L, const SingularWeightTable& T, BieKind parent) {
  const std::size_t n = L.size();
  Eigen::MatrixXd A(n, n);
  std::vector<double> sw(n);
  for (std::size_t i = 0; i < n; ++i) sw[i] = std::sqrt(L.w[i]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) A(i, j) = i == j ? 0.0 : sw[i] * sw[j] * W.kernel(L.t[j], L.t[i]);
  const std::size_t c = L.begin_L();
  for (int a = 0; a < 2 * L.K; ++a)
    for (int b = 0; b < 2 * L.K; ++b) A(c + a, c + b) = T.block(a, b);
  const double id = identity_coefficient(parent);
  for (std::size_t i = 0; i < n; ++i) A(i, i) += id;
  if (has_rank_one(parent)) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) A(i, j) += sw[i] * sw[j];
  }
  return A;
}

/// Values of f - h at the new local nodes from the old local data.
/// sigma_old lives on flank | corner(half-width h) | flank.
inline Eigen::VectorXd local_rhs(const Eigen::VectorXd& sigma_old, const Eigen::MatrixXd& A_old, const CornerContext& cc,
                                 const LocalLayout& L) {
  const int M = L.M, K = L.K;
  if (sigma_old.size() != 2 * M + 2 * K || A_old.rows() != sigma_old.size()) {
    throw Error(ErrorCode::DimensionMismatch, "old local system size");
  }
  const Eigen::VectorXd f_old = A_old.transpose() * sigma_old;
  Eigen::VectorXd f(L.size());
  f.segment(0, M) = f_old.segment(0, M);
  f.segment(L.begin_Q(), M) = f_old.segment(M + 2 * K, M);
  // coefficients of f - h on the old corner panel: c = U^-T y
  const Eigen::VectorXd coef = cc.unit.Ut_lu.solve(f_old.segment(M, 2 * K));
  if (!coef.allFinite()) throw Error(ErrorCode::IllConditioned, "interpolation through U failed");
  const double h = L.h;
  std::vector<double> phi(2 * K);
  for (std::size_t i = L.begin_I(); i < L.begin_Q(); ++i) {
    cc.unit.functions(*cc.basis, L.t[i] / h, phi);
    double v = 0.0;
    for (int m = 0; m < 2 * K; ++m) v += coef(m) * phi[m];
    f(i) = v / std::sqrt(h) * std::sqrt(L.w[i]);
  }
  return f;
}

struct ResolveState {
  int corner = 0;
  double alpha = 0.5;
  double delta = 0.0;  // corner half-length of the global mesh
  BieKind parent = BieKind::InteriorDirichlet;
  int M = 16;
  int K = 0;
  int level = 0;       // completed levels
  double h = 0.0;      // half-width of the current corner panel
  Eigen::MatrixXd A_old;
  Eigen::VectorXd sigma_old;
  std::vector<ArchivedPanel> archive;
  std::vector<std::size_t> replaced_panels;  // global flank, corner and flank panels
  std::vector<ResolveLogRow> log;
  std::shared_ptr<Factorization> fixed_lu;  // local factorization when it is scale invariant

  std::size_t corner_begin() const { return static_cast<std::size_t>(M); }
};

/// Level-0 state from the global Dirichlet matrix and the weak solution of its transpose.
inline ResolveState init_resolve(const Discretization& D, const SystemMatrix& A, const DensityVector& sigma, int corner) {
  if (!is_dirichlet(A.kind)) throw Error(ErrorCode::InvalidArgument, "resolve needs the Dirichlet matrix");
  const auto cp = D.corner_panel(corner);
  if (!cp) throw Error(ErrorCode::InvalidArgument, "vertex " + std::to_string(corner) + " has no corner panel");
  const auto fl = D.flank(*cp, -1), fr = D.flank(*cp, +1);
  if (!fl || !fr) throw Error(ErrorCode::InvalidArgument, "corner panel without flanking panels");
  const Panel& C = D.panels[*cp];
  const Panel& PL = D.panels[*fl];
  const Panel& PR = D.panels[*fr];
  const double d = C.b;
  const double tol = 1e-13 * d;
  if (PL.order != PR.order || std::abs(PL.length() - d) > tol || std::abs(PR.length() - d) > tol) {
    throw Error(ErrorCode::InvalidArgument, "flanking panels must have the corner half-length");
  }
  ResolveState S;
  S.corner = corner;
  S.alpha = D.polygon.corner_angles[corner];
  S.delta = d;
  S.parent = A.kind;
  S.M = PL.order;
  S.K = C.order / 2;
  S.h = d;
  std::vector<std::size_t> idx;
  for (const Panel* p : {&PL, &C, &PR})
    for (int j = 0; j < p->order; ++j) idx.push_back(p->first + j);
  const std::size_t n = idx.size();
  S.A_old.resize(n, n);
  S.sigma_old.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    S.sigma_old(i) = sigma.values(idx[i]);
    for (std::size_t j = 0; j < n; ++j) S.A_old(i, j) = A.values(idx[i], idx[j]);
  }
  S.replaced_panels = {*fl, *cp, *fr};
  return S;
}

/// One level: subdivide, solve the local transposed system, archive I_j and J_j.
inline void resolve_level(ResolveState& S, const CornerContext& cc, const SingularWeightTable& T) {
  if (T.K != S.K) throw Error(ErrorCode::DimensionMismatch, "table and corner order differ");
  const Wedge W(S.alpha);
  const LocalLayout L = local_layout(cc.unit, S.h, S.M);
  const Eigen::VectorXd f = local_rhs(S.sigma_old, S.A_old, cc, L);
  const Eigen::MatrixXd A = local_matrix(W, L, T, S.parent);
  Eigen::VectorXd sigma;
  if (has_rank_one(S.parent)) {
    sigma = Factorization(A, true).solve(f);
  } else {
    if (!S.fixed_lu) S.fixed_lu = std::make_shared<Factorization>(A, true);
    sigma = S.fixed_lu->solve(f);
  }
  const int M = S.M, K = S.K;
  ResolveLogRow row;
  row.level = S.level;
  row.delta_j = S.h;
  row.local_n = static_cast<int>(L.size());
  row.residual = (A.transpose() * sigma - f).norm();

  auto take = [&](std::size_t begin, int lvl) {
    ArchivedPanel p;
    p.level = lvl;
    p.t.assign(L.t.begin() + begin, L.t.begin() + begin + M);
    p.w.assign(L.w.begin() + begin, L.w.begin() + begin + M);
    p.sigma.assign(sigma.data() + begin, sigma.data() + begin + M);
    return p;
  };
  // overlap check: the new flanks coincide with the panels archived one level up
  double mismatch = 0.0;
  if (S.level > 0) {
    for (const ArchivedPanel& p : S.archive) {
      if (p.level != S.level - 1) continue;
      const std::size_t begin = p.t.front() < 0.0 ? 0 : L.begin_Q();
      double e2 = 0.0;
      for (int j = 0; j < M; ++j) e2 += (p.sigma[j] - sigma(begin + j)) * (p.sigma[j] - sigma(begin + j));
      mismatch = std::max(mismatch, std::sqrt(e2));
    }
  } else {
    ArchivedPanel k = take(0, -1), q = take(L.begin_Q(), -1);
    k.a = -2.0 * S.h;
    k.b = -S.h;
    q.a = S.h;
    q.b = 2.0 * S.h;
    S.archive.push_back(std::move(k));
    S.archive.push_back(std::move(q));
  }
  row.overlap_mismatch = mismatch;
  ArchivedPanel I = take(L.begin_I(), S.level), J = take(L.begin_J(), S.level);
  I.a = -S.h;
  I.b = -0.5 * S.h;
  J.a = 0.5 * S.h;
  J.b = S.h;
  S.archive.push_back(std::move(I));
  S.archive.push_back(std::move(J));
  S.log.push_back(row);

  // I_j | L_j | J_j becomes the old local system of the next level.
  const std::size_t b = L.begin_I(), n = 2 * M + 2 * K;
  S.A_old = A.block(b, b, n, n);
  S.sigma_old = sigma.segment(b, n);
  S.h *= 0.5;
  ++S.level;
}

/// Number of levels for targets down to distance r: ceil(1 + log2(d / r)).
inline int levels_for_radius(double delta, double r) {
  if (!(r > 0.0 && r < delta)) throw Error(ErrorCode::InvalidArgument, "resolve radius must lie in (0, delta)");
  return static_cast<int>(std::ceil(1.0 + std::log2(delta / r) - 1e-12));
}

inline void resolve_to_radius(ResolveState& S, const CornerContext& cc, const SingularWeightTable& T, double r,
                              int max_levels = 400) {
  const int J = levels_for_radius(S.delta, r);
  if (J > max_levels) throw Error(ErrorCode::MaxLevels, "radius needs " + std::to_string(J) + " levels");
  while (S.level < J) resolve_level(S, cc, T);
}

/// Final corner panel of the ladder: nodes, weights and weak values.
inline ArchivedPanel final_corner_panel(const ResolveState& S, const CornerContext& cc) {
  ArchivedPanel p;
  p.level = S.level;
  p.a = -S.h;
  p.b = S.h;
  for (int j = 0; j < 2 * S.K; ++j) {
    p.t.push_back(cc.unit.t[j] * S.h);
    p.w.push_back(cc.unit.w[j] * S.h);
    p.sigma.push_back(S.sigma_old(S.M + j));
  }
  return p;
}

/// Discretization in which each resolved corner's flank-corner-flank block is
/// replaced by its archived panels and final corner panel, with the matching density.
inline std::pair<Discretization, DensityVector> resolved_discretization(const Discretization& D, const DensityVector& sigma,
                                                                        const std::vector<const ResolveState*>& states,
                                                                        const CornerContext& cc) {
  std::vector<bool> drop(D.panels.size(), false);
  for (const ResolveState* s : states)
    for (std::size_t p : s->replaced_panels) drop[p] = true;
  Discretization R;
  R.polygon = D.polygon;
  R.corner_delta = D.corner_delta;
  std::vector<double> vals;
  auto add_panel = [&](Panel p, const std::vector<double>& t, const std::vector<double>& w, const std::vector<double>& s,
                       const std::vector<int>& edges) {
    p.first = R.nodes.size();
    const int id = static_cast<int>(R.panels.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
      R.nodes.push_back(Node{p.frame, t[j], w[j], id, edges[j]});
      vals.push_back(s[j]);
    }
    R.panels.push_back(p);
  };
  for (std::size_t p = 0; p < D.panels.size(); ++p) {
    if (drop[p]) continue;
    const Panel& P = D.panels[p];
    std::vector<double> t, w, s;
    std::vector<int> e;
    for (int j = 0; j < P.order; ++j) {
      const Node& n = D.nodes[P.first + j];
      t.push_back(n.offset);
      w.push_back(n.weight);
      s.push_back(sigma.values(P.first + j));
      e.push_back(n.edge);
    }
    add_panel(P, t, w, s, e);
  }
  const Polygon& G = D.polygon;
  for (const ResolveState* st : states) {
    const int c = st->corner;
    for (const ArchivedPanel& a : st->archive) {
      Panel P;
      P.kind = PanelKind::Smooth;
      P.frame = c;
      P.edge = a.a < 0.0 ? G.incoming_edge(c) : G.outgoing_edge(c);
      P.a = a.a;
      P.b = a.b;
      P.order = static_cast<int>(a.t.size());
      add_panel(P, a.t, a.w, a.sigma, std::vector<int>(a.t.size(), P.edge));
    }
    const ArchivedPanel fc = final_corner_panel(*st, cc);
    Panel P;
    P.kind = PanelKind::Corner;
    P.frame = c;
    P.a = fc.a;
    P.b = fc.b;
    P.order = static_cast<int>(fc.t.size());
    std::vector<int> e;
    for (double t : fc.t) e.push_back(t < 0.0 ? G.incoming_edge(c) : G.outgoing_edge(c));
    add_panel(P, fc.t, fc.w, fc.sigma, e);
    R.corner_delta[c] = st->h;
  }
  DensityVector out;
  out.kind = sigma.kind;
  out.weak_only = sigma.weak_only;
  out.values = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return {std::move(R), std::move(out)};
}

inline void write_resolve_log(const std::string& path, const ResolveState& S) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << std::setprecision(17);
  out << "level,delta_j,local_n,residual,overlap_mismatch,reference_error\n";
  for (const ResolveLogRow& r : S.log) {
    out << r.level << ',' << r.delta_j << ',' << r.local_n << ',' << r.residual << ',' << r.overlap_mismatch << ',';
    if (r.reference_error) out << *r.reference_error;
    out << '\n';
  }
}

}  // namespace cornerbie
