#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "appendix_a.hpp"
#include "cornerbie/corner_resolve.hpp"
#include "cornerbie/evaluate.hpp"
#include "cornerbie/problems.hpp"
#include "support.hpp"

using namespace cornerbie;
using testing_support::basis;
using testing_support::corner_context;
using testing_support::tables;

namespace {

// Exterior Neumann problem on the proxy triangle with data n_x, solved weakly.
struct WeakProblem {
  Polygon P;
  Discretization D;
  SystemMatrix A;
  DensityVector sigma;
  Eigen::VectorXd f;
};

const WeakProblem& weak_problem() {
  static const WeakProblem W = [] {
    WeakProblem w;
    w.P = build_polygon(testing_support::triangle_vertices());
    w.D = build_mesh(w.P, basis());
    w.A = assemble(w.D, BieKind::InteriorDirichlet, &tables());
    w.f = sample_data(w.D, [](const Vec2&, const Vec2& n) { return n.x(); });
    w.sigma = solve_neumann_adjoint(w.A, w.f);
    return w;
  }();
  return W;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

}  // namespace

TEST(Resolve, LevelsForRadius) {
  EXPECT_EQ(levels_for_radius(1.0, 0.5), 2);
  EXPECT_EQ(levels_for_radius(0.03, 0.03 * 1e-12), 41);
  EXPECT_EQ(levels_for_radius(1.0, 0.3), 3);
  EXPECT_EQ(code_of([] { levels_for_radius(1.0, 1.0); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { levels_for_radius(1.0, 0.0); }), ErrorCode::InvalidArgument);
}

TEST(Resolve, LocalRhsMatchesDirectFarSum) {
  const WeakProblem& W = weak_problem();
  const CornerContext& cc = corner_context();
  for (int c = 0; c < 3; ++c) {
    const ResolveState S = init_resolve(W.D, W.A, W.sigma, c);
    const LocalLayout L = local_layout(cc.unit, S.h, S.M);
    const Eigen::VectorXd ft = local_rhs(S.sigma_old, S.A_old, cc, L);
    std::vector<bool> local(W.D.panels.size(), false);
    for (std::size_t p : S.replaced_panels) local[p] = true;
    const Polygon& P = W.D.polygon;
    double worst = 0.0, worst_scaled = 0.0;
    for (std::size_t i = L.begin_I(); i < L.begin_Q(); ++i) {
      const double t = L.t[i];
      const int edge = t < 0 ? P.incoming_edge(c) : P.outgoing_edge(c);
      const FramePoint x{c, t * P.edge_dirs[edge]};
      const Vec2 n = P.edge_normals[edge];
      // far field of the rest of the boundary, target normal: adaptive on smooth
      // panels, plain on the (far, weak) corner panels of the other vertices
      double h = 0.0;
      const PanelTarget y{x, edge, n};
      for (std::size_t p = 0; p < W.D.panels.size(); ++p) {
        const Panel& pan = W.D.panels[p];
        if (local[p]) continue;
        if (pan.kind == PanelKind::Smooth) {
          const std::vector<double> v = panel_weights(W.D, p, y, KernelKind::TargetNormal, &cc);
          for (std::size_t j = 0; j < v.size(); ++j) h += v[j] * W.sigma.values(pan.first + j);
          continue;
        }
        for (std::size_t j = pan.first; j < pan.first + pan.order; ++j) {
          if (W.D.nodes[j].edge == edge) continue;
          h += std::sqrt(W.D.nodes[j].weight) * dlp_kernel_diff(n, frame_difference(P, x, W.D.point(j))) * W.sigma.values(j);
        }
      }
      const double direct = n.x() - h;
      // pointwise where the basis grid weights are not tiny, sqrt(w)-scaled everywhere
      if (std::abs(t) >= 1e-3 * S.h) worst = std::max(worst, std::abs(ft(i) / std::sqrt(L.w[i]) - direct));
      worst_scaled = std::max(worst_scaled, std::abs(ft(i) - std::sqrt(L.w[i]) * direct));
    }
    EXPECT_LT(worst, 1e-12) << "corner " << c;
    EXPECT_LT(worst_scaled, 1e-14) << "corner " << c;
  }
}

TEST(Resolve, ZeroDataGivesZero) {
  const WeakProblem& W = weak_problem();
  const CornerContext& cc = corner_context();
  ResolveState S = init_resolve(W.D, W.A, W.sigma, 0);
  S.sigma_old.setZero();
  const LocalLayout L = local_layout(cc.unit, S.h, S.M);
  EXPECT_EQ(local_rhs(S.sigma_old, S.A_old, cc, L).cwiseAbs().maxCoeff(), 0.0);
  resolve_level(S, cc, tables().get(S.alpha));
  EXPECT_EQ(S.sigma_old.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Resolve, DyadicAndOverlapConsistent) {
  const WeakProblem& W = weak_problem();
  const CornerContext& cc = corner_context();
  for (int c = 0; c < 3; ++c) {
    ResolveState S = init_resolve(W.D, W.A, W.sigma, c);
    const double d = S.h;
    const SingularWeightTable& T = tables().get(S.alpha);
    resolve_level(S, cc, T);
    resolve_level(S, cc, T);
    EXPECT_EQ(S.h, d / 4);
    for (int k = 0; k < 3; ++k) resolve_level(S, cc, T);
    ASSERT_EQ(S.log.size(), 5u);
    for (const ResolveLogRow& row : S.log) {
      EXPECT_LE(row.overlap_mismatch, 1e-12) << "level " << row.level;
      EXPECT_LE(row.residual, 1e-12);
      EXPECT_EQ(row.delta_j, std::ldexp(d, -row.level));
    }
    // archived panels tile [-2d, 2d] away from the final corner panel
    double covered = 0.0;
    for (const ArchivedPanel& a : S.archive) covered += a.b - a.a;
    EXPECT_NEAR(covered + 2 * S.h, 4 * d, 1e-14 * d);
  }
}

TEST(Resolve, TelescopingReproducesFarField) {
  const WeakProblem& W = weak_problem();
  const CornerContext& cc = corner_context();
  std::vector<ResolveState> states;
  for (int c = 0; c < 3; ++c) {
    states.push_back(init_resolve(W.D, W.A, W.sigma, c));
    resolve_to_radius(states.back(), cc, tables().get(states.back().alpha), 1e-4 * states.back().delta);
  }
  std::vector<const ResolveState*> ptrs;
  for (const auto& s : states) ptrs.push_back(&s);
  const auto [R, rs] = resolved_discretization(W.D, W.sigma, ptrs, cc);
  const auto t = circle_targets(W.P, 64, 1.0);
  const auto u0 = eval_potential(W.D, W.sigma, t, &cc), u1 = eval_potential(R, rs, t, &cc);
  for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(u0[k], u1[k], 1e-12);
  // the inner product with smooth functions is preserved too
  for (auto g : {std::function<double(const Vec2&)>([](const Vec2&) { return 1.0; }),
                 std::function<double(const Vec2&)>([](const Vec2& x) { return x.x() * x.y(); })}) {
    EXPECT_NEAR(weak_inner_product(W.D, W.sigma, g), weak_inner_product(R, rs, g), 1e-12);
  }
}

TEST(Resolve, MaxLevels) {
  const WeakProblem& W = weak_problem();
  ResolveState S = init_resolve(W.D, W.A, W.sigma, 1);
  EXPECT_EQ(code_of([&] { resolve_to_radius(S, corner_context(), tables().get(S.alpha), 1e-30 * S.delta, 50); }),
            ErrorCode::MaxLevels);
  EXPECT_EQ(S.level, 0);
}

TEST(AppendixA, TaylorCoefficientBound) {
  const Polygon sq = build_polygon(testing_support::square_vertices());
  const Polygon tr = build_polygon(testing_support::triangle_vertices());
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int c = 0; c < 4; ++c) EXPECT_LE(testing_support::taylor_check(sq, c, 0.25, seed).worst_ratio, 1.0);
    for (int c = 0; c < 3; ++c) EXPECT_LE(testing_support::taylor_check(tr, c, 0.2, seed).worst_ratio, 1.0);
  }
}

TEST(AppendixA, FitMatchesClosedFormSeries) {
  // a_0 = H(0) evaluated directly as a boundary integral
  const Polygon sq = build_polygon(testing_support::square_vertices());
  const auto chk = testing_support::taylor_check(sq, 0, 0.25, 3);
  EXPECT_GT(std::abs(chk.a[0]), 0.0);
  EXPECT_GT(chk.f_norm, 0.0);
  // decay at least geometric with ratio 1/(2r) = 2, from the analytic radius
  for (int m = 1; m <= 10; ++m) EXPECT_LE(std::abs(chk.a[m]), std::sqrt(4.0) * std::pow(2.0, m + 1) * chk.f_norm);
}

TEST(Evaluate, ClassificationExhaustive) {
  const WeakProblem& W = weak_problem();
  std::vector<FramePoint> t = box_targets(W.P, 40, false, 0.2);
  const auto in = box_targets(W.P, 40, true, 0.0);
  t.insert(t.end(), in.begin(), in.end());
  int counts[3] = {0, 0, 0};
  for (const FramePoint& y : t) {
    const Classification c = classify(W.D, y);
    ++counts[static_cast<int>(c.cls)];
    if (c.cls == TargetClass::NearCorner) {
      EXPECT_GE(c.corner, 0);
      EXPECT_NEAR(c.r, (to_global(W.P, y) - W.P.vertices[c.corner]).norm(), 1e-14);
    } else if (c.cls == TargetClass::NearSmoothPanel) {
      EXPECT_EQ(W.D.panels[c.panel].kind, PanelKind::Smooth);
      EXPECT_LE(panel_distance(W.D, c.panel, y), W.D.panels[c.panel].length());
    } else {
      for (std::size_t p = 0; p < W.D.panels.size(); ++p) EXPECT_GT(panel_distance(W.D, p, y), W.D.panels[p].length());
    }
  }
  EXPECT_EQ(counts[0] + counts[1] + counts[2], static_cast<int>(t.size()));
  for (int k = 0; k < 3; ++k) EXPECT_GT(counts[k], 0) << k;
}

TEST(Evaluate, ZeroDensity) {
  const WeakProblem& W = weak_problem();
  DensityVector z = W.sigma;
  z.values.setZero();
  const auto t = circle_targets(W.P, 10, 1.0);
  for (double v : eval_potential(W.D, z, t, &corner_context())) EXPECT_EQ(v, 0.0);
}

TEST(Evaluate, WeakDensityNearCornerNeedsResolve) {
  const WeakProblem& W = weak_problem();
  PolarGridSpec g;
  g.corner = 2;
  g.r_min = g.r_max = 1e-3 * W.D.corner_delta[2];
  g.n_r = 1;
  g.n_theta = 1;
  const auto t = polar_grid(W.P, g);
  EXPECT_EQ(code_of([&] { eval_potential(W.D, W.sigma, t, &corner_context()); }), ErrorCode::UnresolvedCorner);
}

TEST(Evaluate, DirichletAllTargetClasses) {
  const Polygon P = build_polygon(testing_support::triangle_vertices());
  const Discretization D = build_mesh(P, basis());
  const HarmonicPolynomial h = random_harmonic(5, 17, centroid(P));
  const SystemMatrix A = assemble(D, BieKind::InteriorDirichlet, &tables());
  const DensityVector s = solve_dirichlet(A, sample_data(D, [&](const Vec2& x, const Vec2&) { return h.value(x); }));
  std::vector<FramePoint> t = box_targets(P, 30, true, 0.0);
  for (int c = 0; c < 3; ++c) {
    PolarGridSpec g;
    g.corner = c;
    g.r_min = 1e-6 * D.corner_delta[c];
    g.r_max = 2.0 * D.corner_delta[c];
    g.n_r = 8;
    g.n_theta = 5;
    const auto q = polar_grid(P, g);
    t.insert(t.end(), q.begin(), q.end());
  }
  // just inside the edges, at the frame switch and off it
  for (int e = 0; e < 3; ++e) {
    for (double fr : {0.5, 0.37}) {
      const Vec2 m = P.vertices[e] + fr * P.edge_lengths[e] * P.edge_dirs[e];
      for (double d : {1e-2, 1e-4, 1e-7, 1e-10}) t.push_back(FramePoint{-1, m - d * P.edge_normals[e]});
    }
  }
  const auto u = eval_potential(D, s, t, &corner_context());
  double worst[3] = {0, 0, 0};
  for (std::size_t k = 0; k < t.size(); ++k) {
    const int c = static_cast<int>(classify(D, t[k]).cls);
    worst[c] = std::max(worst[c], std::abs(u[k] - h.value(to_global(P, t[k]))));
  }
  for (int c = 0; c < 3; ++c) EXPECT_LT(worst[c], 1e-12) << to_string(static_cast<TargetClass>(c));
}

TEST(Evaluate, ExteriorNeumannFarFieldCondition) {
  // u(y) - (int f / 2 pi) log|y| -> 0 for outward-normal data f
  const Polygon P = build_polygon(testing_support::triangle_vertices());
  const Discretization D = build_mesh(P, basis());
  const std::vector<Charge> cs = {{Vec2(0.48, 0.29), 1.0}, {Vec2(0.39, 0.30), -0.7}, {Vec2(0.44, 0.22), 0.4}};
  const SystemMatrix A = assemble(D, BieKind::InteriorDirichlet, &tables());
  const Eigen::VectorXd f = sample_data(D, [&](const Vec2& x, const Vec2& n) { return charge_gradient(cs, x).dot(n); });
  const DensityVector s = solve_neumann_adjoint(A, f);
  double flux = 0.0;
  for (std::size_t i = 0; i < D.size(); ++i) flux += std::sqrt(D.nodes[i].weight) * f(i);
  EXPECT_NEAR(flux, -2 * std::numbers::pi * 0.7, 1e-12);
  auto g = [&](double R) {
    const FramePoint y{-1, Vec2(R * 0.6, R * 0.8)};
    return eval_potential(D, s, {y}, nullptr)[0] - flux / (2 * std::numbers::pi) * std::log(R);
  };
  const double g3 = g(1e3), g4 = g(1e4);
  const double limit = (1e4 * g4 - 1e3 * g3) / (1e4 - 1e3);  // g ~ c / R
  EXPECT_LT(std::abs(limit), 1e-8);
  EXPECT_LT(std::abs(g4), std::abs(g3));
}

TEST(Polarization, RegularPolygonIsIsotropic) {
  std::vector<Vec2> v;
  const int n = 64;
  for (int k = 0; k < n; ++k) v.emplace_back(std::cos(2 * std::numbers::pi * k / n), std::sin(2 * std::numbers::pi * k / n));
  const Polygon P = build_polygon(v);
  MeshOptions o;
  o.delta_fraction = 1.0 / 8.0;
  const Discretization D = build_mesh(P, basis(), o);
  const SystemMatrix A = assemble(D, BieKind::InteriorDirichlet, &tables());
  const Eigen::Matrix2d T = polarization_tensor(D, A);
  EXPECT_LT(std::abs(T(0, 1)), 1e-10);
  EXPECT_LT(std::abs(T(1, 0)), 1e-10);
  EXPECT_LT(std::abs(T(0, 0) - T(1, 1)), 1e-10);
  // approaches the disc value -2 area = -2 pi
  EXPECT_NEAR(T(0, 0) / (2 * P.signed_area()), -1.0, 1e-2);
}

TEST(Polarization, TriangleSymmetric) {
  const WeakProblem& W = weak_problem();
  const Eigen::Matrix2d T = polarization_tensor(W.D, W.A);
  EXPECT_LT(std::abs(T(0, 1) - T(1, 0)), 1e-12);
  EXPECT_LT(T(0, 0), 0.0);
  EXPECT_LT(T(1, 1), 0.0);
}
