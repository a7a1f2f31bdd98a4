#include <gtest/gtest.h>

#include <cmath>

#include "cornerbie/corner_resolve.hpp"
#include "cornerbie/evaluate.hpp"
#include "cornerbie/problems.hpp"
#include "cornerbie/reference.hpp"
#include "support.hpp"

using namespace cornerbie;
using testing_support::basis;
using testing_support::corner_context;
using testing_support::tables;

namespace {

const std::vector<Charge>& charges() {
  static const std::vector<Charge> cs = {{Vec2(0.48, 0.29), 1.0}, {Vec2(0.39, 0.30), -0.7}, {Vec2(0.44, 0.22), 0.4}};
  return cs;
}

double flux(const Vec2& x, const Vec2& n) { return charge_gradient(charges(), x).dot(n); }

double coefficient_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double e = 0;
  for (std::size_t k = 0; k < a.size(); ++k) e = std::max(e, std::abs(a[k] - b[k]));
  return e;
}

}  // namespace

TEST(GradedMesh, Structure) {
  const Polygon P = build_polygon(testing_support::triangle_vertices());
  ReferenceOptions o;
  o.levels = 10;
  const std::vector<double> d = {0.05, 0.04, 0.03};
  const Discretization D = build_graded_mesh(P, d, o);
  for (const Panel& p : D.panels) EXPECT_EQ(p.kind, PanelKind::Smooth);
  for (int c = 0; c < 3; ++c) {
    int near = 0;
    for (const Panel& p : D.panels) {
      if (p.frame != c || std::max(std::abs(p.a), std::abs(p.b)) > d[c] * (1 + 1e-15)) continue;
      ++near;
      const double lo = std::min(std::abs(p.a), std::abs(p.b)), hi = std::max(std::abs(p.a), std::abs(p.b));
      if (lo == 0.0) {
        EXPECT_EQ(hi, std::ldexp(d[c], -10));
      } else {
        EXPECT_EQ(hi, 2 * lo);
      }
    }
    EXPECT_EQ(near, 22);
  }
  // the panels touching a vertex break the length rule by design; the dyadic ones are checked above
  const MeshReport r = validate_mesh(D);
  EXPECT_LT(r.weight_sum_error, 1e-13);
}

TEST(GradedMesh, Limits) {
  const Polygon P = build_polygon(testing_support::square_vertices());
  ReferenceOptions o;
  o.max_nodes = 1000;
  try {
    build_graded_mesh(P, std::vector<double>(4, 0.05), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLarge);
  }
  o.max_nodes = 1000000;
  o.levels = 221;
  try {
    build_graded_mesh(P, std::vector<double>(4, 0.05), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(Reference, DirichletHarmonicAndZero) {
  const Polygon P = build_polygon(testing_support::square_vertices());
  ReferenceOptions o;
  o.levels = 40;
  const ReferenceSolver R(P, std::vector<double>(4, 1.0 / 16), BieKind::InteriorDirichlet, o);
  const HarmonicPolynomial h = random_harmonic(5, 11, centroid(P));
  const DensityVector s = R.solve(sample_data(R.disc(), [&](const Vec2& x, const Vec2&) { return h.value(x); }));
  const auto t = box_targets(P, 20, true, 0.0);
  const auto u = eval_potential(R.disc(), s, t, nullptr);
  double e = 0;
  for (std::size_t k = 0; k < t.size(); ++k) e = std::max(e, std::abs(u[k] - h.value(to_global(P, t[k]))));
  EXPECT_LT(e, 1e-13);
  EXPECT_EQ(R.solve(Eigen::VectorXd::Zero(R.disc().size())).values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Reference, SelfConvergenceAtDepth) {
  // one corner graded to 120 and 160 levels, the others shallow
  const Polygon P = build_polygon(testing_support::triangle_vertices());
  const Discretization D = build_mesh(P, basis());
  ReferenceOptions a, b;
  a.corner_levels = {20, 20, 120};
  b.corner_levels = {20, 20, 160};
  const ReferenceSolver Ra(P, D.corner_delta, BieKind::ExteriorNeumann, a);
  const ReferenceSolver Rb(P, D.corner_delta, BieKind::ExteriorNeumann, b);
  const DensityVector sa = Ra.solve(sample_data(Ra.disc(), [](const Vec2&, const Vec2& n) { return n.x(); }));
  const DensityVector sb = Rb.solve(sample_data(Rb.disc(), [](const Vec2&, const Vec2& n) { return n.x(); }));
  const double d = D.corner_delta[2];
  double worst = 0;
  int compared = 0;
  for (int k = 0; k <= 100; ++k) {
    for (int side : {-1, 1}) {
      const double lo = side * std::ldexp(d, -k - 1), hi = side * std::ldexp(d, -k);
      const auto pa = find_panel(Ra.disc(), 2, std::min(lo, hi), std::max(lo, hi));
      const auto pb = find_panel(Rb.disc(), 2, std::min(lo, hi), std::max(lo, hi));
      ASSERT_TRUE(pa && pb) << k;
      const auto ca = panel_legendre(Ra.disc(), sa, *pa), cb = panel_legendre(Rb.disc(), sb, *pb);
      double n2 = 0;
      for (double c : cb) n2 += c * c;
      worst = std::max(worst, coefficient_distance(ca, cb) / std::max(1.0, std::sqrt(n2)));
      ++compared;
    }
  }
  EXPECT_EQ(compared, 202);
  EXPECT_LT(worst, 1e-13);
}

TEST(Reference, WeakSolutionAgreesAwayFromCorners) {
  const Polygon P = build_polygon(testing_support::triangle_vertices());
  const Discretization D = build_mesh(P, basis());
  ReferenceOptions o;
  o.levels = 40;
  const ReferenceSolver R(P, D.corner_delta, BieKind::ExteriorNeumann, o);
  const DensityVector sr = R.solve(sample_data(R.disc(), flux));
  const SystemMatrix A = assemble(D, BieKind::InteriorDirichlet, &tables());
  const DensityVector sw = solve_neumann_adjoint(A, sample_data(D, flux));

  // smooth panels not adjacent to a corner panel are interpolable
  double worst = 0;
  int compared = 0;
  for (std::size_t p = 0; p < D.panels.size(); ++p) {
    const Panel& pan = D.panels[p];
    if (pan.kind != PanelKind::Smooth) continue;
    if (std::abs(std::abs(pan.a) - D.corner_delta[pan.frame]) < 1e-14 || std::abs(std::abs(pan.b) - D.corner_delta[pan.frame]) < 1e-14)
      continue;
    const auto q = find_panel(R.disc(), pan.frame, pan.a, pan.b);
    ASSERT_TRUE(q);
    worst = std::max(worst, coefficient_distance(panel_legendre(D, sw, p), panel_legendre(R.disc(), sr, *q)));
    ++compared;
  }
  EXPECT_GT(compared, 10);
  EXPECT_LT(worst, 1e-12);

  // inner products with smooth functions
  for (auto g : {std::function<double(const Vec2&)>([](const Vec2&) { return 1.0; }),
                 std::function<double(const Vec2&)>([](const Vec2& x) { return x.x(); })}) {
    EXPECT_NEAR(weak_inner_product(D, sw, g), weak_inner_product(R.disc(), sr, g), 1e-12);
  }

  // first resolve levels against the graded mesh
  const CornerContext& cc = corner_context();
  for (int c = 0; c < 3; ++c) {
    ResolveState S = init_resolve(D, A, sw, c);
    resolve_level(S, cc, tables().get(S.alpha));
    resolve_level(S, cc, tables().get(S.alpha));
    double e = 0;
    for (const ArchivedPanel& a : S.archive) {
      if (a.level < 0) continue;
      const auto q = find_panel(R.disc(), c, a.a, a.b);
      ASSERT_TRUE(q);
      std::vector<double> v(a.t.size());
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = a.sigma[j] / std::sqrt(a.w[j]);
      e = std::max(e, coefficient_distance(legendre_coefficients(v, a.b - a.a), panel_legendre(R.disc(), sr, *q)));
    }
    EXPECT_LT(e, 1e-12) << "corner " << c;
  }
}
