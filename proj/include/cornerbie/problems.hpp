#pragma once

// Boundary data with known solutions, and target generators.

#include <complex>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"

namespace cornerbie {

struct Charge {
  Vec2 x = Vec2::Zero();
  double q = 1.0;
};

/// u(y) = -sum q_j log|y - x_j|.
inline double charge_potential(const std::vector<Charge>& cs, const Vec2& y) {
  double u = 0.0;
  for (const Charge& c : cs) u -= c.q * std::log((y - c.x).norm());
  return u;
}

inline Vec2 charge_gradient(const std::vector<Charge>& cs, const Vec2& y) {
  Vec2 g = Vec2::Zero();
  for (const Charge& c : cs) {
    const Vec2 d = y - c.x;
    g -= c.q * d / d.squaredNorm();
  }
  return g;
}

/// u = Re sum_k c_k (z - z0)^k, harmonic everywhere.
struct HarmonicPolynomial {
  std::complex<double> z0{0.0, 0.0};
  std::vector<std::complex<double>> c;

  double value(const Vec2& y) const {
    const std::complex<double> z = std::complex<double>(y.x(), y.y()) - z0;
    std::complex<double> s = 0.0, p = 1.0;
    for (const auto& ck : c) {
      s += ck * p;
      p *= z;
    }
    return s.real();
  }

  /// grad Re F = (Re F', -Im F').
  Vec2 gradient(const Vec2& y) const {
    const std::complex<double> z = std::complex<double>(y.x(), y.y()) - z0;
    std::complex<double> s = 0.0, p = 1.0;
    for (std::size_t k = 1; k < c.size(); ++k) {
      s += static_cast<double>(k) * c[k] * p;
      p *= z;
    }
    return Vec2(s.real(), -s.imag());
  }
};

/// Random coefficients of unit size up to the given degree.
inline HarmonicPolynomial random_harmonic(int degree, std::uint64_t seed, const Vec2& center) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  HarmonicPolynomial h;
  h.z0 = {center.x(), center.y()};
  for (int k = 0; k <= degree; ++k) h.c.emplace_back(u(rng), k == 0 ? 0.0 : u(rng));
  return h;
}

inline Vec2 centroid(const Polygon& P) {
  // area centroid
  double A = 0.0;
  Vec2 c = Vec2::Zero();
  for (int i = 0; i < P.size(); ++i) {
    const Vec2& a = P.vertices[i];
    const Vec2& b = P.vertices[P.next(i)];
    const double w = cross(a, b);
    A += w;
    c += w * (a + b);
  }
  return c / (3.0 * A);
}

inline bool point_in_polygon(const Polygon& P, const Vec2& y) {
  bool in = false;
  for (int i = 0, j = P.size() - 1; i < P.size(); j = i++) {
    const Vec2& a = P.vertices[i];
    const Vec2& b = P.vertices[j];
    if ((a.y() > y.y()) != (b.y() > y.y()) && y.x() < (b.x() - a.x()) * (y.y() - a.y()) / (b.y() - a.y()) + a.x()) in = !in;
  }
  return in;
}

inline double diameter(const Polygon& P) {
  double d = 0.0;
  for (const Vec2& a : P.vertices)
    for (const Vec2& b : P.vertices) d = std::max(d, (a - b).norm());
  return d;
}

/// count points on a circle of radius factor * diameter about the centroid.
inline std::vector<FramePoint> circle_targets(const Polygon& P, int count, double factor) {
  const Vec2 c = centroid(P);
  const double R = factor * diameter(P);
  std::vector<FramePoint> t;
  for (int k = 0; k < count; ++k) {
    const double th = 2.0 * std::numbers::pi * k / count;
    t.push_back(FramePoint{-1, c + R * Vec2(std::cos(th), std::sin(th))});
  }
  return t;
}

/// Points of an n x n bounding-box grid lying inside (or outside, within the box) the polygon.
inline std::vector<FramePoint> box_targets(const Polygon& P, int n, bool inside, double pad = 0.0) {
  Vec2 lo = P.vertices[0], hi = P.vertices[0];
  for (const Vec2& v : P.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec2 ext = hi - lo;
  lo -= pad * ext;
  hi += pad * ext;
  std::vector<FramePoint> t;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Vec2 y(lo.x() + (hi.x() - lo.x()) * (i + 0.5) / n, lo.y() + (hi.y() - lo.y()) * (j + 0.5) / n);
      if (point_in_polygon(P, y) == inside) t.push_back(FramePoint{-1, y});
    }
  return t;
}

/// Charges uniformly placed in a disc, fixed by the seed.
inline std::vector<Charge> random_charges(int count, const Vec2& center, double radius, std::uint64_t seed, bool zero_mean) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Charge> cs;
  double sum = 0.0;
  for (int k = 0; k < count; ++k) {
    const double r = radius * std::sqrt(u(rng)), th = 2.0 * std::numbers::pi * u(rng);
    Charge c;
    c.x = center + r * Vec2(std::cos(th), std::sin(th));
    c.q = 2.0 * u(rng) - 1.0;
    sum += c.q;
    cs.push_back(c);
  }
  if (zero_mean)
    for (Charge& c : cs) c.q -= sum / count;
  return cs;
}

/// Star polygon with n outer points, alternating radii, vertex 0 on the x axis.
inline std::vector<Vec2> star_vertices(int points, double r_outer, double r_inner) {
  std::vector<Vec2> v;
  for (int k = 0; k < 2 * points; ++k) {
    const double th = std::numbers::pi * k / points;
    const double r = k % 2 == 0 ? r_outer : r_inner;
    v.emplace_back(r * std::cos(th), r * std::sin(th));
  }
  return v;
}

}  // namespace cornerbie
