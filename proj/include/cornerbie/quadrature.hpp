#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "cornerbie/errors.hpp"

namespace cornerbie {

/// Quadrature rule on an interval [a, b].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;
  int exactness_degree = -1;  // -1 when the rule is not polynomial-exact
  double a = -1.0;
  double b = 1.0;
};

namespace detail {

// Newton iteration on the three-term recurrence. Valid for any n >= 1.
inline Rule compute_gauss_legendre(int n) {
  Rule r;
  r.order = n;
  r.exactness_degree = 2 * n - 1;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-17) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  if (n == 1) r.weights[0] = 2.0;
  return r;
}

}  // namespace detail

/// Gauss-Legendre rule of arbitrary order on [-1, 1], cached.
inline const Rule& legendre_rule(int n) {
  static std::mutex mutex;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// Standard Gauss-Legendre rule on [-1, 1] for 1 <= n <= 64.
inline Rule gauss_legendre(int n) {
  if (n < 1 || n > 64) throw Error(ErrorCode::UnsupportedOrder, "gauss_legendre order " + std::to_string(n));
  return legendre_rule(n);
}

/// Affine image of a [-1, 1] rule on [a, b].
inline Rule map_rule(const Rule& ref, double a, double b) {
  Rule r = ref;
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    r.nodes[i] = c + h * ref.nodes[i];
    r.weights[i] = h * ref.weights[i];
  }
  r.a = a;
  r.b = b;
  return r;
}

/// Barycentric weights for the Gauss-Legendre nodes of order n (ascending nodes).
inline const std::vector<double>& legendre_barycentric_weights(int n) {
  static std::mutex mutex;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) {
    const Rule r = detail::compute_gauss_legendre(n);
    std::vector<double> lam(n);
    for (int j = 0; j < n; ++j) {
      lam[j] = std::sqrt((1.0 - r.nodes[j] * r.nodes[j]) * r.weights[j]) * ((j % 2 == 0) ? 1.0 : -1.0);
    }
    it = cache.emplace(n, std::move(lam)).first;
  }
  return it->second;
}

/// Lagrange basis values at reference coordinate u in [-1, 1] for the order-n Gauss-Legendre nodes.
inline void legendre_lagrange_basis(int n, double u, std::span<double> out) {
  const Rule& r = legendre_rule(n);
  const auto& lam = legendre_barycentric_weights(n);
  for (int j = 0; j < n; ++j) {
    if (u == r.nodes[j]) {
      std::fill(out.begin(), out.begin() + n, 0.0);
      out[j] = 1.0;
      return;
    }
  }
  double denom = 0.0;
  for (int j = 0; j < n; ++j) {
    out[j] = lam[j] / (u - r.nodes[j]);
    denom += out[j];
  }
  for (int j = 0; j < n; ++j) out[j] /= denom;
}

/// Interpolate values given at the Gauss-Legendre nodes of [a, b] to the point t.
inline double interpolate_gl(std::span<const double> values, double a, double b, double t) {
  const int n = static_cast<int>(values.size());
  std::vector<double> basis(n);
  legendre_lagrange_basis(n, (2.0 * t - a - b) / (b - a), basis);
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += basis[j] * values[j];
  return s;
}

/// Legendre polynomials P_0..P_{n-1} at u.
inline void legendre_values(int n, double u, std::span<double> out) {
  if (n > 0) out[0] = 1.0;
  if (n > 1) out[1] = u;
  for (int k = 2; k < n; ++k) out[k] = ((2.0 * k - 1.0) * u * out[k - 1] - (k - 1.0) * out[k - 2]) / k;
}

/// Coefficients of the panel-normalized Legendre expansion from values at the
/// Gauss-Legendre nodes of a panel of length len: c_k = int sigma p_k with
/// int p_k^2 = 1 over the panel.
inline std::vector<double> legendre_coefficients(std::span<const double> values, double len) {
  const int n = static_cast<int>(values.size());
  const Rule& r = legendre_rule(n);
  std::vector<double> c(n, 0.0), p(n);
  for (int j = 0; j < n; ++j) {
    legendre_values(n, r.nodes[j], p);
    for (int k = 0; k < n; ++k) c[k] += r.weights[j] * values[j] * p[k];
  }
  for (int k = 0; k < n; ++k) c[k] *= std::sqrt((2.0 * k + 1.0) * len / 4.0);
  return c;
}

struct AdaptiveOptions {
  double abs_tol = 1e-15;
  double rel_tol = 1e-15;
  int order = 16;  // embedded pair (order, 2*order)
  int max_depth = 200;
  std::size_t max_intervals = 200000;
  std::optional<double> singular_endpoint;  // either a or b
};

struct AdaptiveResult {
  std::vector<double> value;
  double error_estimate = 0.0;
  int max_depth_used = 0;
  std::size_t intervals = 0;
};

/// Vector-valued adaptive Gauss-Legendre integration with global error control.
/// f(t, out) writes `dim` values. Refinement always splits the interval with the
/// largest embedded-pair error estimate.
template <class F>
AdaptiveResult adaptive_integrate_vec(F&& f, std::size_t dim, double a, double b, const AdaptiveOptions& opt = {}) {
  const Rule& lo = legendre_rule(opt.order);
  const Rule& hi = legendre_rule(2 * opt.order);
  std::vector<double> buf(dim);

  struct Piece {
    double a, b, err;
    int depth;
    std::vector<double> val;
  };
  auto eval = [&](double pa, double pb, int depth) {
    Piece p{pa, pb, 0.0, depth, std::vector<double>(dim, 0.0)};
    std::vector<double> low(dim, 0.0), mag(dim, 0.0);
    const double c = 0.5 * (pa + pb), h = 0.5 * (pb - pa);
    for (int i = 0; i < hi.order; ++i) {
      f(c + h * hi.nodes[i], std::span<double>(buf));
      for (std::size_t k = 0; k < dim; ++k) {
        p.val[k] += h * hi.weights[i] * buf[k];
        mag[k] += h * hi.weights[i] * std::abs(buf[k]);
      }
    }
    for (int i = 0; i < lo.order; ++i) {
      f(c + h * lo.nodes[i], std::span<double>(buf));
      for (std::size_t k = 0; k < dim; ++k) low[k] += h * lo.weights[i] * buf[k];
    }
    // Differences at the level of rounding in the sums are not discretization error.
    constexpr double roundoff = 64.0 * std::numeric_limits<double>::epsilon();
    for (std::size_t k = 0; k < dim; ++k) p.err = std::max(p.err, std::abs(p.val[k] - low[k]) - roundoff * mag[k]);
    p.err = std::max(p.err, 0.0);
    return p;
  };

  auto cmp = [](const Piece& x, const Piece& y) { return x.err < y.err; };
  std::priority_queue<Piece, std::vector<Piece>, decltype(cmp)> heap(cmp);

  if (opt.singular_endpoint) {
    // Dyadic pre-partition toward the singular endpoint.
    const bool left = std::abs(*opt.singular_endpoint - a) <= std::abs(*opt.singular_endpoint - b);
    const int levels = 8;
    double far = left ? b : a;
    for (int k = 0; k < levels; ++k) {
      const double mid = left ? a + (far - a) * 0.5 : b - (b - far) * 0.5;
      heap.push(left ? eval(mid, far, k + 1) : eval(far, mid, k + 1));
      far = mid;
    }
    heap.push(left ? eval(a, far, levels) : eval(far, b, levels));
  } else {
    heap.push(eval(a, b, 0));
  }

  auto totals = [&]() {
    std::vector<double> v(dim, 0.0);
    double e = 0.0;
    auto copy = heap;
    while (!copy.empty()) {
      const Piece& p = copy.top();
      for (std::size_t k = 0; k < dim; ++k) v[k] += p.val[k];
      e += p.err;
      copy.pop();
    }
    return std::pair{v, e};
  };

  // Running sums are kept incrementally; a full recount is done at the end.
  double err_sum = 0.0;
  std::vector<double> val_sum(dim, 0.0);
  {
    auto [v, e] = totals();
    val_sum = v;
    err_sum = e;
  }
  int max_depth_used = 0;
  while (true) {
    double vmax = 0.0;
    for (double v : val_sum) vmax = std::max(vmax, std::abs(v));
    const double tol = std::max(opt.abs_tol, opt.rel_tol * vmax);
    if (err_sum <= tol) break;
    Piece worst = heap.top();
    if (worst.err <= 0.0) break;
    heap.pop();
    if (worst.depth >= opt.max_depth) {
      throw Error(ErrorCode::MaxDepthExceeded, "adaptive_integrate exceeded depth " + std::to_string(opt.max_depth));
    }
    if (heap.size() + 2 > opt.max_intervals) {
      throw Error(ErrorCode::MaxDepthExceeded, "adaptive_integrate exceeded interval budget");
    }
    const double mid = 0.5 * (worst.a + worst.b);
    Piece l = eval(worst.a, mid, worst.depth + 1);
    Piece r = eval(mid, worst.b, worst.depth + 1);
    max_depth_used = std::max(max_depth_used, worst.depth + 1);
    err_sum += l.err + r.err - worst.err;
    for (std::size_t k = 0; k < dim; ++k) val_sum[k] += l.val[k] + r.val[k] - worst.val[k];
    heap.push(std::move(l));
    heap.push(std::move(r));
  }
  auto [v, e] = totals();
  AdaptiveResult res;
  res.value = std::move(v);
  res.error_estimate = e;
  res.max_depth_used = max_depth_used;
  res.intervals = heap.size();
  return res;
}

/// Scalar adaptive integration of f over [a, b].
template <class F>
double adaptive_integrate(F&& f, double a, double b, const AdaptiveOptions& opt = {}) {
  auto g = [&](double t, std::span<double> out) { out[0] = f(t); };
  return adaptive_integrate_vec(g, 1, a, b, opt).value[0];
}

}  // namespace cornerbie
