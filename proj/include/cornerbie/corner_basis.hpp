#pragma once

// Universal singular basis on the reference corner interval [0, 1].
//
// The family {x^mu : mu in {0} U [mu_lo, mu_hi]} is sampled on a nested
// Gauss-Legendre grid that is dyadically refined toward 0, compressed by an
// SVD, and equipped with interpolation nodes (roots of the first discarded
// singular function) and weights.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cornerbie/errors.hpp"
#include "cornerbie/quadrature.hpp"

namespace cornerbie {

struct PowerFamily {
  double mu_lo = 0.5;
  double mu_hi = 50.0;
  int mu_samples = 200;     // Gauss-Legendre points in mu on [mu_lo, mu_hi]
  bool include_zero = true; // the mu = 0 column
  int panel_order = 16;
  int levels = 60;          // dyadic levels [2^-k-1, 2^-k]
  int top_subpanels = 24;   // subdivisions of the [1/2, 1] level; decays with depth
  std::vector<double> explicit_mu;  // when non-empty, replaces the continuum sample

  /// Exponents sampled by the power matrix (mu = 0 first when included).
  std::vector<double> exponents() const {
    std::vector<double> mu;
    if (!explicit_mu.empty()) return explicit_mu;
    if (include_zero) mu.push_back(0.0);
    const Rule r = map_rule(legendre_rule(mu_samples), mu_lo, mu_hi);
    mu.insert(mu.end(), r.nodes.begin(), r.nodes.end());
    return mu;
  }

  /// Number of subpanels on dyadic level k. Large exponents only matter where
  /// x^mu is not negligible, so the subdivision decays like 1/(k+1).
  int subpanels(int k) const {
    const double s = static_cast<double>(top_subpanels) / (k + 1);
    return std::max(1, static_cast<int>(std::ceil(s)));
  }
};

/// Nested Gauss-Legendre grid on [0, 1]; panels sorted ascending.
struct NestedGrid {
  int order = 16;
  std::vector<double> breaks;  // panel boundaries, ascending, breaks[0] = 0
  std::vector<double> x;       // nodes, ascending
  std::vector<double> w;       // weights

  std::size_t panel_count() const { return breaks.size() - 1; }

  std::size_t locate(double t) const {
    auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    std::size_t p = (it == breaks.begin()) ? 0 : static_cast<std::size_t>(it - breaks.begin()) - 1;
    return std::min(p, panel_count() - 1);
  }

  static NestedGrid build(const PowerFamily& fam) {
    NestedGrid g;
    g.order = fam.panel_order;
    std::vector<double> br;
    br.push_back(0.0);
    br.push_back(std::ldexp(1.0, -fam.levels));
    for (int k = fam.levels - 1; k >= 0; --k) {
      const double a = std::ldexp(1.0, -k - 1), b = std::ldexp(1.0, -k);
      const int s = fam.subpanels(k);
      for (int i = 1; i <= s; ++i) br.push_back(i == s ? b : a + (b - a) * i / s);
    }
    g.breaks = br;
    const Rule& ref = legendre_rule(g.order);
    for (std::size_t p = 0; p + 1 < br.size(); ++p) {
      const Rule r = map_rule(ref, br[p], br[p + 1]);
      g.x.insert(g.x.end(), r.nodes.begin(), r.nodes.end());
      g.w.insert(g.w.end(), r.weights.begin(), r.weights.end());
    }
    return g;
  }
};

/// entry (i, j) = x_i^{mu_j} sqrt(w_i) on the nested grid.
inline Eigen::MatrixXd build_power_matrix(const PowerFamily& fam, const NestedGrid& grid) {
  const auto mu = fam.exponents();
  Eigen::MatrixXd A(grid.x.size(), mu.size());
  for (std::size_t i = 0; i < grid.x.size(); ++i) {
    const double sw = std::sqrt(grid.w[i]);
    for (std::size_t j = 0; j < mu.size(); ++j) A(i, j) = (mu[j] == 0.0 ? 1.0 : std::pow(grid.x[i], mu[j])) * sw;
  }
  return A;
}

inline Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> build_power_matrix_ld(const PowerFamily& fam,
                                                                                     const NestedGrid& grid) {
  const auto mu = fam.exponents();
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> A(grid.x.size(), mu.size());
  for (std::size_t i = 0; i < grid.x.size(); ++i) {
    const long double sw = std::sqrt(static_cast<long double>(grid.w[i]));
    const long double xi = grid.x[i];
    for (std::size_t j = 0; j < mu.size(); ++j) A(i, j) = (mu[j] == 0.0 ? 1.0L : std::pow(xi, static_cast<long double>(mu[j]))) * sw;
  }
  return A;
}

inline Eigen::MatrixXd build_power_matrix(const PowerFamily& fam) {
  return build_power_matrix(fam, NestedGrid::build(fam));
}

struct BasisOptions {
  double eps = 1e-13;           // target accuracy of the family's span
  double svd_cutoff = 1e-14;    // K = #{s > svd_cutoff * s_max}
  double cond_bound = 1e4;
};

class CornerBasis {
 public:
  PowerFamily family;
  BasisOptions options;
  NestedGrid grid;
  int K = 0;
  std::vector<double> singular_values;
  Eigen::MatrixXd phi;       // grid values of phi_1..phi_{K+1} (columns)
  std::vector<double> nodes;   // interpolation nodes x_1..x_K in (0, 1), ascending
  std::vector<double> weights; // quadrature weights
  Eigen::MatrixXd U;         // U_ij = phi_i(x_j) sqrt(w_j), one-sided
  double cond_U = 0.0;

  /// phi_k(t) for k in [0, K]; index K is the discarded function whose roots are the nodes.
  double eval(int k, double t) const {
    std::vector<double> out(K + 1);
    eval_all(t, out);
    return out[k];
  }

  /// All K+1 functions at t in [0, 1].
  void eval_all(double t, std::span<double> out) const {
    const std::size_t p = grid.locate(t);
    const int n = grid.order;
    double basis[128];
    const double a = grid.breaks[p], b = grid.breaks[p + 1];
    legendre_lagrange_basis(n, (2.0 * t - a - b) / (b - a), std::span<double>(basis, n));
    const std::size_t off = p * n;
    for (int k = 0; k <= K && k < static_cast<int>(out.size()); ++k) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += basis[j] * phi(off + j, k);
      out[k] = s;
    }
  }

  /// Relative L2 residual of projecting x^mu onto span(phi_1..phi_K), on the grid.
  double projection_residual(double mu) const {
    Eigen::VectorXd v(grid.x.size());
    for (std::size_t i = 0; i < grid.x.size(); ++i) v(i) = (mu == 0.0 ? 1.0 : std::pow(grid.x[i], mu)) * std::sqrt(grid.w[i]);
    return projection_residual(v);
  }

  /// Absolute L2 residual of a sqrt(w)-scaled grid vector against span(phi_1..phi_K).
  double projection_residual(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd Q(grid.x.size(), K);
    for (std::size_t i = 0; i < grid.x.size(); ++i) {
      const double sw = std::sqrt(grid.w[i]);
      for (int k = 0; k < K; ++k) Q(i, k) = phi(i, k) * sw;
    }
    const Eigen::VectorXd r = v - Q * (Q.transpose() * v);
    return r.norm();
  }

  /// int_0^1 phi_k on the grid.
  double integral(int k) const {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.x.size(); ++i) s += grid.w[i] * phi(i, k);
    return s;
  }
};

namespace detail {

// Grid values below this abscissa are dominated by the 1/sqrt(w) amplification
// of SVD roundoff; sign changes there are not roots of the singular function.
inline constexpr double kRootFloor = 1e-14;

inline std::vector<double> find_roots(const CornerBasis& B, int k) {
  std::vector<double> roots;
  const auto& x = B.grid.x;
  auto f = [&](double t) { return B.eval(k, t); };
  std::vector<double> samples;
  samples.reserve(x.size() + 2);
  for (double t : x)
    if (t >= kRootFloor) samples.push_back(t);
  samples.push_back(1.0);
  double prev_t = samples.front(), prev_v = f(prev_t);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double t = samples[i], v = f(t);
    if ((prev_v < 0.0) != (v < 0.0) && prev_v != 0.0) {
      double lo = prev_t, hi = t, flo = prev_v;
      for (int it = 0; it < 200 && hi - lo > 1e-17 * std::max(1.0, hi); ++it) {
        // Bisection in log scale for widely separated brackets, linear otherwise.
        const double mid = (lo > 0.0 && hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
        if (hi - lo <= 4e-16 * hi) break;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_t = t;
    prev_v = v;
  }
  return roots;
}

}  // namespace detail

/// SVD compression of the power family. Templated on the working precision so
/// that translation units that never build a basis skip instantiating the SVD.
template <typename Real = long double>
CornerBasis svd_basis(const PowerFamily& fam, const BasisOptions& opt = {}) {
  if (!(opt.svd_cutoff > 1e-16 && opt.svd_cutoff < 1e-6)) {
    throw Error(ErrorCode::InvalidArgument, "svd cutoff outside (1e-16, 1e-6)");
  }
  CornerBasis B;
  B.family = fam;
  B.options = opt;
  B.grid = NestedGrid::build(fam);
  // Extended precision: the first discarded singular vector sits at the cutoff
  // and its roots become the nodes, so it must be resolved well below 1e-16.
  using MatL = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  const MatL A = build_power_matrix_ld(fam, B.grid).template cast<Real>();
  Eigen::BDCSVD<MatL> svd(A, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  B.singular_values.resize(s.size());
  for (int i = 0; i < s.size(); ++i) B.singular_values[i] = static_cast<double>(s(i));
  int K = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > static_cast<Real>(opt.svd_cutoff) * s(0)) ++K;
  if (K == 0) throw Error(ErrorCode::RankDeficient, "no singular values above cutoff");
  B.K = K;
  const int cols = std::min<int>(K + 1, static_cast<int>(s.size()));
  B.phi.resize(B.grid.x.size(), K + 1);
  B.phi.setZero();
  for (int k = 0; k < cols; ++k) {
    // Fix the sign so that phi_k(1) > 0 for reproducible caches.
    const Real sign = svd.matrixU()(B.grid.x.size() - 1, k) < Real(0) ? Real(-1) : Real(1);
    for (std::size_t i = 0; i < B.grid.x.size(); ++i) {
      B.phi(i, k) = static_cast<double>(sign * svd.matrixU()(i, k) / std::sqrt(static_cast<long double>(B.grid.w[i])));
    }
  }
  return B;
}

/// Interpolation nodes (roots of phi_{K+1}) and weights solving
/// sum_j phi_i(x_j) w_j = int phi_i for i <= K.
inline void interpolation_nodes(CornerBasis& B) {
  const int K = B.K;
  std::vector<double> roots;
  if (K + 1 <= static_cast<int>(B.singular_values.size())) roots = detail::find_roots(B, K);
  if (static_cast<int>(roots.size()) != K) {
    // Fallback: column-pivoted QR on the sqrt(w)-scaled phi's selects K well-spread
    // grid nodes. Unscaled values are unreliable where the grid weight is tiny.
    roots.clear();
    Eigen::MatrixXd Phi_t = B.phi.leftCols(K).transpose();
    for (Eigen::Index i = 0; i < Phi_t.cols(); ++i) Phi_t.col(i) *= std::sqrt(B.grid.w[i]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Phi_t);
    for (int j = 0; j < K; ++j) roots.push_back(B.grid.x[qr.colsPermutation().indices()(j)]);
    std::sort(roots.begin(), roots.end());
  }
  B.nodes = roots;
  Eigen::MatrixXd Phi(K, K);
  std::vector<double> vals(K + 1);
  for (int j = 0; j < K; ++j) {
    B.eval_all(roots[j], vals);
    for (int i = 0; i < K; ++i) Phi(i, j) = vals[i];
  }
  Eigen::VectorXd m(K);
  for (int i = 0; i < K; ++i) m(i) = B.integral(i);
  const Eigen::VectorXd w = Phi.colPivHouseholderQr().solve(m);
  B.weights.assign(w.data(), w.data() + K);
  for (double wj : B.weights) {
    if (!(wj > 0.0)) throw Error(ErrorCode::IllConditioned, "non-positive interpolation weight");
  }
  B.U.resize(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) B.U(i, j) = Phi(i, j) * std::sqrt(B.weights[j]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svdU(B.U);
  const auto& su = svdU.singularValues();
  B.cond_U = su(0) / su(su.size() - 1);
  if (B.cond_U > B.options.cond_bound) {
    throw Error(ErrorCode::IllConditioned, "cond(U) = " + std::to_string(B.cond_U));
  }
}

template <typename Real = long double>
CornerBasis build_corner_basis(const PowerFamily& fam = {}, const BasisOptions& opt = {}) {
  CornerBasis B = svd_basis<Real>(fam, opt);
  interpolation_nodes(B);
  return B;
}

/// Corner-panel tables on (-delta, delta): nodes mirrored to both legs, with
/// the function system {phi_i(|t|/d), sgn(t) phi_i(|t|/d)} / sqrt(2 d).
struct TwoSidedCorner {
  int K = 0;
  double delta = 1.0;
  std::vector<double> t;  // 2K nodes ascending: -d x_K .. -d x_1, d x_1 .. d x_K
  std::vector<double> w;
  Eigen::MatrixXd U;      // 2K x 2K, U_ij = phi~_i(t_j) sqrt(w_j); rows 0..K-1 even, K..2K-1 odd
  Eigen::PartialPivLU<Eigen::MatrixXd> Ut_lu;  // factorization of U^T

  /// Values of the 2K functions at t in (-delta, delta).
  void functions(const CornerBasis& B, double tt, std::span<double> out) const {
    std::vector<double> v(B.K + 1);
    B.eval_all(std::abs(tt) / delta, v);
    const double sc = 1.0 / std::sqrt(2.0 * delta);
    const double sg = tt < 0.0 ? -1.0 : 1.0;
    for (int i = 0; i < K; ++i) {
      out[i] = v[i] * sc;
      out[K + i] = sg * v[i] * sc;
    }
  }

  /// Interpolate from sqrt(w)-scaled node values to the point tt.
  double interpolate_scaled(const CornerBasis& B, std::span<const double> scaled_values, double tt) const {
    Eigen::Map<const Eigen::VectorXd> y(scaled_values.data(), 2 * K);
    const Eigen::VectorXd c = Ut_lu.solve(y);
    std::vector<double> f(2 * K);
    functions(B, tt, f);
    double s = 0.0;
    for (int i = 0; i < 2 * K; ++i) s += c(i) * f[i];
    return s;
  }
};

inline TwoSidedCorner two_sided_extend(const CornerBasis& B, double delta) {
  TwoSidedCorner C;
  C.K = B.K;
  C.delta = delta;
  const int K = B.K;
  for (int j = K - 1; j >= 0; --j) {
    C.t.push_back(-delta * B.nodes[j]);
    C.w.push_back(delta * B.weights[j]);
  }
  for (int j = 0; j < K; ++j) {
    C.t.push_back(delta * B.nodes[j]);
    C.w.push_back(delta * B.weights[j]);
  }
  C.U.resize(2 * K, 2 * K);
  std::vector<double> f(2 * K);
  for (int j = 0; j < 2 * K; ++j) {
    C.functions(B, C.t[j], f);
    for (int i = 0; i < 2 * K; ++i) C.U(i, j) = f[i] * std::sqrt(C.w[j]);
  }
  C.Ut_lu.compute(C.U.transpose());
  return C;
}

}  // namespace cornerbie
