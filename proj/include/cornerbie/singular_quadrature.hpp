#pragma once

// Corner self-interaction weights.
//
// The corner panel (-d, d) is placed in a wedge frame: vertex at the origin,
// outgoing leg along +x (outward normal (0,-1)), incoming leg along
// (cos pi a, sin pi a) (outward normal (-sin pi a, cos pi a)). Offsets t > 0
// are on the outgoing leg, t < 0 on the incoming one. The kernel vanishes on
// a leg, so only opposite-leg integrals are needed, and the reflection
// t -> -t about the bisector gives k(t, s) = k(-t, -s).

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cornerbie/corner_basis.hpp"
#include "cornerbie/errors.hpp"
#include "cornerbie/kernels.hpp"
#include "cornerbie/quadrature.hpp"

namespace cornerbie {

struct Wedge {
  double alpha = 0.5;
  Vec2 dir_in;     // unit vector along the incoming leg, away from the vertex
  Vec2 normal_in;  // outward normal of the incoming leg
  Vec2 dir_out{1.0, 0.0};
  Vec2 normal_out{0.0, -1.0};

  explicit Wedge(double a) : alpha(a) {
    const double th = std::numbers::pi * a;
    dir_in = Vec2(std::cos(th), std::sin(th));
    normal_in = Vec2(-std::sin(th), std::cos(th));
  }

  Vec2 point(double t) const { return t >= 0.0 ? Vec2(t * dir_out) : Vec2(-t * dir_in); }
  const Vec2& normal(double t) const { return t >= 0.0 ? normal_out : normal_in; }

  /// k(t, s): source offset t, target offset s, both relative to the vertex.
  double kernel(double t, double s) const {
    if ((t >= 0.0) == (s >= 0.0)) return 0.0;
    return dlp_kernel_diff(normal(t), point(t) - point(s));
  }
};

namespace detail {

// int_0^1 f(u) over the dyadic pieces [2^-k-1, 2^-k], k < levels, and [0, 2^-levels].
template <class F>
std::vector<double> dyadic_integrate_vec(F&& f, std::size_t dim, int levels, const AdaptiveOptions& opt) {
  std::vector<double> total(dim, 0.0);
  auto add = [&](double a, double b) {
    const AdaptiveResult r = adaptive_integrate_vec(f, dim, a, b, opt);
    for (std::size_t k = 0; k < dim; ++k) total[k] += r.value[k];
  };
  add(0.0, std::ldexp(1.0, -levels));
  for (int k = levels - 1; k >= 0; --k) add(std::ldexp(1.0, -k - 1), std::ldexp(1.0, -k));
  return total;
}

inline AdaptiveOptions table_adaptive_options() {
  AdaptiveOptions o;
  o.abs_tol = 1e-18;
  o.rel_tol = 1e-15;
  o.order = 16;
  o.max_depth = 80;
  return o;
}

}  // namespace detail

/// I(x, m) = int_0^1 k(u, -x) phi_m(u) du for m < K (unit wedge, unit panel).
inline std::vector<double> opposite_leg_moments(const CornerBasis& B, const Wedge& W, double x) {
  const int K = B.K;
  const AdaptiveOptions opt = detail::table_adaptive_options();
  std::vector<double> vals(K + 1);
  auto f = [&](double u, std::span<double> out) {
    const double k = W.kernel(u, -x);
    B.eval_all(u, vals);
    for (int m = 0; m < K; ++m) out[m] = k * vals[m];
  };
  std::vector<double> total(K, 0.0);
  const auto& br = B.grid.breaks;
  for (std::size_t p = 0; p + 1 < br.size(); ++p) {
    const AdaptiveResult r = adaptive_integrate_vec(f, K, br[p], br[p + 1], opt);
    for (int m = 0; m < K; ++m) total[m] += r.value[m];
  }
  return total;
}

/// int_0^1 k(u, -x) u^mu du by dyadic adaptive integration (independent of the basis).
inline double opposite_leg_power_integral(const Wedge& W, double x, double mu) {
  const AdaptiveOptions opt = detail::table_adaptive_options();
  auto f = [&](double u, std::span<double> out) { out[0] = W.kernel(u, -x) * (mu == 0.0 ? 1.0 : std::pow(u, mu)); };
  return detail::dyadic_integrate_vec(f, 1, 64, opt)[0];
}

struct SingularWeightTable {
  double alpha = 0.5;
  int K = 0;
  double delta = 1.0;
  // W(i, j): int_{-d}^{d} k(t, t_i) g(t) dt ~ sum_j W(i, j) g(t_j) for g in the corner span.
  Eigen::MatrixXd W;
  // sqrt(w_i) W(i, j) / sqrt(w_j): the kernel part of the sqrt(w)-scaled Nystrom block.
  Eigen::MatrixXd block;
  double basis_residual = 0.0;  // weighted error, worst of the 2K basis members
  double power_residual = 0.0;  // weighted error, worst of the random power sample
  double basis_max_pointwise = 0.0;
  double power_max_pointwise = 0.0;
};

struct TableOptions {
  double eps = 1e-13;
  int certify_powers = 10;
  std::uint64_t seed = 12345;
  double delta = 1.0;
  bool certify = true;
};

/// Weights for all 2K corner targets of one angle, certified against an
/// independent power-function oracle.
inline SingularWeightTable build_singular_weights(double alpha, const CornerBasis& B, const TableOptions& opt = {}) {
  if (!(alpha > 0.0 && alpha < 2.0) || std::abs(alpha - 1.0) < 1e-12) {
    throw Error(ErrorCode::DegenerateAngle, "corner angle must lie in (0, 2) without 1");
  }
  const int K = B.K;
  const Wedge Wg(alpha);
  const TwoSidedCorner C = two_sided_extend(B, opt.delta);
  const double sc = 1.0 / std::sqrt(2.0 * opt.delta);

  // Moments on the unit panel; only the 1/sqrt(2 d) normalization depends on d.
  std::vector<std::vector<double>> I(K);
  for (int i = 0; i < K; ++i) I[i] = opposite_leg_moments(B, Wg, B.nodes[i]);

  // b(i, m) = int k(t, t_i) phi~_m(t) dt over the opposite leg, on the panel of half-length d.
  Eigen::MatrixXd b(2 * K, 2 * K);
  for (int j = 0; j < 2 * K; ++j) {
    const bool left = j < K;
    const int i = left ? K - 1 - j : j - K;  // index into B.nodes
    for (int m = 0; m < K; ++m) {
      const double v = I[i][m] * sc;  // k ~ 1/d and dt ~ d cancel
      b(j, m) = v;
      b(j, K + m) = left ? v : -v;
    }
  }
  SingularWeightTable T;
  T.alpha = alpha;
  T.K = K;
  T.delta = opt.delta;
  // U What_i = b_i, W~_ij = What_ij sqrt(w_j).
  const Eigen::MatrixXd What = C.U.partialPivLu().solve(b.transpose()).transpose();
  T.W.resize(2 * K, 2 * K);
  T.block.resize(2 * K, 2 * K);
  for (int i = 0; i < 2 * K; ++i) {
    for (int j = 0; j < 2 * K; ++j) {
      T.W(i, j) = What(i, j) * std::sqrt(C.w[j]);
      T.block(i, j) = std::sqrt(C.w[i]) * What(i, j);
    }
  }

  // Residuals are measured in the sqrt(w)-weighted discrete L2 norm over the
  // target rows, the norm in which the scaled system sees them. Magnitudes at
  // the innermost targets are large (phi~ ~ 1e3 there), so pointwise absolute
  // errors near 1e-12 are roundoff of O(1e3) sums.
  auto weighted = [&](const Eigen::VectorXd& e) {
    double s2 = 0.0;
    for (int i = 0; i < 2 * K; ++i) s2 += C.w[i] * e(i) * e(i);
    return std::sqrt(s2);
  };
  std::vector<double> f(2 * K);
  Eigen::MatrixXd F(2 * K, 2 * K);  // F(j, m) = phi~_m(t_j)
  for (int j = 0; j < 2 * K; ++j) {
    C.functions(B, C.t[j], f);
    for (int m = 0; m < 2 * K; ++m) F(j, m) = f[m];
  }
  const Eigen::MatrixXd E = T.W * F - b;
  for (int m = 0; m < 2 * K; ++m) T.basis_residual = std::max(T.basis_residual, weighted(E.col(m)));
  T.basis_max_pointwise = E.cwiseAbs().maxCoeff();

  if (opt.certify) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> dist(B.family.mu_lo, B.family.mu_hi);
    for (int q = 0; q < opt.certify_powers; ++q) {
      const double mu = q == 0 ? 0.0 : dist(rng);
      Eigen::VectorXd ge(2 * K), go(2 * K), ee(2 * K), eo(2 * K);
      for (int j = 0; j < 2 * K; ++j) {
        const double a = std::abs(C.t[j]) / opt.delta;
        ge(j) = mu == 0.0 ? 1.0 : std::pow(a, mu);
        go(j) = C.t[j] < 0.0 ? -ge(j) : ge(j);
      }
      const Eigen::VectorXd qe = T.W * ge, qo = T.W * go;
      for (int i = 0; i < K; ++i) {
        // dimensionless: g is evaluated at |t|/d and k dt is scale free
        const double exact = opposite_leg_power_integral(Wg, B.nodes[i], mu);
        const int left = K - 1 - i, right = K + i;
        ee(left) = qe(left) - exact;
        ee(right) = qe(right) - exact;
        eo(left) = qo(left) - exact;
        eo(right) = qo(right) + exact;
      }
      const double norm = 1.0 / std::sqrt(2.0 * opt.delta);
      T.power_residual = std::max({T.power_residual, norm * weighted(ee), norm * weighted(eo)});
      T.power_max_pointwise = std::max({T.power_max_pointwise, ee.cwiseAbs().maxCoeff(), eo.cwiseAbs().maxCoeff()});
    }
    if (T.basis_residual > opt.eps || T.power_residual > opt.eps) {
      std::ostringstream os;
      os << "singular table for alpha=" << alpha << ": basis residual " << T.basis_residual << ", power residual "
         << T.power_residual;
      throw Error(ErrorCode::ResidualTooLarge, os.str());
    }
  }
  return T;
}

namespace detail {

inline std::string table_key(double alpha, double eps, int K) {
  const long long aq = std::llround(alpha * 1e12);
  std::ostringstream os;
  os << "table_a" << aq << "_e" << std::llround(-std::log10(eps) * 1000) << "_K" << K << "_d1.bin";
  return os.str();
}

inline bool read_table(const std::filesystem::path& p, SingularWeightTable& T, int K) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::int64_t k = 0;
  double hdr[5];
  in.read(reinterpret_cast<char*>(&k), sizeof k);
  in.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  if (!in || k != K) return false;
  T.K = K;
  T.alpha = hdr[0];
  T.basis_residual = hdr[1];
  T.power_residual = hdr[2];
  T.basis_max_pointwise = hdr[3];
  T.power_max_pointwise = hdr[4];
  T.delta = 1.0;
  T.W.resize(2 * K, 2 * K);
  T.block.resize(2 * K, 2 * K);
  in.read(reinterpret_cast<char*>(T.W.data()), sizeof(double) * T.W.size());
  in.read(reinterpret_cast<char*>(T.block.data()), sizeof(double) * T.block.size());
  return static_cast<bool>(in);
}

inline void write_table(const std::filesystem::path& p, const SingularWeightTable& T) {
  std::filesystem::create_directories(p.parent_path());
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    std::int64_t k = T.K;
    double hdr[5] = {T.alpha, T.basis_residual, T.power_residual, T.basis_max_pointwise, T.power_max_pointwise};
    out.write(reinterpret_cast<const char*>(&k), sizeof k);
    out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
    out.write(reinterpret_cast<const char*>(T.W.data()), sizeof(double) * T.W.size());
    out.write(reinterpret_cast<const char*>(T.block.data()), sizeof(double) * T.block.size());
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace detail

inline std::optional<std::filesystem::path> cache_directory() {
  const char* env = std::getenv("CORNERBIE_CACHE");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return std::filesystem::path(env);
}

/// In-memory table store per angle, backed by CORNERBIE_CACHE when set.
class TableCache {
 public:
  explicit TableCache(const CornerBasis& basis, TableOptions opt = {}) : basis_(&basis), opt_(opt) { opt_.delta = 1.0; }

  const SingularWeightTable& get(double alpha) {
    std::lock_guard<std::mutex> lock(mutex_);
    const long long key = std::llround(alpha * 1e12);
    auto it = tables_.find(key);
    if (it != tables_.end()) return it->second;
    SingularWeightTable T;
    const auto dir = cache_directory();
    const std::string name = detail::table_key(alpha, opt_.eps, basis_->K);
    if (!(dir && detail::read_table(*dir / name, T, basis_->K))) {
      T = build_singular_weights(alpha, *basis_, opt_);
      if (dir) detail::write_table(*dir / name, T);
    }
    return tables_.emplace(key, std::move(T)).first->second;
  }

  /// Table lookup without building; throws MissingTable.
  const SingularWeightTable& at(double alpha) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = tables_.find(std::llround(alpha * 1e12));
    if (it == tables_.end()) throw Error(ErrorCode::MissingTable, "no singular table for alpha " + std::to_string(alpha));
    return it->second;
  }

  const CornerBasis& basis() const { return *basis_; }

 private:
  const CornerBasis* basis_;
  TableOptions opt_;
  mutable std::mutex mutex_;
  std::map<long long, SingularWeightTable> tables_;
};

}  // namespace cornerbie
