#pragma once

// sqrt(w)-scaled Nystrom matrices for the four boundary integral equations.
//
// Row i is the equation at node i, column j the unknown sigma_j = sigma(s_j) sqrt(w_j).
//   interior Dirichlet  -s/2 + D s            (u = D[s] inside)
//   exterior Dirichlet  +s/2 + D s + int s    (u = D[s] + int s outside)
//   interior Neumann    +s/2 + D' s + int s   (u = S[s] inside, transposes exterior Dirichlet)
//   exterior Neumann    -s/2 + D' s           (u = S[s] outside, transposes interior Dirichlet)
// D has source-normal kernel k(s_j, s_i), D' the target-normal kernel k(s_i, s_j).

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>

#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/kernels.hpp"
#include "cornerbie/panel_integrals.hpp"
#include "cornerbie/parallel.hpp"
#include "cornerbie/singular_quadrature.hpp"

namespace cornerbie {

enum class BieKind { InteriorDirichlet, ExteriorDirichlet, InteriorNeumann, ExteriorNeumann };

inline bool is_dirichlet(BieKind k) { return k == BieKind::InteriorDirichlet || k == BieKind::ExteriorDirichlet; }
inline bool is_interior(BieKind k) { return k == BieKind::InteriorDirichlet || k == BieKind::InteriorNeumann; }

/// Neumann equation whose matrix is the transpose of the given Dirichlet one, and back.
inline BieKind adjoint_kind(BieKind k) {
  switch (k) {
    case BieKind::InteriorDirichlet: return BieKind::ExteriorNeumann;
    case BieKind::ExteriorDirichlet: return BieKind::InteriorNeumann;
    case BieKind::InteriorNeumann: return BieKind::ExteriorDirichlet;
    case BieKind::ExteriorNeumann: return BieKind::InteriorDirichlet;
  }
  return k;
}

inline std::string to_string(BieKind k) {
  switch (k) {
    case BieKind::InteriorDirichlet: return "interior_dirichlet";
    case BieKind::ExteriorDirichlet: return "exterior_dirichlet";
    case BieKind::InteriorNeumann: return "interior_neumann";
    case BieKind::ExteriorNeumann: return "exterior_neumann";
  }
  return "?";
}

inline BieKind parse_bie_kind(const std::string& s) {
  for (BieKind k : {BieKind::InteriorDirichlet, BieKind::ExteriorDirichlet, BieKind::InteriorNeumann, BieKind::ExteriorNeumann})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::ConfigError, "unknown bie kind '" + s + "'");
}

/// Coefficient of the identity term.
inline double identity_coefficient(BieKind k) {
  return (k == BieKind::InteriorDirichlet || k == BieKind::ExteriorNeumann) ? -0.5 : 0.5;
}

inline bool has_rank_one(BieKind k) { return k == BieKind::ExteriorDirichlet || k == BieKind::InteriorNeumann; }

struct SystemMatrix {
  Eigen::MatrixXd values;
  BieKind kind = BieKind::InteriorDirichlet;
  const Discretization* disc = nullptr;

  Eigen::Index size() const { return values.rows(); }
};

struct AssemblyOptions {
  // Replace targets within one panel length of a smooth source panel by adaptive entries.
  bool paranoid = false;
};

namespace detail {

struct NodeGeometry {
  std::vector<FramePoint> x;
  std::vector<Vec2> n;
  std::vector<int> edge;
  std::vector<double> sw;
};

inline NodeGeometry node_geometry(const Discretization& D) {
  NodeGeometry g;
  const std::size_t N = D.size();
  g.x.resize(N);
  g.n.resize(N);
  g.edge.resize(N);
  g.sw.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    g.x[i] = D.point(i);
    g.n[i] = D.normal(i);
    g.edge[i] = D.nodes[i].edge;
    g.sw[i] = std::sqrt(D.nodes[i].weight);
  }
  return g;
}

}  // namespace detail

/// Kernel part only: sqrt(w_i w_j) k with plain node quadrature, corner self-blocks from the tables.
inline Eigen::MatrixXd assemble_kernel(const Discretization& D, bool target_normal, TableCache* tables,
                                       const AssemblyOptions& opt = {}) {
  const std::size_t N = D.size();
  const detail::NodeGeometry g = detail::node_geometry(D);
  const Polygon& P = D.polygon;
  Eigen::MatrixXd A(N, N);
  parallel_for(N, [&](std::size_t i) {
    for (std::size_t j = 0; j < N; ++j) {
      if (g.edge[i] == g.edge[j]) {
        A(i, j) = 0.0;
        continue;
      }
      const Vec2 d = frame_difference(P, g.x[j], g.x[i]);  // source - target
      const double k = target_normal ? dlp_kernel_diff(g.n[i], -d) : dlp_kernel_diff(g.n[j], d);
      A(i, j) = g.sw[i] * g.sw[j] * k;
    }
  });
  for (std::size_t p = 0; p < D.panels.size(); ++p) {
    const Panel& pan = D.panels[p];
    if (pan.kind != PanelKind::Corner) continue;
    if (tables == nullptr) throw Error(ErrorCode::MissingTable, "corner panel without singular tables");
    const SingularWeightTable& T = tables->get(P.corner_angles[pan.frame]);
    if (2 * T.K != pan.order) throw Error(ErrorCode::DimensionMismatch, "table size differs from corner panel order");
    const Eigen::MatrixXd& blk = T.block;
    for (int a = 0; a < pan.order; ++a)
      for (int b = 0; b < pan.order; ++b) A(pan.first + a, pan.first + b) = target_normal ? blk(b, a) : blk(a, b);
  }
  if (opt.paranoid) {
    std::unique_ptr<CornerContext> cc;
    if (tables != nullptr) cc = std::make_unique<CornerContext>(tables->basis());
    const KernelKind kk = target_normal ? KernelKind::TargetNormal : KernelKind::Double;
    parallel_for(N, [&](std::size_t i) {
      const PanelTarget y{g.x[i], g.edge[i], g.n[i]};
      for (std::size_t p = 0; p < D.panels.size(); ++p) {
        const Panel& pan = D.panels[p];
        if (static_cast<std::size_t>(D.nodes[i].panel) == p) continue;
        if (pan.kind == PanelKind::Smooth && pan.edge == g.edge[i]) continue;
        if (panel_distance(D, p, g.x[i]) >= pan.length()) continue;
        const std::vector<double> v = panel_weights(D, p, y, kk, cc.get());
        for (int j = 0; j < pan.order; ++j) A(i, pan.first + j) = g.sw[i] * v[j];
      }
    });
  }
  return A;
}

/// Full system matrix for one equation kind.
inline SystemMatrix assemble(const Discretization& D, BieKind kind, TableCache* tables = nullptr, const AssemblyOptions& opt = {}) {
  SystemMatrix S;
  S.kind = kind;
  S.disc = &D;
  S.values = assemble_kernel(D, !is_dirichlet(kind), tables, opt);
  const std::size_t N = D.size();
  const double id = identity_coefficient(kind);
  for (std::size_t i = 0; i < N; ++i) S.values(i, i) += id;
  if (has_rank_one(kind)) {
    Eigen::VectorXd sw(N);
    for (std::size_t i = 0; i < N; ++i) sw(i) = std::sqrt(D.nodes[i].weight);
    S.values.noalias() += sw * sw.transpose();
  }
  return S;
}

inline Eigen::VectorXd apply(const SystemMatrix& A, const Eigen::VectorXd& x) {
  if (x.size() != A.size()) throw Error(ErrorCode::DimensionMismatch, "density length differs from matrix size");
  return A.values * x;
}

/// Binary dump: int64 N, int32 kind, then N*N row-major doubles.
inline void write_matrix(const std::string& path, const SystemMatrix& A) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  const std::int64_t n = A.size();
  const std::int32_t k = static_cast<std::int32_t>(A.kind);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&k), sizeof k);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = A.values;
  out.write(reinterpret_cast<const char*>(R.data()), sizeof(double) * R.size());
}

}  // namespace cornerbie
