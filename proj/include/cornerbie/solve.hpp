#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <string>

#include "cornerbie/assembly.hpp"
#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"

namespace cornerbie {

/// sigma_i = sigma(s_i) sqrt(w_i).
struct DensityVector {
  Eigen::VectorXd values;
  BieKind kind = BieKind::InteriorDirichlet;
  bool weak_only = false;  // corner-panel values only meaningful under inner products
};

/// Boundary data f(x, n_out) sampled at the nodes and scaled by sqrt(w).
inline Eigen::VectorXd sample_data(const Discretization& D, const std::function<double(const Vec2&, const Vec2&)>& f) {
  Eigen::VectorXd v(D.size());
  for (std::size_t i = 0; i < D.size(); ++i) v(i) = f(D.global(i), D.normal(i)) * std::sqrt(D.nodes[i].weight);
  return v;
}

/// Dense LU of A or of A^T, reusable across right-hand sides.
class Factorization {
 public:
  Factorization() = default;
  Factorization(const Eigen::MatrixXd& M, bool transpose) {
    if (transpose) {
      lu_.compute(M.transpose());
    } else {
      lu_.compute(M);
    }
    const double rc = lu_.rcond();
    if (!(rc > 1e-15)) throw Error(ErrorCode::SingularMatrix, "reciprocal condition estimate " + std::to_string(rc));
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& f) const {
    if (f.size() != lu_.rows()) throw Error(ErrorCode::DimensionMismatch, "data length differs from matrix size");
    return lu_.solve(f);
  }

  double rcond() const { return lu_.rcond(); }

 private:
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

namespace detail {

inline void check_compatible(const Discretization& D, BieKind kind, const Eigen::VectorXd& f) {
  if (kind != BieKind::InteriorNeumann) return;
  double s = 0.0;
  for (std::size_t i = 0; i < D.size(); ++i) s += std::sqrt(D.nodes[i].weight) * f(i);
  const double scale = std::max(1.0, f.norm());
  if (std::abs(s) > 1e-12 * scale) {
    throw Error(ErrorCode::IncompatibleData, "interior Neumann data has nonzero mean " + std::to_string(s));
  }
}

}  // namespace detail

inline DensityVector solve_dirichlet(const SystemMatrix& A, const Eigen::VectorXd& f) {
  if (!is_dirichlet(A.kind)) throw Error(ErrorCode::InvalidArgument, "solve_dirichlet needs a Dirichlet matrix");
  DensityVector s;
  s.kind = A.kind;
  s.values = Factorization(A.values, false).solve(f);
  return s;
}

/// A^T sigma = f: the Neumann density whose equation is the transpose of A.
inline DensityVector solve_neumann_adjoint(const SystemMatrix& A, const Eigen::VectorXd& f) {
  if (!is_dirichlet(A.kind)) throw Error(ErrorCode::InvalidArgument, "adjoint solve needs the Dirichlet matrix");
  const BieKind kind = adjoint_kind(A.kind);
  if (A.disc != nullptr) detail::check_compatible(*A.disc, kind, f);
  DensityVector s;
  s.kind = kind;
  s.weak_only = true;
  s.values = Factorization(A.values, true).solve(f);
  return s;
}

/// Direct solve of any assembled system (no adjoint reinterpretation).
inline DensityVector solve_direct(const SystemMatrix& A, const Eigen::VectorXd& f) {
  if (A.disc != nullptr) detail::check_compatible(*A.disc, A.kind, f);
  DensityVector s;
  s.kind = A.kind;
  s.values = Factorization(A.values, false).solve(f);
  return s;
}

/// sum_i g(x_i) sqrt(w_i) sigma_i.
inline double weak_inner_product(const Discretization& D, const DensityVector& s, const std::function<double(const Vec2&)>& g) {
  if (static_cast<std::size_t>(s.values.size()) != D.size()) throw Error(ErrorCode::DimensionMismatch, "density length");
  double acc = 0.0;
  for (std::size_t i = 0; i < D.size(); ++i) acc += g(D.global(i)) * std::sqrt(D.nodes[i].weight) * s.values(i);
  return acc;
}

/// sqrt(w)-weighted discrete 2-norm of a scaled vector (plain 2-norm of the scaled values).
inline double scaled_norm(const Eigen::VectorXd& v) { return v.norm(); }

/// CSV: s, w, sigma_scaled, weak_only.
inline void write_density_csv(const std::string& path, const Discretization& D, const DensityVector& s, const std::string& source = "adjoint") {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << std::setprecision(17);
  out << "node,s,w,sigma_scaled,weak_only,source\n";
  for (std::size_t i = 0; i < D.size(); ++i) {
    out << i << ',' << D.param(i) << ',' << D.nodes[i].weight << ',' << s.values(i) << ',' << (s.weak_only ? 1 : 0) << ','
        << source << '\n';
  }
}

}  // namespace cornerbie
