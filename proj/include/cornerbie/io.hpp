#pragma once

// File formats: polygon JSON, mesh CSV, and the binary basis cache.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "cornerbie/corner_basis.hpp"
#include "cornerbie/errors.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/singular_quadrature.hpp"

namespace cornerbie {

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
}

/// Vertices from {"vertices": [[x, y], ...]} or a bare array of pairs.
inline std::vector<Vec2> polygon_vertices(const nlohmann::json& j) {
  const nlohmann::json& arr = j.is_object() ? j.at("vertices") : j;
  if (!arr.is_array()) throw Error(ErrorCode::ConfigError, "vertices must be an array of [x, y] pairs");
  std::vector<Vec2> v;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw Error(ErrorCode::ConfigError, "vertex entries must be [x, y] number pairs");
    }
    v.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return v;
}

inline std::vector<Vec2> read_polygon_json(const std::string& path) { return polygon_vertices(read_json(path)); }

inline std::string to_string(PanelKind k) { return k == PanelKind::Corner ? "corner" : "smooth"; }

/// One row per node: panel_id, kind, frame, edge, a, b, node_index, s, w.
inline void write_mesh_csv(const std::string& path, const Discretization& D) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << std::setprecision(17);
  out << "panel_id,kind,frame,edge,a,b,node_index,s,w\n";
  for (std::size_t p = 0; p < D.panels.size(); ++p) {
    const Panel& P = D.panels[p];
    for (int j = 0; j < P.order; ++j) {
      const std::size_t i = P.first + j;
      out << p << ',' << to_string(P.kind) << ',' << P.frame << ',' << D.nodes[i].edge << ',' << P.a << ',' << P.b << ',' << i
          << ',' << D.param(i) << ',' << D.nodes[i].weight << '\n';
    }
  }
}

namespace detail {

inline constexpr std::uint32_t kBasisMagic = 0x43424231;  // "CBB1"

template <typename T>
void write_pod(std::ostream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return static_cast<bool>(in);
}

inline void write_doubles(std::ostream& o, const double* p, std::size_t n) {
  o.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(sizeof(double) * n));
}

inline bool read_doubles(std::istream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(sizeof(double) * n));
  return static_cast<bool>(in);
}

}  // namespace detail

/// Cache file name for a basis; keyed by eps, the exponent range and the SVD cutoff.
inline std::string basis_key(const PowerFamily& fam, const BasisOptions& opt) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "basis_e%.3e_mu%.6g-%.6g_n%d_c%.3e_M%d_L%d.bin", opt.eps, fam.mu_lo, fam.mu_hi, fam.mu_samples,
                opt.svd_cutoff, fam.panel_order, fam.levels);
  return buf;
}

inline void write_basis(const std::filesystem::path& p, const CornerBasis& B) {
  if (!p.parent_path().empty()) std::filesystem::create_directories(p.parent_path());
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    detail::write_pod(out, detail::kBasisMagic);
    detail::write_pod(out, static_cast<std::int64_t>(B.K));
    detail::write_pod(out, static_cast<std::int64_t>(B.phi.rows()));
    detail::write_pod(out, static_cast<std::int64_t>(B.singular_values.size()));
    detail::write_pod(out, B.cond_U);
    detail::write_doubles(out, B.singular_values.data(), B.singular_values.size());
    detail::write_doubles(out, B.phi.data(), B.phi.size());
    detail::write_doubles(out, B.nodes.data(), B.nodes.size());
    detail::write_doubles(out, B.weights.data(), B.weights.size());
    detail::write_doubles(out, B.U.data(), B.U.size());
  }
  std::filesystem::rename(tmp, p);
}

/// Loads a cached basis built with the same family and options; false if absent or inconsistent.
inline bool read_basis(const std::filesystem::path& p, const PowerFamily& fam, const BasisOptions& opt, CornerBasis& B) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::uint32_t magic = 0;
  std::int64_t K = 0, rows = 0, ns = 0;
  if (!detail::read_pod(in, magic) || magic != detail::kBasisMagic) return false;
  if (!detail::read_pod(in, K) || !detail::read_pod(in, rows) || !detail::read_pod(in, ns)) return false;
  CornerBasis R;
  R.family = fam;
  R.options = opt;
  R.grid = NestedGrid::build(fam);
  if (K <= 0 || rows != static_cast<std::int64_t>(R.grid.x.size())) return false;
  R.K = static_cast<int>(K);
  if (!detail::read_pod(in, R.cond_U)) return false;
  R.singular_values.resize(ns);
  R.phi.resize(rows, K + 1);
  R.nodes.resize(K);
  R.weights.resize(K);
  R.U.resize(K, K);
  if (!detail::read_doubles(in, R.singular_values.data(), ns) || !detail::read_doubles(in, R.phi.data(), R.phi.size()) ||
      !detail::read_doubles(in, R.nodes.data(), K) || !detail::read_doubles(in, R.weights.data(), K) ||
      !detail::read_doubles(in, R.U.data(), R.U.size())) {
    return false;
  }
  B = std::move(R);
  return true;
}

/// Basis from CORNERBIE_CACHE when present, otherwise built (and stored when the cache is set).
template <typename Real = long double>
CornerBasis load_or_build_basis(const PowerFamily& fam = {}, const BasisOptions& opt = {}) {
  const auto dir = cache_directory();
  CornerBasis B;
  if (dir && read_basis(*dir / basis_key(fam, opt), fam, opt, B)) return B;
  B = build_corner_basis<Real>(fam, opt);
  if (dir) write_basis(*dir / basis_key(fam, opt), B);
  return B;
}

}  // namespace cornerbie
