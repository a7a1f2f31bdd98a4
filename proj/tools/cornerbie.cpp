// cornerbie: batch driver for the corner-aware Laplace BIE solver.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cornerbie/assembly.hpp"
#include "cornerbie/corner_basis.hpp"
#include "cornerbie/corner_resolve.hpp"
#include "cornerbie/evaluate.hpp"
#include "cornerbie/geometry.hpp"
#include "cornerbie/io.hpp"
#include "cornerbie/parallel.hpp"
#include "cornerbie/problems.hpp"
#include "cornerbie/reference.hpp"
#include "cornerbie/singular_quadrature.hpp"
#include "cornerbie/solve.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cornerbie;

namespace {

// ---- config access with field paths in diagnostics ----

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::ConfigError, "field '" + path + "': " + why);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const json* find(const json& j, const std::string& key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double num(const json& j, const std::string& key, const std::string& path, double def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_number()) bad_field(join(path, key), "expected a number");
  return v->get<double>();
}

int integer(const json& j, const std::string& key, const std::string& path, int def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_number_integer()) bad_field(join(path, key), "expected an integer");
  return v->get<int>();
}

bool boolean(const json& j, const std::string& key, const std::string& path, bool def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_boolean()) bad_field(join(path, key), "expected true or false");
  return v->get<bool>();
}

std::string str(const json& j, const std::string& key, const std::string& path, const std::string& def) {
  const json* v = find(j, key);
  if (!v) return def;
  if (!v->is_string()) bad_field(join(path, key), "expected a string");
  return v->get<std::string>();
}

Vec2 point(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) bad_field(path, "expected [x, y]");
  return Vec2(v[0].get<double>(), v[1].get<double>());
}

// ---- experiment description ----

enum class DataType { Charges, Harmonic, Normal, Edge };

struct DataSpec {
  DataType type = DataType::Charges;
  std::vector<Charge> charges;
  HarmonicPolynomial harmonic;
  int component = 0;
  std::vector<std::string> edge_expr;
};

struct ResolveRequest {
  int corner = 0;
  double radius_rel = 1e-12;  // in units of the corner half-length
};

struct Config {
  std::string name = "experiment";
  std::vector<Vec2> vertices;
  BieKind kind = BieKind::InteriorDirichlet;
  DataSpec data;
  double eps = 1e-13;
  std::uint64_t seed = 12345;
  MeshOptions mesh;
  AssemblyOptions assembly;
  int circle_count = 0;
  double circle_factor = 1.5;
  int grid_n = 0;
  double grid_pad = 0.5;
  std::vector<PolarGridSpec> polar;  // radii relative to delta until resolved
  std::vector<ResolveRequest> resolve;
  bool polarization = false;
  bool reference = false;
  ReferenceOptions ref;
  std::map<std::string, double> tol;
  fs::path base;
};

double edge_expression(const std::string& id, const Vec2& x, const Vec2& n, const std::string& path) {
  if (id == "zero") return 0.0;
  if (id == "one") return 1.0;
  if (id == "x") return x.x();
  if (id == "y") return x.y();
  if (id == "xy") return x.x() * x.y();
  if (id == "x2-y2") return x.x() * x.x() - x.y() * x.y();
  if (id == "nx") return n.x();
  if (id == "ny") return n.y();
  bad_field(path, "unknown expression id '" + id + "' (zero, one, x, y, xy, x2-y2, nx, ny)");
}

DataSpec parse_data(const json& d, const Polygon& P, std::uint64_t seed) {
  DataSpec s;
  const std::string type = str(d, "type", "data", "charges");
  if (type == "charges") {
    s.type = DataType::Charges;
    if (const json* cs = find(d, "charges")) {
      if (!cs->is_array()) bad_field("data.charges", "expected an array");
      for (std::size_t k = 0; k < cs->size(); ++k) {
        const std::string p = "data.charges[" + std::to_string(k) + "]";
        const json& c = (*cs)[k];
        const json* x = find(c, "x");
        if (!x) bad_field(p + ".x", "missing");
        s.charges.push_back(Charge{point(*x, p + ".x"), num(c, "q", p, 1.0)});
      }
    }
    if (const json* r = find(d, "random")) {
      const Vec2 c = find(*r, "center") ? point((*r)["center"], "data.random.center") : centroid(P);
      const int n = integer(*r, "count", "data.random", 3);
      const double rad = num(*r, "radius", "data.random", 0.05);
      const bool zm = boolean(*r, "zero_mean", "data.random", false);
      const auto extra = random_charges(n, c, rad, seed, zm);
      s.charges.insert(s.charges.end(), extra.begin(), extra.end());
    }
    if (s.charges.empty()) bad_field("data.charges", "no charges given");
  } else if (type == "harmonic") {
    s.type = DataType::Harmonic;
    const int deg = integer(d, "degree", "data", 5);
    if (deg < 0 || deg > 40) bad_field("data.degree", "must lie in [0, 40]");
    const Vec2 c = find(d, "center") ? point(d["center"], "data.center") : centroid(P);
    s.harmonic = random_harmonic(deg, seed, c);
  } else if (type == "normal") {
    s.type = DataType::Normal;
    s.component = integer(d, "component", "data", 0);
    if (s.component != 0 && s.component != 1) bad_field("data.component", "must be 0 or 1");
  } else if (type == "edge") {
    s.type = DataType::Edge;
    const json* e = find(d, "expressions");
    if (!e || !e->is_array() || static_cast<int>(e->size()) != P.size()) bad_field("data.expressions", "need one id per edge");
    for (std::size_t k = 0; k < e->size(); ++k) {
      if (!(*e)[k].is_string()) bad_field("data.expressions[" + std::to_string(k) + "]", "expected a string");
      s.edge_expr.push_back((*e)[k].get<std::string>());
      edge_expression(s.edge_expr.back(), Vec2::Zero(), Vec2::Zero(), "data.expressions[" + std::to_string(k) + "]");
    }
  } else {
    bad_field("data.type", "unknown type '" + type + "' (charges, harmonic, normal, edge)");
  }
  return s;
}

Config parse_config(const json& j, const fs::path& base, std::optional<double> eps, std::optional<std::uint64_t> seed) {
  if (!j.is_object()) bad_field("<root>", "expected an object");
  Config c;
  c.base = base;
  c.name = str(j, "name", "", "experiment");
  if (const json* p = find(j, "polygon")) {
    if (p->is_string()) {
      try {
        c.vertices = read_polygon_json((base / p->get<std::string>()).string());
      } catch (const Error& e) {
        bad_field("polygon", e.what());
      }
    } else {
      try {
        c.vertices = polygon_vertices(*p);
      } catch (const Error& e) {
        bad_field("polygon", e.what());
      }
    }
  } else {
    bad_field("polygon", "missing");
  }
  const Polygon P = build_polygon(c.vertices);
  try {
    c.kind = parse_bie_kind(str(j, "bie", "", "interior_dirichlet"));
  } catch (const Error& e) {
    bad_field("bie", e.what());
  }
  c.eps = eps ? *eps : num(j, "eps", "", 1e-13);
  if (!(c.eps > 1e-15 && c.eps < 1e-4)) bad_field("eps", "must lie in (1e-15, 1e-4)");
  c.seed = seed ? *seed : static_cast<std::uint64_t>(integer(j, "seed", "", 12345));
  const json empty = json::object();
  const json& d = find(j, "data") ? j["data"] : empty;
  c.data = parse_data(d, P, c.seed);

  const json& m = find(j, "mesh") ? j["mesh"] : empty;
  if (find(m, "delta")) c.mesh.delta = num(m, "delta", "mesh", 0.0);
  c.mesh.delta_fraction = num(m, "delta_fraction", "mesh", c.mesh.delta_fraction);
  c.mesh.smooth_order = integer(m, "order", "mesh", c.mesh.smooth_order);
  c.mesh.max_panel_length = num(m, "max_panel_length", "mesh", 0.0);
  const json& s = find(j, "solver") ? j["solver"] : empty;
  c.assembly.paranoid = boolean(s, "paranoid", "solver", false);

  const json& t = find(j, "targets") ? j["targets"] : empty;
  const bool exterior = !is_interior(c.kind);
  if (const json* ci = find(t, "circle")) {
    c.circle_count = integer(*ci, "count", "targets.circle", 1000);
    c.circle_factor = num(*ci, "factor", "targets.circle", 1.5);
  } else if (exterior) {
    c.circle_count = 1000;
  }
  if (const json* g = find(t, "grid")) {
    c.grid_n = integer(*g, "n", "targets.grid", 40);
    c.grid_pad = num(*g, "pad", "targets.grid", exterior ? 0.5 : 0.0);
  } else if (!exterior) {
    c.grid_n = 40;
    c.grid_pad = 0.0;
  }
  if (const json* pg = find(t, "polar")) {
    if (!pg->is_array()) bad_field("targets.polar", "expected an array");
    for (std::size_t k = 0; k < pg->size(); ++k) {
      const std::string p = "targets.polar[" + std::to_string(k) + "]";
      const json& e = (*pg)[k];
      PolarGridSpec g;
      g.corner = integer(e, "corner", p, 0);
      if (g.corner < 0 || g.corner >= P.size()) bad_field(p + ".corner", "no such vertex");
      g.r_min = num(e, "r_min", p, 1e-12);
      g.r_max = num(e, "r_max", p, 1.0);
      g.n_r = integer(e, "n_r", p, 13);
      g.n_theta = integer(e, "n_theta", p, 8);
      g.interior = boolean(e, "interior", p, !exterior);
      if (!(g.r_min > 0.0 && g.r_min <= g.r_max && g.r_max <= 1.0)) bad_field(p, "need 0 < r_min <= r_max <= 1 (units of delta)");
      if (g.n_r < 1 || g.n_theta < 1) bad_field(p, "n_r and n_theta must be positive");
      c.polar.push_back(g);
    }
  }
  if (const json* r = find(j, "resolve")) {
    if (!r->is_array()) bad_field("resolve", "expected an array");
    for (std::size_t k = 0; k < r->size(); ++k) {
      const std::string p = "resolve[" + std::to_string(k) + "]";
      ResolveRequest q;
      q.corner = integer((*r)[k], "corner", p, 0);
      q.radius_rel = num((*r)[k], "radius", p, 1e-12);
      if (q.corner < 0 || q.corner >= P.size()) bad_field(p + ".corner", "no such vertex");
      if (!(q.radius_rel > 0.0 && q.radius_rel < 1.0)) bad_field(p + ".radius", "must lie in (0, 1) (units of delta)");
      c.resolve.push_back(q);
    }
  }
  c.polarization = boolean(j, "polarization", "", false);
  if (const json* r = find(j, "reference")) {
    c.reference = boolean(*r, "enabled", "reference", true);
    c.ref.levels = integer(*r, "levels", "reference", 100);
    c.ref.max_nodes = static_cast<std::size_t>(integer(*r, "max_nodes", "reference", 20000));
    c.ref.adaptive_near = boolean(*r, "adaptive_near", "reference", false);
    if (const json* cl = find(*r, "corner_levels")) {
      if (!cl->is_array() || static_cast<int>(cl->size()) != P.size()) bad_field("reference.corner_levels", "need one depth per vertex");
      for (const auto& v : *cl) c.ref.corner_levels.push_back(v.get<int>());
    }
  } else {
    c.ref.levels = 100;
  }
  if (const json* tl = find(j, "tolerances")) {
    if (!tl->is_object()) bad_field("tolerances", "expected an object");
    for (auto it = tl->begin(); it != tl->end(); ++it) {
      if (!it->is_number()) bad_field("tolerances." + it.key(), "expected a number");
      c.tol[it.key()] = it->get<double>();
    }
  }

  // data/kind consistency
  if (c.data.type == DataType::Charges) {
    double q = 0.0;
    for (std::size_t k = 0; k < c.data.charges.size(); ++k) {
      const bool in = point_in_polygon(P, c.data.charges[k].x);
      if (in != exterior) {
        bad_field("data.charges[" + std::to_string(k) + "]", exterior ? "exterior problems need charges inside the polygon"
                                                                      : "interior problems need charges outside the polygon");
      }
      q += c.data.charges[k].q;
    }
    if (c.kind == BieKind::ExteriorDirichlet && std::abs(q) > 1e-12) {
      bad_field("data.charges", "exterior Dirichlet data must be bounded: strengths must sum to 0");
    }
  }
  if (c.data.type == DataType::Harmonic && exterior) bad_field("data.type", "harmonic polynomials only for interior problems");
  return c;
}

// ---- pipeline ----

struct Exact {
  std::function<double(const Vec2&)> u;
  bool up_to_constant = false;
};

std::optional<Exact> exact_solution(const Config& c) {
  if (c.data.type == DataType::Charges) {
    const auto cs = c.data.charges;
    return Exact{[cs](const Vec2& y) { return charge_potential(cs, y); }, c.kind == BieKind::InteriorNeumann};
  }
  if (c.data.type == DataType::Harmonic) {
    const auto h = c.data.harmonic;
    return Exact{[h](const Vec2& y) { return h.value(y); }, c.kind == BieKind::InteriorNeumann};
  }
  return std::nullopt;
}

std::function<double(const Vec2&, const Vec2&)> boundary_data(const Config& c, const Polygon& P) {
  const bool dir = is_dirichlet(c.kind);
  switch (c.data.type) {
    case DataType::Charges: {
      const auto cs = c.data.charges;
      if (dir) return [cs](const Vec2& x, const Vec2&) { return charge_potential(cs, x); };
      return [cs](const Vec2& x, const Vec2& n) { return charge_gradient(cs, x).dot(n); };
    }
    case DataType::Harmonic: {
      const auto h = c.data.harmonic;
      if (dir) return [h](const Vec2& x, const Vec2&) { return h.value(x); };
      return [h](const Vec2& x, const Vec2& n) { return h.gradient(x).dot(n); };
    }
    case DataType::Normal: {
      const int m = c.data.component;
      return [m](const Vec2&, const Vec2& n) { return n(m); };
    }
    case DataType::Edge:
      break;  // per-edge data needs the node's edge; see data_vector
  }
  return {};
}

/// Scaled data vector on D.
Eigen::VectorXd data_vector(const Config& c, const Discretization& D) {
  if (c.data.type != DataType::Edge) return sample_data(D, boundary_data(c, D.polygon));
  Eigen::VectorXd f(D.size());
  for (std::size_t i = 0; i < D.size(); ++i) {
    f(i) = edge_expression(c.data.edge_expr[D.nodes[i].edge], D.global(i), D.normal(i), "data.expressions") *
           std::sqrt(D.nodes[i].weight);
  }
  return f;
}

using Clock = std::chrono::steady_clock;

struct Run {
  Config cfg;
  fs::path out;
  json summary = json::object();
  bool failed_tolerance = false;

  std::unique_ptr<CornerBasis> basis;
  std::unique_ptr<TableCache> tables;
  std::unique_ptr<CornerContext> cc;
  std::unique_ptr<Polygon> polygon;
  std::unique_ptr<Discretization> disc;
  std::unique_ptr<SystemMatrix> A;  // matrix actually factored: Dirichlet form for Neumann kinds
  std::unique_ptr<DensityVector> sigma;
  std::vector<std::unique_ptr<ResolveState>> states;
  std::unique_ptr<ReferenceSolver> reference;
  std::unique_ptr<DensityVector> ref_sigma;

  template <class F>
  void timed(const std::string& stage, F&& f) {
    const auto t0 = Clock::now();
    f();
    summary["timings"][stage] = std::chrono::duration<double>(Clock::now() - t0).count();
  }

  void check_tol(const std::string& key, double value) {
    auto it = cfg.tol.find(key);
    if (it == cfg.tol.end()) return;
    const bool ok = value <= it->second;
    summary["checks"][key] = {{"value", value}, {"tolerance", it->second}, {"pass", ok}};
    if (!ok) failed_tolerance = true;
  }

  void setup() {
    polygon = std::make_unique<Polygon>(build_polygon(cfg.vertices));
    timed("basis", [&] {
      BasisOptions bo;
      bo.eps = cfg.eps;
      bo.svd_cutoff = cfg.eps / 10.0;
      basis = std::make_unique<CornerBasis>(load_or_build_basis(PowerFamily{}, bo));
    });
    TableOptions to;
    to.eps = cfg.eps;
    to.seed = cfg.seed;
    tables = std::make_unique<TableCache>(*basis, to);
    cc = std::make_unique<CornerContext>(*basis);
    summary["name"] = cfg.name;
    summary["bie"] = to_string(cfg.kind);
    summary["K"] = basis->K;
    summary["eps"] = cfg.eps;
    summary["seed"] = cfg.seed;
  }

  void mesh(bool write) {
    timed("mesh", [&] { disc = std::make_unique<Discretization>(build_mesh(*polygon, *basis, cfg.mesh)); });
    const MeshReport r = validate_mesh(*disc);
    summary["mesh"] = {{"nodes", disc->size()},
                       {"panels", disc->panels.size()},
                       {"corner_delta", disc->corner_delta},
                       {"length_rule", r.length_rule},
                       {"separation_rule", r.separation_rule},
                       {"min_bernstein_ratio", r.min_bernstein_ratio},
                       {"weight_sum_error", r.weight_sum_error}};
    if (write) write_mesh_csv((out / "mesh.csv").string(), *disc);
  }

  void solve() {
    const BieKind form = is_dirichlet(cfg.kind) ? cfg.kind : adjoint_kind(cfg.kind);
    timed("assemble", [&] { A = std::make_unique<SystemMatrix>(assemble(*disc, form, tables.get(), cfg.assembly)); });
    const Eigen::VectorXd f = data_vector(cfg, *disc);
    timed("solve", [&] {
      sigma = std::make_unique<DensityVector>(is_dirichlet(cfg.kind) ? solve_dirichlet(*A, f) : solve_neumann_adjoint(*A, f));
    });
    summary["solve"] = {{"data_norm", f.norm()}, {"density_norm", sigma->values.norm()}, {"weak_only", sigma->weak_only}};
    write_density_csv((out / "density.csv").string(), *disc, *sigma, is_dirichlet(cfg.kind) ? "direct" : "adjoint");
  }

  ResolveState& state_for(int corner) {
    for (auto& s : states)
      if (s->corner == corner) return *s;
    states.push_back(std::make_unique<ResolveState>(init_resolve(*disc, *A, *sigma, corner)));
    return *states.back();
  }

  void resolve_corner(int corner, double radius_rel) {
    ResolveState& S = state_for(corner);
    resolve_to_radius(S, *cc, tables->get(S.alpha), radius_rel * S.delta);
  }

  void resolve() {
    if (!sigma->weak_only) {
      if (!cfg.resolve.empty()) summary["resolve_note"] = "density is pointwise accurate; no resolve needed";
      return;
    }
    timed("resolve", [&] {
      for (const ResolveRequest& q : cfg.resolve) resolve_corner(q.corner, q.radius_rel);
      for (const PolarGridSpec& g : cfg.polar) resolve_corner(g.corner, g.r_min);
    });
  }

  void finish_resolve_logs() {
    json arr = json::array();
    for (auto& s : states) {
      double res = 0.0, mis = 0.0;
      std::optional<double> ref_err;
      for (auto& row : s->log) {
        res = std::max(res, row.residual);
        mis = std::max(mis, row.overlap_mismatch);
        if (row.reference_error) ref_err = std::max(ref_err.value_or(0.0), *row.reference_error);
      }
      json e = {{"corner", s->corner}, {"alpha", s->alpha}, {"levels", s->level}, {"final_half_width", s->h},
                {"max_residual", res}, {"max_overlap_mismatch", mis}};
      if (ref_err) {
        e["max_reference_error"] = *ref_err;
        check_tol("resolve_reference", *ref_err);
      }
      arr.push_back(e);
      write_resolve_log((out / ("resolve_corner" + std::to_string(s->corner) + ".csv")).string(), *s);
    }
    if (!arr.empty()) summary["resolve"] = arr;
  }

  // target sets in global or corner frames
  std::vector<std::pair<std::string, std::vector<FramePoint>>> target_sets() const {
    std::vector<std::pair<std::string, std::vector<FramePoint>>> sets;
    if (cfg.circle_count > 0) sets.emplace_back("circle", circle_targets(*polygon, cfg.circle_count, cfg.circle_factor));
    if (cfg.grid_n > 0) sets.emplace_back("grid", box_targets(*polygon, cfg.grid_n, is_interior(cfg.kind), cfg.grid_pad));
    for (std::size_t k = 0; k < cfg.polar.size(); ++k) {
      PolarGridSpec g = cfg.polar[k];
      const double d = disc->corner_delta[g.corner];
      g.r_min *= d;
      g.r_max *= d;
      sets.emplace_back("polar" + std::to_string(k), polar_grid(*polygon, g));
    }
    return sets;
  }

  void evaluate(bool compare_reference) {
    const auto exact = exact_solution(cfg);
    std::unique_ptr<std::pair<Discretization, DensityVector>> resolved;
    if (!states.empty()) {
      std::vector<const ResolveState*> ptrs;
      for (auto& s : states) ptrs.push_back(s.get());
      resolved = std::make_unique<std::pair<Discretization, DensityVector>>(resolved_discretization(*disc, *sigma, ptrs, *cc));
    }
    const Discretization& D = resolved ? resolved->first : *disc;
    const DensityVector& s = resolved ? resolved->second : *sigma;
    std::map<std::string, double> err_by_class, ref_by_class;
    std::map<std::string, int> count_by_class;
    json sets = json::object();
    timed("evaluate", [&] {
      for (auto& [label, pts] : target_sets()) {
        std::vector<Classification> cls(pts.size());
        for (std::size_t k = 0; k < pts.size(); ++k) cls[k] = classify(D, pts[k]);
        const std::vector<double> u = eval_potential(D, s, pts, cc.get());
        std::vector<double> ref;
        if (exact) {
          ref.resize(pts.size());
          for (std::size_t k = 0; k < pts.size(); ++k) ref[k] = exact->u(to_global(*polygon, pts[k]));
          if (exact->up_to_constant && !pts.empty()) {
            const double off = u[0] - ref[0];
            for (double& r : ref) r += off;
          }
        }
        std::vector<double> uref;
        if (compare_reference && reference) uref = eval_potential(reference->disc(), *ref_sigma, pts, nullptr);
        double emax = 0.0, rmax = 0.0;
        for (std::size_t k = 0; k < pts.size(); ++k) {
          const std::string c = to_string(cls[k].cls);
          ++count_by_class[c];
          if (exact) {
            const double e = std::abs(u[k] - ref[k]);
            emax = std::max(emax, e);
            err_by_class[c] = std::max(err_by_class[c], e);
          }
          if (!uref.empty()) {
            const double e = std::abs(u[k] - uref[k]);
            rmax = std::max(rmax, e);
            ref_by_class[c] = std::max(ref_by_class[c], e);
          }
        }
        json e = {{"count", pts.size()}};
        if (exact) e["max_error"] = emax;
        if (!uref.empty()) e["max_reference_difference"] = rmax;
        sets[label] = e;
        const std::vector<double>* cmp = !uref.empty() ? &uref : (exact ? &ref : nullptr);
        write_potential_csv((out / ("potential_" + label + ".csv")).string(), *polygon, pts, cls, u, cmp);
      }
    });
    json ev = {{"sets", sets}, {"count_by_class", count_by_class}};
    if (exact) {
      ev["max_error_by_class"] = err_by_class;
      for (auto& [c, e] : err_by_class) check_tol(c, e);
    }
    if (!ref_by_class.empty()) {
      ev["max_reference_difference_by_class"] = ref_by_class;
      double m = 0.0;
      for (auto& [c, e] : ref_by_class) m = std::max(m, e);
      check_tol("reference", m);
    }
    summary["evaluate"] = ev;
  }

  void polarization() {
    Eigen::Matrix2d P;
    timed("polarization", [&] {
      const SystemMatrix Ad = (A && A->kind == BieKind::InteriorDirichlet)
                                  ? *A
                                  : assemble(*disc, BieKind::InteriorDirichlet, tables.get(), cfg.assembly);
      P = polarization_tensor(*disc, Ad);
    });
    json j = {{"P", {{P(0, 0), P(0, 1)}, {P(1, 0), P(1, 1)}}}, {"symmetry_error", std::abs(P(0, 1) - P(1, 0))}};
    check_tol("polarization_symmetry", std::abs(P(0, 1) - P(1, 0)));
    if (cfg.reference) {
      Eigen::Matrix2d R;
      timed("reference_polarization", [&] {
        const ReferenceSolver& ref = reference_solver(BieKind::ExteriorNeumann);
        for (int m = 0; m < 2; ++m) {
          const DensityVector sm = ref.solve(sample_data(ref.disc(), [m](const Vec2&, const Vec2& n) { return n(m); }));
          for (int k = 0; k < 2; ++k) R(m, k) = weak_inner_product(ref.disc(), sm, [k](const Vec2& x) { return x(k); });
        }
      });
      j["reference_P"] = {{R(0, 0), R(0, 1)}, {R(1, 0), R(1, 1)}};
      j["max_reference_difference"] = (P - R).cwiseAbs().maxCoeff();
      check_tol("polarization_reference", (P - R).cwiseAbs().maxCoeff());
    }
    summary["polarization"] = j;
    std::ofstream o(out / "polarization.json");
    o << std::setw(2) << j << '\n';
  }

  std::unique_ptr<ReferenceSolver> ext_neumann_ref;
  const ReferenceSolver& reference_solver(BieKind k) {
    if (reference && reference->kind() == k) return *reference;
    if (!ext_neumann_ref || ext_neumann_ref->kind() != k) {
      if (!disc) mesh(false);
      ext_neumann_ref = std::make_unique<ReferenceSolver>(*polygon, disc->corner_delta, k, cfg.ref);
    }
    return *ext_neumann_ref;
  }

  void reference_solve() {
    timed("reference", [&] {
      reference = std::make_unique<ReferenceSolver>(*polygon, disc->corner_delta, cfg.kind, cfg.ref);
      ref_sigma = std::make_unique<DensityVector>(reference->solve(data_vector(cfg, reference->disc())));
    });
    summary["reference"] = {{"nodes", reference->disc().size()}, {"levels", cfg.ref.levels}};
    write_density_csv((out / "reference_density.csv").string(), reference->disc(), *ref_sigma, "reference");
  }

  /// Legendre-coefficient differences between archived ladder panels and the reference.
  void compare_archives() {
    if (!reference || !ref_sigma) return;
    for (auto& s : states) {
      for (ResolveLogRow& row : s->log) {
        double e = 0.0;
        bool any = false;
        for (const ArchivedPanel& a : s->archive) {
          if (a.level != row.level) continue;
          const auto p = find_panel(reference->disc(), s->corner, a.a, a.b);
          if (!p) continue;
          std::vector<double> vals(a.t.size());
          for (std::size_t j = 0; j < vals.size(); ++j) vals[j] = a.sigma[j] / std::sqrt(a.w[j]);
          const auto ca = legendre_coefficients(vals, a.b - a.a);
          const auto cr = panel_legendre(reference->disc(), *ref_sigma, *p);
          for (std::size_t k = 0; k < ca.size(); ++k) e = std::max(e, std::abs(ca[k] - cr[k]));
          any = true;
        }
        if (any) row.reference_error = e;
      }
    }
  }
};

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::SelfIntersecting:
    case ErrorCode::DegenerateAngle:
    case ErrorCode::MeshInfeasible:
    case ErrorCode::IncompatibleData:
    case ErrorCode::IoError:
      return 2;
    case ErrorCode::TooLarge:
    case ErrorCode::MaxLevels:
      return 4;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplace boundary integral solver for polygons with corner-singular discretizations"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out";
  std::optional<double> eps;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--eps", eps, "accuracy target override");
  app.add_option("--seed", seed, "seed for random data and certification");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"mesh", "build and validate the mesh; writes mesh.csv"},
      {"solve", "assemble and solve; writes density.csv"},
      {"resolve", "solve, then run the corner ladders"},
      {"eval", "solve, resolve as needed, evaluate target sets"},
      {"polarization", "polarization tensor of the polygon"},
      {"reference", "graded-mesh reference solve"},
      {"compare", "adjoint solution against the graded-mesh reference"},
      {"run-experiment", "every stage the config enables"}};
  for (const auto& [n, d] : subs) app.add_subcommand(n, d)->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  set_threads(threads);

  Run run;
  try {
    json j;
    try {
      j = read_json(config_path);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.what());
    }
    run.cfg = parse_config(j, fs::path(config_path).parent_path(), eps, seed);
    run.out = out_dir;
    fs::create_directories(run.out);
    run.summary["command"] = cmd;
    run.setup();
    run.mesh(cmd == "mesh" || cmd == "run-experiment");
    const bool full = cmd == "run-experiment";
    if (cmd == "solve" || cmd == "resolve" || cmd == "eval" || cmd == "compare" || full) run.solve();
    if (cmd == "resolve" || cmd == "eval" || cmd == "compare" || full) run.resolve();
    if (cmd == "reference" || cmd == "compare" || (full && run.cfg.reference)) run.reference_solve();
    if (cmd == "compare" || (full && run.cfg.reference)) run.compare_archives();
    if (cmd == "eval" || cmd == "compare" || full) run.evaluate(cmd == "compare" || (full && run.cfg.reference));
    if (cmd == "reference") {
      // reference potentials alone
      run.sigma = std::make_unique<DensityVector>(*run.ref_sigma);
      run.disc = std::make_unique<Discretization>(run.reference->disc());
      run.states.clear();
      run.evaluate(false);
    }
    if (cmd == "polarization" || (full && run.cfg.polarization)) run.polarization();
    run.finish_resolve_logs();
    run.summary["pass"] = !run.failed_tolerance;
    std::ofstream o(run.out / "summary.json");
    o << std::setw(2) << run.summary << '\n';
    std::cout << std::setw(2) << run.summary << '\n';
    return run.failed_tolerance ? 3 : 0;
  } catch (const Error& e) {
    std::cerr << "cornerbie: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "cornerbie: " << e.what() << '\n';
    return 3;
  }
}
