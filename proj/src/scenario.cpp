#include "weakform/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "weakform/calculus.hpp"
#include "weakform/config.hpp"
#include "weakform/forms.hpp"
#include "weakform/json_util.hpp"
#include "weakform/quantum.hpp"
#include "weakform/variational.hpp"
#include "weakform/weak_calculus.hpp"

namespace weakform {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Grid at_level(Grid g, std::size_t level) {
  for (std::size_t r = 0; r < level; ++r) g = g.refined();
  return g;
}

Check bounded(std::string name, double value, std::optional<double> tolerance = {}, std::optional<double> lower = {},
              std::string note = {}) {
  Check c;
  c.name = std::move(name);
  c.value = value;
  c.tolerance = tolerance;
  c.lower = lower;
  c.note = std::move(note);
  return c;
}

// Defects across levels: the finest is the value, orders ride along.
Check study(std::string name, const std::vector<double>& defects, std::optional<double> tolerance) {
  Check c = bounded(std::move(name), defects.back(), tolerance);
  c.values = defects;
  if (defects.size() >= 2) c.refinement_orders = refinement_orders(defects);
  return c;
}

// Order bounds from "order": [lo, hi] or "min_order": lo.
void add_order(VerificationReport& r, const ConfigNode& cfg, const std::string& name,
               const std::vector<double>& defects) {
  if (auto o = cfg.get("order")) {
    const auto [lo, hi] = o->range();
    r.add(order_check(name, defects, lo, hi));
  } else if (auto m = cfg.get("min_order")) {
    Check c = order_check(name, defects, m->number(), kInf);
    if (!c.refinement_orders.empty()) c.value = *std::min_element(c.refinement_orders.begin(), c.refinement_orders.end());
    c.tolerance.reset();
    r.add(std::move(c));
  }
}

std::optional<double> tolerance_of(const ConfigNode& cfg, const std::string& key = "tolerance") {
  if (auto t = cfg.get(key)) return t->positive();
  return std::nullopt;
}

std::size_t read_levels(const ConfigNode& root, const RunOptions& opt) {
  const std::size_t own = root.count_or("levels", 1, 1);
  return opt.refine > 0 ? opt.refine : own;
}

// --- weak maps ---------------------------------------------------------------

DensityFn read_sigma(const ConfigNode& n, std::size_t dim) {
  const std::string kind = n.one_of({"gaussian", "expression"});
  DensityFn out = kind == "gaussian" ? gaussian_density(dim, n.at("gaussian").positive())
                                     : expression_density(n.at("expression").expr(), dim);
  n.finish();
  return out;
}

struct MapSpec {
  std::vector<std::vector<double>> A;
  std::vector<std::vector<std::vector<double>>> generators;
  DensityFn sigma;
  Grid params, target;
  std::optional<std::pair<std::size_t, double>> scale;
  double continuity_tolerance = kInf;
  std::size_t stride = 1;

  WeakFunction at(std::size_t level) const {
    const Grid p = at_level(params, level), t = at_level(target, level);
    if (generators.empty() && !scale) return linear_pushforward(A, sigma, p, t);
    AffineFlowSpec spec{A, generators, sigma};
    auto family = affine_flow(spec);
    if (scale) family = scaled_velocity(family, scale->first, scale->second);
    return WeakFunction(p, t, family);
  }
};

MapSpec read_map(const ConfigNode& n) {
  MapSpec s;
  s.params = n.at("params").grid();
  s.target = n.at("target").grid();
  const std::size_t dim = s.target.dim(), m = s.params.dim();
  const ConfigNode a = n.at("A");
  s.A = a.matrix();
  if (s.A.size() != dim || s.A.front().size() != m)
    a.fail("expected " + std::to_string(dim) + " rows of " + std::to_string(m) + " entries");
  if (auto g = n.get("generators")) {
    if (g->size() != m) g->fail("expected one generator per parameter");
    for (std::size_t j = 0; j < m; ++j) {
      auto mat = (*g)[j].matrix();
      if (mat.size() != dim || mat.front().size() != dim) (*g)[j].fail("expected a square matrix of the target dimension");
      s.generators.push_back(std::move(mat));
    }
  }
  s.sigma = read_sigma(n.at("sigma"), dim);
  if (auto sc = n.get("scale_velocity")) {
    const std::size_t axis = sc->at("axis").count();
    if (axis >= m) sc->at("axis").fail("axis out of range");
    s.scale = std::pair{axis, sc->at("factor").number()};
    sc->finish();
  }
  s.continuity_tolerance = n.number_or("continuity_tolerance", kInf);
  s.stride = n.count_or("check_stride", 1, 1);
  n.finish();
  return s;
}

json map_metadata(const MapSpec& s, std::size_t levels) {
  json j = json::array();
  for (std::size_t r = 0; r < levels; ++r)
    j.push_back({{"params", grid_to_json(at_level(s.params, r))}, {"target", grid_to_json(at_level(s.target, r))}});
  return j;
}

struct FormSpec {
  std::size_t degree = 0;
  std::vector<Expr> coefficients;
  KForm on(const Grid& g) const { return form_from_expressions(g, degree, coefficients); }
};

FormSpec read_form(const ConfigNode& n, std::size_t dim) {
  FormSpec f;
  f.degree = n.at("degree").count();
  if (f.degree > dim) n.at("degree").fail("degree exceeds the target dimension");
  const ConfigNode c = n.at("coefficients");
  f.coefficients = c.exprs();
  const std::size_t want = increasing_indices(dim, f.degree).size();
  if (f.coefficients.size() != want)
    c.fail("expected " + std::to_string(want) + " coefficients, one per increasing multi-index");
  n.finish();
  return f;
}

// --- check-continuity ---------------------------------------------------------

void run_continuity(const ConfigNode& root, std::size_t levels, VerificationReport& r) {
  const ConfigNode src = root.at("source");
  const std::string kind = src.one_of({"pushforward", "curve"});
  std::vector<double> defects;
  if (kind == "pushforward") {
    const MapSpec map = read_map(src.at("pushforward"));
    for (std::size_t l = 0; l < levels; ++l) defects.push_back(max_continuity_residual(map.at(l), map.stride));
    r.metadata["levels"] = map_metadata(map, levels);
  } else {
    const ConfigNode c = src.at("curve");
    const Grid g = c.at("grid").grid();
    const Expr rho = c.at("rho").expr();
    const std::vector<Expr> vel = c.at("velocity").exprs();
    if (vel.size() != g.dim()) c.at("velocity").fail("expected one expression per axis");
    const double t0 = c.at("t0").number(), t1 = c.at("t1").number();
    const std::size_t count = c.at("count").count(3);
    c.finish();
    json meta = json::array();
    for (std::size_t l = 0; l < levels; ++l) {
      const Grid gl = at_level(g, l);
      const std::size_t cl = (count - 1) * (std::size_t{1} << l) + 1;
      const WeakCurve curve = curve_from_expressions(gl, rho, vel, t0, t1, cl);
      double worst = 0.0;
      for (std::size_t k = 1; k + 1 < curve.size(); ++k) worst = std::max(worst, continuity_residual(curve, k).max_abs());
      defects.push_back(worst);
      meta.push_back({{"grid", grid_to_json(gl)}, {"snapshots", cl}});
    }
    r.metadata["levels"] = meta;
  }
  src.finish();
  r.add(study("continuity_residual", defects, tolerance_of(root)));
  add_order(r, root, "continuity_order", defects);
}

// --- mixed-partials -----------------------------------------------------------

std::size_t centre_node(const Grid& p) {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < p.dim(); ++a) flat += (p.points(a) / 2) * p.stride(a);
  return flat;
}

std::vector<std::size_t> chosen_nodes(const WeakFunction& wf, bool interior_all) {
  if (!interior_all) return {centre_node(wf.params())};
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < wf.params().size(); ++q)
    if (wf.interior(q)) out.push_back(q);
  return out;
}

void run_mixed(const ConfigNode& root, std::size_t levels, VerificationReport& r) {
  bool any = false;
  if (auto flow = root.get("flow")) {
    any = true;
    MapSpec map = read_map(flow->at("map"));
    const bool all = flow->has("nodes") && flow->at("nodes").choice({"centre", "interior"}) == "interior";
    const std::size_t m = map.params.dim();
    if (m < 2) flow->fail("mixed partials need at least two parameters");
    std::vector<double> defects;
    double antisymmetry = 0.0;
    for (std::size_t l = 0; l < levels; ++l) {
      const WeakFunction wf = map.at(l);
      double worst = 0.0;
      for (std::size_t q : chosen_nodes(wf, all))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = i + 1; j < m; ++j) {
            const VectorField a = mixed_partial_defect(wf, i, j, q), b = mixed_partial_defect(wf, j, i, q);
            worst = std::max(worst, a.max_abs());
            if (l + 1 == levels) antisymmetry = std::max(antisymmetry, (a + b).max_abs());
          }
      defects.push_back(worst);
    }
    r.metadata["flow_levels"] = map_metadata(map, levels);
    std::optional<double> threshold;
    if (auto c = flow->get("control")) {
      const std::size_t axis = c->at("axis").count();
      if (axis >= m) c->at("axis").fail("axis out of range");
      const double factor = c->at("factor").number();
      threshold = c->at("threshold").positive();
      c->finish();
      MapSpec bad = map;
      bad.scale = std::pair{axis, factor};
      const WeakFunction wf = bad.at(levels - 1);
      double worst = 0.0;
      for (std::size_t q : chosen_nodes(wf, all))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = i + 1; j < m; ++j) worst = std::max(worst, mixed_partial_defect(wf, i, j, q).max_abs());
      r.add(bounded("control_defect", worst, std::nullopt, threshold,
                    "inconsistent velocity must exceed the threshold"));
    }
    std::optional<double> tol = tolerance_of(*flow);
    if (!tol) tol = threshold;
    r.add(study("mixed_partial_defect", defects, tol));
    add_order(r, *flow, "mixed_partial_order", defects);
    r.add(bounded("antisymmetry", antisymmetry, 0.0, std::nullopt, "D_ij + D_ji, exactly zero"));
    flow->finish();
  }
  if (auto div = root.get("divergence")) {
    any = true;
    for (std::size_t c = 0; c < div->size(); ++c) {
      const ConfigNode item = (*div)[c];
      const Grid g = item.at("grid").grid();
      const Expr f = item.at("f").expr();
      const std::vector<Expr> V = item.at("V").exprs(), W = item.at("W").exprs();
      if (V.size() != g.dim()) item.at("V").fail("expected one expression per axis");
      if (W.size() != g.dim()) item.at("W").fail("expected one expression per axis");
      const auto field = [](const std::vector<Expr>& e, const Grid& gl) {
        std::vector<ScalarField> comps;
        for (const Expr& x : e) comps.push_back(eval_on_grid(x, gl));
        return VectorField(std::move(comps));
      };
      std::vector<double> defects;
      double equal = 0.0;
      for (std::size_t l = 0; l < levels; ++l) {
        const Grid gl = at_level(g, l);
        const ScalarField fl = eval_on_grid(f, gl);
        const VectorField vl = field(V, gl), wl = field(W, gl);
        defects.push_back(divergence_identity_defect(fl, vl, wl).max_abs());
        if (l == 0) equal = divergence_identity_defect(fl, vl, vl).max_abs();
      }
      const std::string suffix = "[" + std::to_string(c) + "]";
      r.add(study("divergence_defect" + suffix, defects, tolerance_of(item)));
      add_order(r, item, "divergence_order" + suffix, defects);
      r.add(bounded("divergence_equal_fields" + suffix, equal, 0.0, std::nullopt, "V = W, exactly zero"));
      item.finish();
    }
  }
  if (!any) root.fail("expected \"flow\" and/or \"divergence\"");
}

// --- pullback / stokes -------------------------------------------------------

void run_pullback(const ConfigNode& root, std::size_t levels, VerificationReport& r) {
  const MapSpec map = read_map(root.at("map"));
  const FormSpec omega = read_form(root.at("omega"), map.target.dim());
  std::vector<double> defects, continuity;
  for (std::size_t l = 0; l < levels; ++l) {
    const WeakMap F(map.at(l), map.continuity_tolerance, map.stride);
    continuity.push_back(F.continuity());
    defects.push_back(pullback_commutation_defect(F, omega.on(F.function().target())));
  }
  r.metadata["levels"] = map_metadata(map, levels);
  r.add(study("map_continuity", continuity, std::nullopt));
  r.add(study("commutation_defect", defects, tolerance_of(root)));
  add_order(r, root, "commutation_order", defects);
}

void run_stokes(const ConfigNode& root, std::size_t levels, bool r3_flag, VerificationReport& r) {
  const MapSpec map = read_map(root.at("map"));
  const FormSpec omega = read_form(root.at("omega"), map.target.dim());
  const bool r3 = root.boolean_or("r3", false) || r3_flag;
  const double agreement = root.number_or("agreement", 1e-12);
  const std::optional<double> tol = tolerance_of(root);
  std::vector<double> defects, lhs, rhs;
  std::optional<SurfaceStokesResult> surface;
  StokesResult finest;
  for (std::size_t l = 0; l < levels; ++l) {
    const WeakMap F(map.at(l), map.continuity_tolerance, map.stride);
    const KForm w = omega.on(F.function().target());
    finest = weak_stokes_defect(F, w);
    defects.push_back(finest.defect);
    lhs.push_back(finest.lhs);
    rhs.push_back(finest.rhs);
    if (r3 && l + 1 == levels) {
      if (map.target.dim() != 3 || map.params.dim() != 2 || omega.degree != 1)
        root.fail("the R^3 surface path needs a 1-form on R^3 and two parameters");
      std::vector<ScalarField> comps;
      for (std::size_t c = 0; c < 3; ++c) comps.push_back(w[c]);
      surface = r3_surface_stokes(F.function(), VectorField(std::move(comps)), map.continuity_tolerance, map.stride);
    }
  }
  r.metadata["levels"] = map_metadata(map, levels);
  r.add(study("lhs", lhs, std::nullopt));
  r.add(study("rhs", rhs, std::nullopt));
  r.add(study("stokes_defect", defects, tol));
  add_order(r, root, "stokes_order", defects);
  if (surface) {
    r.add(bounded("r3_lhs", surface->lhs));
    r.add(bounded("r3_rhs", surface->rhs));
    r.add(bounded("r3_stokes_defect", surface->defect, tol));
    r.add(bounded("paths_agree", std::max(std::abs(surface->lhs - finest.lhs), std::abs(surface->rhs - finest.rhs)),
                  agreement));
    r.add(bounded("r3_continuity", surface->continuity,
                  std::isfinite(map.continuity_tolerance) ? std::optional(map.continuity_tolerance) : std::nullopt));
    if (surface->flagged) r.warnings.push_back("continuity residual of the surface map exceeds its tolerance");
  }
}

// --- Schroedinger runs ---------------------------------------------------------

struct SolverSpec {
  Grid grid;
  Expr U;
  double hbar = 1.0, m = 1.0, dt = 0.0;
  std::size_t steps = 0, stride = 1;
  std::string psi_kind;
  std::vector<double> centre, momentum;
  double width = 1.0;  // sigma0 or omega
  Expr re, im;

  WaveFunction initial(const Grid& g) const {
    if (psi_kind == "gaussian") return gaussian_packet(g, centre, width, momentum, hbar, m);
    if (psi_kind == "coherent") return coherent_state(g, centre, width, hbar, m);
    return wave_from_expressions(g, re, im, hbar, m);
  }
  // Level l: grid refined l times, dt halved l times, snapshot spacing halved too.
  // Studies compare levels at the base snapshot times, k = 2^l k0.
  Evolution run(std::size_t level) const {
    const Grid g = at_level(grid, level);
    const std::size_t f = std::size_t{1} << level;
    return split_step_evolve(initial(g), U, dt / static_cast<double>(f), steps * f, stride);
  }
};

SolverSpec read_solver(const ConfigNode& n, double hbar, double m) {
  SolverSpec s;
  s.grid = n.at("grid").grid();
  if (!s.grid.all_periodic()) n.at("grid").fail("the solver needs a periodic grid");
  s.U = n.at("U").expr();
  s.hbar = hbar;
  s.m = m;
  s.dt = n.at("dt").positive();
  s.steps = n.at("steps").count(2);
  s.stride = n.count_or("stride", 1, 1);
  if (s.steps % s.stride != 0) n.at("stride").fail("stride must divide steps");
  if (s.steps / s.stride < 2) n.at("stride").fail("need at least three snapshots");
  const ConfigNode psi = n.at("psi");
  const std::size_t dim = s.grid.dim();
  const auto vec = [&](const ConfigNode& v) {
    auto out = v.numbers();
    if (out.size() != dim) v.fail("expected " + std::to_string(dim) + " entries");
    return out;
  };
  if (psi.has("builtin")) {
    s.psi_kind = psi.at("builtin").choice({"gaussian", "coherent"});
    if (s.psi_kind == "gaussian") {
      s.centre = vec(psi.at("centre"));
      s.width = psi.at("sigma0").positive();
      s.momentum = psi.has("momentum") ? vec(psi.at("momentum")) : std::vector<double>(dim, 0.0);
    } else {
      s.centre = vec(psi.at("x0"));
      s.width = psi.at("omega").positive();
    }
  } else {
    s.psi_kind = "expression";
    s.re = psi.at("re").expr();
    s.im = psi.has("im") ? psi.at("im").expr() : parse("0");
  }
  psi.finish();
  n.finish();
  return s;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void run_schrodinger(const ConfigNode& root, std::size_t levels, VerificationReport& r) {
  const double hbar = root.number_or("hbar", 1.0), m = root.number_or("m", 1.0);
  if (!(hbar > 0.0)) root.at("hbar").fail("expected a positive number");
  if (!(m > 0.0)) root.at("m").fail("expected a positive number");
  const SolverSpec solver = read_solver(root.at("solver"), hbar, m);
  const ConfigNode checks = root.at("checks");

  std::vector<Evolution> runs;
  for (std::size_t l = 0; l < levels; ++l) runs.push_back(solver.run(l));
  const Evolution& base = runs.front();
  json meta = json::array();
  for (std::size_t l = 0; l < levels; ++l)
    meta.push_back({{"grid", grid_to_json(runs[l].snapshots.front().grid())},
                    {"dt", solver.dt / static_cast<double>(std::size_t{1} << l)},
                    {"snapshots", runs[l].snapshots.size()}});
  r.metadata["levels"] = meta;

  if (auto c = checks.get("norm")) {
    double worst = 0.0;
    for (const WaveFunction& psi : base.snapshots) worst = std::max(worst, std::abs(norm(psi) - 1.0));
    const double per = worst * 1000.0 / static_cast<double>(std::max<std::size_t>(solver.steps, 1000));
    r.add(bounded("norm_drift_per_1000_steps", per, tolerance_of(*c)));
    c->finish();
  }
  if (auto c = checks.get("energy")) {
    const ScalarField U = eval_on_grid(solver.U, solver.grid);
    const double e0 = energy(base.snapshots.front(), U);
    double worst = 0.0;
    for (const WaveFunction& psi : base.snapshots) worst = std::max(worst, std::abs(energy(psi, U) - e0));
    r.add(bounded("energy_relative_drift", worst / std::max(std::abs(e0), 1e-300), tolerance_of(*c)));
    c->finish();
  }
  if (auto c = checks.get("free_variance")) {
    const double s0 = c->at("sigma0").positive();
    double worst = 0.0;
    for (std::size_t k = 0; k < base.snapshots.size(); ++k) {
      const double t = base.times[k], g = hbar * t / (2 * m * s0 * s0);
      for (double v : position_variance(base.snapshots[k])) worst = std::max(worst, std::abs(v - s0 * s0 * (1 + g * g)));
    }
    r.add(bounded("free_variance_error", worst, tolerance_of(*c)));
    c->finish();
  }
  if (auto c = checks.get("mean_position")) {
    const std::vector<double> x0 = c->at("x0").numbers();
    if (x0.size() != solver.grid.dim()) c->at("x0").fail("expected one entry per axis");
    const double omega = c->at("omega").positive();
    double worst = 0.0;
    for (std::size_t k = 0; k < base.snapshots.size(); ++k) {
      std::vector<double> expect = x0;
      for (double& x : expect) x *= std::cos(omega * base.times[k]);
      worst = std::max(worst, max_abs_diff(mean_position(base.snapshots[k]), expect));
    }
    r.add(bounded("mean_position_error", worst, tolerance_of(*c)));
    c->finish();
  }
  if (auto c = checks.get("newton")) {
    std::vector<double> defects;
    for (std::size_t l = 0; l < levels; ++l) {
      const Evolution& ev = runs[l];
      const std::size_t f = std::size_t{1} << l;
      double worst = 0.0;
      for (std::size_t k = f; k + 1 < ev.snapshots.size(); k += f)
        worst = std::max(worst, weak_newton_residual(ev, solver.U, k).norm);
      defects.push_back(worst);
    }
    r.add(study("weak_newton_residual", defects, tolerance_of(*c)));
    add_order(r, *c, "weak_newton_order", defects);
    c->finish();
  }
  if (auto c = checks.get("balance")) {
    std::vector<double> defects;
    bool flagged = false;
    for (std::size_t l = 0; l < levels; ++l) {
      const Evolution& ev = runs[l];
      const std::size_t f = std::size_t{1} << l;
      double worst = 0.0;
      for (std::size_t k = 0; k < ev.snapshots.size(); k += f) {
        const QuantumBalance b = quantum_potential_balance(madelung_decompose(ev.snapshots[k]));
        worst = std::max(worst, b.norm);
        flagged = flagged || b.flagged;
      }
      defects.push_back(worst);
    }
    if (flagged) r.warnings.push_back("density reaches the box faces; the integral of rho grad Q assumes decay");
    r.add(study("quantum_potential_balance", defects, tolerance_of(*c)));
    add_order(r, *c, "quantum_potential_balance_order", defects);
    c->finish();
  }
  if (auto c = checks.get("ground_state")) {
    // Spread of U + Q over nodes above the floor.
    const ScalarField U = eval_on_grid(solver.U, solver.grid);
    double worst = 0.0;
    std::vector<double> spreads;
    for (const WaveFunction& psi : base.snapshots) {
      const MadelungState s = madelung_decompose(psi);
      const double floor = 1e-13 * s.rho.field().max();
      double lo = kInf, hi = -kInf;
      for (std::size_t i = 0; i < U.size(); ++i) {
        if (s.rho[i] < floor) continue;
        lo = std::min(lo, U[i] + s.Q[i]);
        hi = std::max(hi, U[i] + s.Q[i]);
      }
      worst = std::max(worst, hi - lo);
      spreads.push_back(hi - lo);
    }
    // The sampled state is the ground state; later snapshots add split-step
    // roundoff, which log derivatives amplify near the floor edge.
    r.add(bounded("ground_state_U_plus_Q_spread", spreads.front(), tolerance_of(*c), std::nullopt,
                  "initial state, nodes with rho >= 1e-13 max rho"));
    Check evolved = bounded("evolved_U_plus_Q_spread", worst, std::nullopt, std::nullopt, "per snapshot, diagnostic");
    evolved.values = spreads;
    r.add(std::move(evolved));
    c->finish();
  }
  if (auto c = checks.get("equivalence")) {
    std::vector<double> defects, continuity;
    double cross = 0.0, printed = 0.0, curl = 0.0;
    for (std::size_t l = 0; l < levels; ++l) {
      const Evolution& ev = runs[l];
      const std::size_t f = std::size_t{1} << l;
      const std::vector<EquivalenceEntry> entries = schrodinger_el_equivalence(ev, solver.U);
      double worst = 0.0, cont = 0.0;
      for (std::size_t j = 0; j < entries.size(); ++j) {
        const EquivalenceEntry& e = entries[j];
        const bool shared = (j + 1) % f == 0;  // snapshot k = j + 1 exists at every level
        cross = std::max(cross, e.cross_check);
        printed = std::max(printed, e.cross_check_printed);
        if (l == 0) curl = std::max(curl, e.curl_linf);
        if (!shared) continue;
        worst = std::max(worst, e.el_l1);
        cont = std::max(cont, e.continuity_l1);
      }
      defects.push_back(worst);
      continuity.push_back(cont);
    }
    r.add(study("schrodinger_el_residual", defects, tolerance_of(*c)));
    add_order(r, *c, "schrodinger_el_order", defects);
    r.add(study("madelung_continuity", continuity, tolerance_of(*c, "continuity_tolerance")));
    const std::optional<double> cross_tol = tolerance_of(*c, "cross_tolerance");
    r.add(bounded("assembly_paths_agree", cross, cross_tol, std::nullopt,
                  "Madelung sign: rho(m DV/Dt + grad U + grad Q) against the weak E-L residual"));
    r.add(bounded("assembly_paths_agree_printed_sign", printed, cross_tol, std::nullopt,
                  "printed sign: rho(m DV/Dt + grad U - grad Q) against the Bohm functional"));
    if (solver.grid.dim() >= 2) r.add(bounded("velocity_curl", curl, tolerance_of(*c, "curl_tolerance")));
    c->finish();
  }
  checks.finish();
}

// --- euler-lagrange ------------------------------------------------------------

struct FunctionalSpec {
  std::string builtin;  // bohm, madelung, none, or empty for expressions
  Expr F, fy;
  std::vector<Expr> fyi;
  std::vector<std::vector<Expr>> fyij;
  double hbar = 1.0, m = 1.0;

  std::shared_ptr<const DensityFunctional> make(std::size_t dim, const ConfigNode& where) const {
    if (builtin == "bohm") return bohm_functional(hbar, m);
    if (builtin == "madelung") return madelung_functional(hbar, m);
    if (builtin == "none") return no_functional();
    if (fyi.size() != dim || fyij.size() != dim) where.fail("functional partials do not match dimension " + std::to_string(dim));
    try {
      return expression_functional(dim, F, fy, fyi, fyij);
    } catch (const InvalidArgument& e) {
      where.fail(e.what());
    }
  }
};

FunctionalSpec read_functional(const ConfigNode& n, double hbar, double m) {
  FunctionalSpec f;
  f.hbar = hbar;
  f.m = m;
  if (n.is_string()) {
    f.builtin = n.choice({"bohm", "madelung", "none"});
    return f;
  }
  f.F = n.at("F").expr();
  f.fy = n.at("dF_dy").expr();
  f.fyi = n.at("dF_dyi").exprs();
  const ConfigNode g = n.at("dF_dyij");
  for (std::size_t i = 0; i < g.size(); ++i) f.fyij.push_back(g[i].exprs());
  n.finish();
  return f;
}

struct LagrangianSpec {
  bool builtin = false;
  Expr U, L;
  std::vector<Expr> dx, dv;
  double m = 1.0;

  std::shared_ptr<const Lagrangian> make(std::size_t dim, const ConfigNode& where) const {
    if (builtin) return kinetic_minus_potential(dim, m, U);
    if (dx.size() != dim || dv.size() != dim) where.fail("Lagrangian partials do not match dimension " + std::to_string(dim));
    try {
      return expression_lagrangian(dim, L, dx, dv);
    } catch (const InvalidArgument& e) {
      where.fail(e.what());
    }
  }
};

LagrangianSpec read_lagrangian(const ConfigNode& n, double m) {
  LagrangianSpec s;
  s.m = m;
  if (n.has("builtin")) {
    n.at("builtin").choice({"kinetic_minus_potential"});
    s.builtin = true;
    s.U = n.at("U").expr();
  } else {
    s.L = n.at("L").expr();
    s.dx = n.at("dL_dx").exprs();
    s.dv = n.at("dL_dv").exprs();
  }
  n.finish();
  return s;
}

void run_euler_lagrange(const ConfigNode& root, std::size_t levels, VerificationReport& r) {
  const double hbar = root.number_or("hbar", 1.0), m = root.number_or("m", 1.0);
  if (!(hbar > 0.0)) root.at("hbar").fail("expected a positive number");
  if (!(m > 0.0)) root.at("m").fail("expected a positive number");
  const ConfigNode fnode = root.at("functional");
  const FunctionalSpec functional = read_functional(fnode, hbar, m);
  const DerivativeMode mode =
      root.has("mode") && root.at("mode").choice({"log", "direct"}) == "direct" ? DerivativeMode::direct
                                                                                 : DerivativeMode::log;
  bool any = false;

  if (auto id = root.get("identity")) {
    any = true;
    for (std::size_t c = 0; c < id->size(); ++c) {
      const ConfigNode item = (*id)[c];
      const Grid g = item.at("grid").grid();
      const Expr rho = item.at("rho").expr();
      const auto F = functional.make(g.dim(), fnode);
      std::vector<double> log_defects, direct_defects;
      for (std::size_t l = 0; l < levels; ++l) {
        const DensityField d = DensityField::normalized(eval_on_grid(rho, at_level(g, l)));
        log_defects.push_back(functional_identity_defect(*F, d, DerivativeMode::log).max_abs());
        direct_defects.push_back(functional_identity_defect(*F, d, DerivativeMode::direct).max_abs());
      }
      const std::string suffix = "[" + std::to_string(c) + "]";
      Check log = study("identity_log" + suffix, log_defects, tolerance_of(item));
      log.value = log_defects.front();
      log.refinement_orders.clear();  // roundoff, no order to measure
      log.note = "log-form jets, value at the base resolution";
      r.add(std::move(log));
      r.add(study("identity_direct" + suffix, direct_defects, std::nullopt));
      add_order(r, item, "identity_direct_order" + suffix, direct_defects);
      item.finish();
    }
  }

  std::optional<LagrangianSpec> lagrangian;
  if (auto l = root.get("lagrangian")) lagrangian = read_lagrangian(*l, m);

  if (auto cnode = root.get("curve")) {
    any = true;
    if (!lagrangian) root.fail("a curve needs a \"lagrangian\"");
    std::function<WeakCurve(std::size_t)> curve_at;
    if (cnode->has("schrodinger")) {
      const SolverSpec solver = read_solver(cnode->at("schrodinger"), hbar, m);
      curve_at = [solver](std::size_t l) { return madelung_curve(solver.run(l)); };
    } else {
      const Grid g = cnode->at("grid").grid();
      const Expr rho = cnode->at("rho").expr();
      const std::vector<Expr> vel = cnode->at("velocity").exprs();
      if (vel.size() != g.dim()) cnode->at("velocity").fail("expected one expression per axis");
      const double t0 = cnode->at("t0").number(), t1 = cnode->at("t1").number();
      const std::size_t count = cnode->at("count").count(3);
      curve_at = [=](std::size_t l) {
        return curve_from_expressions(at_level(g, l), rho, vel, t0, t1, (count - 1) * (std::size_t{1} << l) + 1);
      };
    }
    cnode->finish();

    const WeakCurve base = curve_at(0);
    const std::size_t dim = base.grid().dim();
    const auto L = lagrangian->make(dim, root.at("lagrangian"));
    const auto F = functional.make(dim, fnode);
    r.metadata["curve"] = {{"grid", grid_to_json(base.grid())}, {"times", base.times()}};

    if (auto res = root.get("residual")) {
      std::vector<double> l1;
      double bracket = 0.0;
      for (std::size_t l = 0; l < levels; ++l) {
        const WeakCurve curve = l == 0 ? base : curve_at(l);
        double worst = 0.0;
        for (std::size_t k = 1; k + 1 < curve.size(); ++k) {
          const ElResidual e = weak_el(curve, *L, *F, k, mode);
          worst = std::max(worst, e.weighted_l1);
          if (l == 0) bracket = std::max(bracket, e.bracket_linf);
        }
        l1.push_back(worst);
      }
      r.add(study("el_residual_l1", l1, tolerance_of(*res)));
      add_order(r, *res, "el_residual_order", l1);
      r.add(bounded("el_bracket_linf", bracket, std::nullopt, std::nullopt,
                    "bracket without the density factor, on rho >= 1e-13 max rho"));
      res->finish();
    }
    if (auto v = root.get("variation")) {
      const std::vector<Expr> W = v->at("W").exprs();
      if (W.size() != dim) v->at("W").fail("expected one expression per axis");
      const double ds = v->at("ds").positive();
      Variation var = [&] {
        try {
          return build_variation(base, W, ds);
        } catch (const PreconditionError& e) {
          v->at("W").fail(e.what());
        }
      }();
      const GradientCheck g = variation_gradient_check(var, *L, *F, mode);
      r.add(bounded("dS_fd", std::abs(g.fd), tolerance_of(*v, "fd_tolerance"), std::nullopt,
                    "|(S(+ds) - S(-ds)) / 2ds|"));
      r.add(bounded("dS_formula", std::abs(g.formula), tolerance_of(*v, "formula_tolerance"), std::nullopt,
                    "|-sum_k dt integral of residual . W|"));
      r.add(bounded("gradient_rel_err", g.rel_err, tolerance_of(*v, "rel_tolerance")));
      r.metadata["variation"] = {{"ds", ds}, {"fd", g.fd}, {"formula", g.formula}};
      v->finish();
    }
  }
  if (!any) root.fail("expected \"identity\" and/or \"curve\"");
}

}  // namespace

const std::vector<std::string>& scenario_commands() {
  static const std::vector<std::string> c{"check-continuity", "mixed-partials", "pullback",
                                          "stokes",           "euler-lagrange", "schrodinger"};
  return c;
}

VerificationReport run_scenario(const std::string& command, const json& config, const RunOptions& options) {
  const ConfigNode root(config, "");
  if (!root.is_object()) root.fail("a scenario config is a JSON object");
  const std::string kind = root.at("kind").choice(scenario_commands());
  if (kind != command) root.at("kind").fail("this config is for \"" + kind + "\", not \"" + command + "\"");

  VerificationReport r;
  r.scenario = root.at("name").string();
  r.command = command;
  if (auto d = root.get("description")) r.metadata["description"] = d->string();
  r.provenance.config_hash = config_hash(config);
  r.provenance.timestamp = build_timestamp();
  const std::size_t levels = read_levels(root, options);
  r.metadata["refinement_levels"] = levels;

  if (kind == "check-continuity")
    run_continuity(root, levels, r);
  else if (kind == "mixed-partials")
    run_mixed(root, levels, r);
  else if (kind == "pullback")
    run_pullback(root, levels, r);
  else if (kind == "stokes")
    run_stokes(root, levels, options.r3, r);
  else if (kind == "euler-lagrange")
    run_euler_lagrange(root, levels, r);
  else
    run_schrodinger(root, levels, r);
  root.finish();
  return r;
}

}  // namespace weakform
