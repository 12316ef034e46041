#include "weakform/forms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "weakform/calculus.hpp"
#include "weakform/canonical_json.hpp"
#include "weakform/field_io.hpp"
#include "weakform/json_util.hpp"

namespace weakform {

std::vector<MultiIndex> increasing_indices(std::size_t n, std::size_t k) {
  std::vector<MultiIndex> out;
  if (k > n) return out;
  MultiIndex cur(k);
  for (std::size_t a = 0; a < k; ++a) cur[a] = a;
  while (true) {
    out.push_back(cur);
    std::size_t a = k;
    while (a > 0 && cur[a - 1] == n - k + a - 1) --a;
    if (a == 0) break;
    ++cur[a - 1];
    for (std::size_t b = a; b < k; ++b) cur[b] = cur[b - 1] + 1;
  }
  return out;
}

KForm::KForm(Grid grid, std::size_t degree) : grid_(std::move(grid)), degree_(degree) {
  if (degree_ > grid_.dim())
    throw InvalidArgument("form degree " + std::to_string(degree_) + " exceeds the dimension " +
                          std::to_string(grid_.dim()));
  indices_ = increasing_indices(grid_.dim(), degree_);
  coef_.assign(indices_.size(), ScalarField(grid_));
}

KForm::KForm(Grid grid, std::size_t degree, std::vector<ScalarField> coefficients) : KForm(std::move(grid), degree) {
  if (coefficients.size() != coef_.size())
    throw InvalidArgument("a " + std::to_string(degree_) + "-form in dimension " + std::to_string(grid_.dim()) +
                          " has " + std::to_string(coef_.size()) + " coefficients, got " +
                          std::to_string(coefficients.size()));
  for (const ScalarField& c : coefficients) require_same_grid(c.grid(), grid_, "form coefficient");
  coef_ = std::move(coefficients);
}

std::size_t KForm::slot(std::span<const std::size_t> index) const {
  for (std::size_t s = 0; s < indices_.size(); ++s)
    if (std::equal(index.begin(), index.end(), indices_[s].begin(), indices_[s].end())) return s;
  throw InvalidArgument("not an increasing multi-index of this form");
}

double small_det(const std::vector<std::vector<double>>& m) {
  const std::size_t k = m.size();
  switch (k) {
    case 0: return 1.0;
    case 1: return m[0][0];
    case 2: return m[0][0] * m[1][1] - m[0][1] * m[1][0];
    case 3:
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    default: break;
  }
  double s = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::vector<double>> minor;
    for (std::size_t r = 1; r < k; ++r) {
      std::vector<double> row;
      for (std::size_t b = 0; b < k; ++b)
        if (b != c) row.push_back(m[r][b]);
      minor.push_back(std::move(row));
    }
    s += (c % 2 ? -1.0 : 1.0) * m[0][c] * small_det(minor);
  }
  return s;
}

double KForm::evaluate(std::size_t flat, const std::vector<std::vector<double>>& vectors) const {
  if (vectors.size() != degree_) throw InvalidArgument("a k-form takes exactly k vectors");
  for (const auto& v : vectors)
    if (v.size() != grid_.dim()) throw InvalidArgument("vector has the wrong number of components");
  // Evaluate on the arguments in a canonical order and restore the sign, so a
  // swap of arguments negates the result bit for bit.
  std::vector<std::size_t> order(degree_);
  for (std::size_t a = 0; a < degree_; ++a) order[a] = a;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vectors[a] < vectors[b]; });
  for (std::size_t a = 1; a < degree_; ++a)
    if (vectors[order[a]] == vectors[order[a - 1]]) return 0.0;
  bool odd = false;
  for (std::size_t a = 0; a < degree_; ++a)
    for (std::size_t b = a + 1; b < degree_; ++b)
      if (order[a] > order[b]) odd = !odd;
  std::vector<std::vector<double>> m(degree_, std::vector<double>(degree_));
  double s = 0.0;
  for (std::size_t slot = 0; slot < indices_.size(); ++slot) {
    for (std::size_t a = 0; a < degree_; ++a)
      for (std::size_t b = 0; b < degree_; ++b) m[a][b] = vectors[order[a]][indices_[slot][b]];
    s += coef_[slot][flat] * small_det(m);
  }
  return odd ? -s : s;
}

KForm& KForm::operator+=(const KForm& o) {
  require_same_grid(o.grid_, grid_, "form sum");
  if (o.degree_ != degree_) throw InvalidArgument("cannot add forms of different degree");
  for (std::size_t s = 0; s < coef_.size(); ++s) coef_[s] += o.coef_[s];
  return *this;
}

KForm& KForm::operator*=(double c) {
  for (ScalarField& f : coef_) f *= c;
  return *this;
}

double KForm::max_abs() const noexcept {
  double m = 0.0;
  for (const ScalarField& f : coef_) m = std::max(m, f.max_abs());
  return m;
}

KForm operator+(KForm a, const KForm& b) { return a += b; }
KForm operator*(double c, KForm a) { return a *= c; }

KForm form_from_expressions(const Grid& grid, std::size_t degree, const std::vector<Expr>& coefficients) {
  std::vector<ScalarField> c;
  for (const Expr& e : coefficients) c.push_back(eval_on_grid(e, grid, {}));
  return KForm(grid, degree, std::move(c));
}

KForm exterior_derivative(const KForm& omega) {
  const Grid& g = omega.grid();
  const std::size_t k = omega.degree();
  if (k >= g.dim())
    throw InvalidArgument("exterior derivative of a " + std::to_string(k) + "-form in dimension " +
                          std::to_string(g.dim()) + " is not represented");
  KForm out(g, k + 1);
  MultiIndex rest(k);
  for (std::size_t s = 0; s < out.count(); ++s) {
    const MultiIndex& J = out.indices()[s];
    for (std::size_t r = 0; r <= k; ++r) {
      for (std::size_t a = 0, b = 0; a <= k; ++a)
        if (a != r) rest[b++] = J[a];
      ScalarField d = partial(omega[omega.slot(rest)], J[r]);
      if (r % 2) out[s] -= d;
      else out[s] += d;
    }
  }
  return out;
}

WeakMap::WeakMap(WeakFunction wf, double tolerance, std::size_t stride)
    : wf_(std::move(wf)), tol_(tolerance), residual_(max_continuity_residual(wf_, stride)) {
  if (!(residual_ <= tol_))
    throw PreconditionError("weak map continuity residual " + std::to_string(residual_) + " exceeds " +
                            std::to_string(tol_));
}

namespace {

// rho w(V_{J_0}, ..., V_{J_{k-1}}) integrated over the target for one node.
double node_integral(const WeakNode& node, const KForm& omega, const MultiIndex& J) {
  const std::size_t k = omega.degree();
  const double* rho = node.rho.values().data();
  const auto& idx = omega.indices();
  const std::size_t slots = idx.size();
  // coef[s] and vel[s][a][b] = V_{J_a} component idx[s][b]
  std::vector<const double*> coef(slots), vel(slots * k * k);
  for (std::size_t s = 0; s < slots; ++s) {
    coef[s] = omega[s].values().data();
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) vel[(s * k + a) * k + b] = node.vel[J[a]][idx[s][b]].values().data();
  }
  switch (k) {
    case 0: return integrate_with(omega.grid(), [&](std::size_t i) { return rho[i] * coef[0][i]; });
    case 1:
      return integrate_with(omega.grid(), [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t t = 0; t < slots; ++t) s += coef[t][i] * vel[t][i];
        return rho[i] * s;
      });
    case 2:
      return integrate_with(omega.grid(), [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t t = 0; t < slots; ++t) {
          const double* const* v = &vel[4 * t];
          s += coef[t][i] * (v[0][i] * v[3][i] - v[1][i] * v[2][i]);
        }
        return rho[i] * s;
      });
    default: break;
  }
  std::vector<std::vector<double>> m(k, std::vector<double>(k));
  return integrate_with(omega.grid(), [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t t = 0; t < slots; ++t) {
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) m[a][b] = vel[(t * k + a) * k + b][i];
      s += coef[t][i] * small_det(m);
    }
    return rho[i] * s;
  });
}

// Pullbacks of several forms in one pass over the parameter nodes.
std::vector<KForm> pull_all(const WeakFunction& wf, const std::vector<const KForm*>& forms) {
  const Grid& P = wf.params();
  std::vector<KForm> out;
  for (const KForm* f : forms) {
    require_same_grid(f->grid(), wf.target(), "weak pullback form");
    if (f->degree() > wf.m())
      throw InvalidArgument("form degree " + std::to_string(f->degree()) + " exceeds the parameter count " +
                            std::to_string(wf.m()));
    out.emplace_back(P, f->degree());
  }
  const long nodes = static_cast<long>(P.size());
#pragma omp parallel for schedule(dynamic)
  for (long q = 0; q < nodes; ++q) {
    const WeakNode node = wf.node(static_cast<std::size_t>(q));
    for (std::size_t f = 0; f < forms.size(); ++f)
      for (std::size_t s = 0; s < out[f].count(); ++s)
        out[f][s][static_cast<std::size_t>(q)] = node_integral(node, *forms[f], out[f].indices()[s]);
  }
  return out;
}

// Trapezoid integral of f over the face u_axis = lo or hi of the parameter box.
double face_integral(const ScalarField& f, std::size_t axis, bool hi) {
  const Grid& P = f.grid();
  std::vector<std::vector<double>> w;
  for (std::size_t a = 0; a < P.dim(); ++a) w.push_back(axis_weights(P.axis(a), P.spacing(a)));
  const std::size_t at = hi ? P.points(axis) - 1 : 0;
  std::vector<double> terms;
  for (std::size_t q = 0; q < P.size(); ++q) {
    if (P.index_along(q, axis) != at) continue;
    double weight = 1.0;
    for (std::size_t a = 0; a < P.dim(); ++a)
      if (a != axis) weight *= w[a][P.index_along(q, a)];
    terms.push_back(weight * f[q]);
  }
  return pairwise_sum(terms);
}

void require_boxed(const Grid& P) {
  for (std::size_t a = 0; a < P.dim(); ++a)
    if (P.axis(a).periodic) throw PreconditionError("Stokes needs a parameter box with boundary; axis " +
                                                    std::to_string(a) + " is periodic");
}

}  // namespace

ScalarField weak_pullback(const WeakMap& F, const KForm& omega, std::span<const std::size_t> axes) {
  const WeakFunction& wf = F.function();
  if (axes.size() != omega.degree())
    throw InvalidArgument("a " + std::to_string(omega.degree()) + "-form needs " + std::to_string(omega.degree()) +
                          " parameter axes, got " + std::to_string(axes.size()));
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (axes[a] >= wf.m()) throw InvalidArgument("parameter axis out of range");
    if (a > 0 && axes[a] <= axes[a - 1]) throw InvalidArgument("parameter axes must be strictly increasing");
  }
  require_same_grid(omega.grid(), wf.target(), "weak pullback form");
  const MultiIndex J(axes.begin(), axes.end());
  ScalarField out(wf.params());
  const long nodes = static_cast<long>(out.size());
#pragma omp parallel for schedule(dynamic)
  for (long q = 0; q < nodes; ++q)
    out[static_cast<std::size_t>(q)] = node_integral(wf.node(static_cast<std::size_t>(q)), omega, J);
  return out;
}

KForm weak_pullback(const WeakMap& F, const KForm& omega) { return pull_all(F.function(), {&omega}).front(); }

CommutationResult pullback_commutation(const WeakMap& F, const KForm& omega) {
  const KForm d = exterior_derivative(omega);
  std::vector<KForm> pulled = pull_all(F.function(), {&omega, &d});
  KForm dp = exterior_derivative(pulled[0]);
  const WeakFunction& wf = F.function();
  double worst = 0.0;
  for (std::size_t q = 0; q < wf.params().size(); ++q) {
    if (!wf.interior(q)) continue;
    for (std::size_t s = 0; s < dp.count(); ++s) worst = std::max(worst, std::abs(pulled[1][s][q] - dp[s][q]));
  }
  return CommutationResult{worst, std::move(pulled[1]), std::move(dp)};
}

double pullback_commutation_defect(const WeakMap& F, const KForm& omega) {
  return pullback_commutation(F, omega).defect;
}

StokesResult weak_stokes_defect(const WeakMap& F, const KForm& omega) {
  const WeakFunction& wf = F.function();
  const Grid& P = wf.params();
  const std::size_t m = wf.m();
  require_boxed(P);
  if (omega.degree() + 1 != m)
    throw InvalidArgument("Stokes over a " + std::to_string(m) + "-parameter box needs a " + std::to_string(m - 1) +
                          "-form");
  const KForm d = exterior_derivative(omega);
  const std::vector<KForm> pulled = pull_all(wf, {&omega, &d});
  StokesResult r;
  r.lhs = integrate(pulled[1][0]);
  MultiIndex others(m - 1);
  double rhs = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0, c = 0; b < m; ++b)
      if (b != a) others[c++] = b;
    const ScalarField& alpha = pulled[0][pulled[0].slot(others)];
    const double flux = face_integral(alpha, a, true) - face_integral(alpha, a, false);
    rhs += a % 2 ? -flux : flux;
  }
  r.rhs = rhs;
  r.defect = std::abs(r.lhs - r.rhs);
  return r;
}

SurfaceStokesResult r3_surface_stokes(const WeakFunction& wf, const VectorField& field, double tolerance,
                                      std::size_t stride) {
  if (wf.m() != 2 || wf.target().dim() != 3)
    throw InvalidArgument("the surface form needs two parameters and a target in R^3");
  require_same_grid(field.grid(), wf.target(), "surface Stokes field");
  const Grid& P = wf.params();
  require_boxed(P);
  SurfaceStokesResult r;
  r.continuity = max_continuity_residual(wf, stride);
  r.flagged = !(r.continuity <= tolerance);

  const ScalarField c0 = partial(field[2], 1) - partial(field[1], 2);
  const ScalarField c1 = partial(field[0], 2) - partial(field[2], 0);
  const ScalarField c2 = partial(field[1], 0) - partial(field[0], 1);
  ScalarField flux(P), along_u(P), along_v(P);
  const long nodes = static_cast<long>(P.size());
#pragma omp parallel for schedule(dynamic)
  for (long ql = 0; ql < nodes; ++ql) {
    const auto q = static_cast<std::size_t>(ql);
    const WeakNode node = wf.node(q);
    const ScalarField& rho = node.rho.field();
    const VectorField& U = node.vel[0];
    const VectorField& V = node.vel[1];
    flux[q] = integrate_with(wf.target(), [&](std::size_t i) {
      const double n0 = U[1][i] * V[2][i] - U[2][i] * V[1][i];
      const double n1 = U[2][i] * V[0][i] - U[0][i] * V[2][i];
      const double n2 = U[0][i] * V[1][i] - U[1][i] * V[0][i];
      return rho[i] * (c0[i] * n0 + c1[i] * n1 + c2[i] * n2);
    });
    along_u[q] = integrate_with(wf.target(), [&](std::size_t i) {
      return rho[i] * (field[0][i] * U[0][i] + field[1][i] * U[1][i] + field[2][i] * U[2][i]);
    });
    along_v[q] = integrate_with(wf.target(), [&](std::size_t i) {
      return rho[i] * (field[0][i] * V[0][i] + field[1][i] * V[1][i] + field[2][i] * V[2][i]);
    });
  }
  r.lhs = integrate(flux);
  // Counter-clockwise boundary: +v-flow on u = hi, -v-flow on u = lo, and the reverse for u.
  r.rhs = (face_integral(along_v, 0, true) - face_integral(along_v, 0, false)) -
          (face_integral(along_u, 1, true) - face_integral(along_u, 1, false));
  r.defect = std::abs(r.lhs - r.rhs);
  return r;
}

void save_kform(const KForm& omega, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json coefs = nlohmann::json::array();
  for (std::size_t s = 0; s < omega.count(); ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "coef_%05zu.wf", s);
    write_field(dir / name, omega[s]);
    coefs.push_back({{"index", omega.indices()[s]}, {"file", name}});
  }
  const nlohmann::json manifest = {{"schema", 1},
                                   {"kind", "kform"},
                                   {"degree", omega.degree()},
                                   {"grid", grid_to_json(omega.grid())},
                                   {"coefficients", coefs}};
  std::ofstream os(dir / "manifest.json", std::ios::binary);
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << canonical_dump(manifest) << "\n";
}

KForm load_kform(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json", std::ios::binary);
  if (!is) throw IoError("cannot open " + (dir / "manifest.json").string());
  try {
    const auto j = nlohmann::json::parse(std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()));
    if (j.value("schema", 0) != 1 || j.value("kind", "") != "kform") throw IoError("manifest does not describe a form");
    KForm omega(grid_from_json(j.at("grid")), j.at("degree").get<std::size_t>());
    const auto& coefs = j.at("coefficients");
    if (coefs.size() != omega.count()) throw IoError("manifest coefficient count is wrong for the degree");
    for (const auto& c : coefs) {
      const std::size_t s = omega.slot(c.at("index").get<MultiIndex>());
      ScalarField f = read_field(dir / c.at("file").get<std::string>()).scalar();
      require_same_grid(f.grid(), omega.grid(), "stored form coefficient");
      omega[s] = std::move(f);
    }
    return omega;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed form manifest: ") + e.what());
  }
}

}  // namespace weakform
