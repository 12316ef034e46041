#include "weakform/variational.hpp"

#include <cmath>
#include <random>
#include <string>

#include "weakform/calculus.hpp"

namespace weakform {

namespace {

std::vector<std::string> velocity_names(std::size_t dim) {
  std::vector<std::string> v;
  for (std::size_t a = 1; a <= dim; ++a) v.push_back("v" + std::to_string(a));
  return v;
}

class KineticMinusPotential final : public Lagrangian {
 public:
  KineticMinusPotential(std::size_t dim, double m, const Expr& U) : dim_(dim), m_(m), U_(U, dim) {
    if (!(m > 0.0)) throw InvalidArgument("mass must be positive");
    for (const std::string& x : spatial_names(dim)) dU_.emplace_back(derivative(U, x), dim);
  }
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double> x, std::span<const double> v) const override {
    double k = 0.0;
    for (std::size_t a = 0; a < dim_; ++a) k += v[a] * v[a];
    return 0.5 * m_ * k - U_(x);
  }
  void dx(std::span<const double> x, std::span<const double>, std::span<double> out) const override {
    for (std::size_t a = 0; a < dim_; ++a) out[a] = -dU_[a](x);
  }
  void dv(std::span<const double>, std::span<const double> v, std::span<double> out) const override {
    for (std::size_t a = 0; a < dim_; ++a) out[a] = m_ * v[a];
  }

 private:
  std::size_t dim_;
  double m_;
  PointFunction U_;
  std::vector<PointFunction> dU_;
};

class ExpressionLagrangian final : public Lagrangian {
 public:
  ExpressionLagrangian(std::size_t dim, const Expr& L, const std::vector<Expr>& dx, const std::vector<Expr>& dv)
      : dim_(dim), L_(L, dim, velocity_names(dim)) {
    if (dx.size() != dim || dv.size() != dim)
      throw InvalidArgument("Lagrangian partials need one expression per axis");
    for (const Expr& e : dx) dx_.emplace_back(e, dim, velocity_names(dim));
    for (const Expr& e : dv) dv_.emplace_back(e, dim, velocity_names(dim));
  }
  std::size_t dim() const override { return dim_; }
  double value(std::span<const double> x, std::span<const double> v) const override { return L_(x, v); }
  void dx(std::span<const double> x, std::span<const double> v, std::span<double> out) const override {
    for (std::size_t a = 0; a < dim_; ++a) out[a] = dx_[a](x, v);
  }
  void dv(std::span<const double> x, std::span<const double> v, std::span<double> out) const override {
    for (std::size_t a = 0; a < dim_; ++a) out[a] = dv_[a](x, v);
  }

 private:
  std::size_t dim_;
  PointFunction L_;
  std::vector<PointFunction> dx_, dv_;
};

bool close(double analytic, double fd) { return std::abs(analytic - fd) <= 1e-6 * std::max(1.0, std::abs(analytic)); }

double fd_step(double z) { return 1e-5 * std::max(1.0, std::abs(z)); }

}  // namespace

std::shared_ptr<const Lagrangian> kinetic_minus_potential(std::size_t dim, double m, const Expr& U) {
  return std::make_shared<KineticMinusPotential>(dim, m, U);
}

std::shared_ptr<const Lagrangian> expression_lagrangian(std::size_t dim, const Expr& L, std::vector<Expr> dL_dx,
                                                        std::vector<Expr> dL_dv) {
  auto out = std::make_shared<ExpressionLagrangian>(dim, L, dL_dx, dL_dv);
  validate_lagrangian(*out);
  return out;
}

void validate_lagrangian(const Lagrangian& L, std::uint64_t seed) {
  const std::size_t n = L.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> x(n), v(n), gx(n), gv(n);
  std::size_t checked = 0;
  for (int trial = 0; trial < 16; ++trial) {
    for (std::size_t a = 0; a < n; ++a) x[a] = u(rng), v[a] = u(rng);
    L.dx(x, v, gx);
    L.dv(x, v, gv);
    for (std::size_t a = 0; a < n; ++a) {
      for (int which = 0; which < 2; ++which) {
        std::vector<double>& z = which ? v : x;
        const double keep = z[a], h = fd_step(keep);
        z[a] = keep + h;
        const double up = L.value(x, v);
        z[a] = keep - h;
        const double down = L.value(x, v);
        z[a] = keep;
        const double fd = (up - down) / (2 * h), an = which ? gv[a] : gx[a];
        if (!std::isfinite(fd) || !std::isfinite(an)) continue;
        ++checked;
        if (!close(an, fd))
          throw InvalidArgument(std::string("dL/d") + (which ? "v" : "x") + std::to_string(a + 1) + " = " +
                                std::to_string(an) + " disagrees with the finite difference " + std::to_string(fd));
      }
    }
  }
  if (checked == 0) throw InvalidArgument("Lagrangian is not finite on any validation sample");
}

namespace {

class NoFunctional final : public DensityFunctional {
 public:
  double value(double, std::span<const double>, std::span<const double>) const override { return 0.0; }
  void partials(double, std::span<const double>, std::span<const double>, double& fy, std::span<double> fyi,
                std::span<double> fyij) const override {
    fy = 0.0;
    std::fill(fyi.begin(), fyi.end(), 0.0);
    std::fill(fyij.begin(), fyij.end(), 0.0);
  }
  bool vanishes() const override { return true; }
};

class Bohm final : public DensityFunctional {
 public:
  Bohm(double hbar, double m, double sign) : c_(-sign * hbar * hbar / (2 * m)) {
    if (!(hbar > 0.0) || !(m > 0.0)) throw InvalidArgument("hbar and m must be positive");
  }
  double value(double y, std::span<const double> yi, std::span<const double> yij) const override {
    require_positive(y);
    const std::size_t n = yi.size();
    double grad = 0.0, lap = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      grad += yi[a] * yi[a];
      lap += yij[a * n + a];
    }
    return c_ * (-grad / (4 * y * y) + lap / (2 * y));
  }
  void partials(double y, std::span<const double> yi, std::span<const double> yij, double& fy,
                std::span<double> fyi, std::span<double> fyij) const override {
    require_positive(y);
    const std::size_t n = yi.size();
    double grad = 0.0, lap = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      grad += yi[a] * yi[a];
      lap += yij[a * n + a];
    }
    fy = c_ * (grad / (2 * y * y * y) - lap / (2 * y * y));
    for (std::size_t a = 0; a < n; ++a) fyi[a] = c_ * (-yi[a] / (2 * y * y));
    std::fill(fyij.begin(), fyij.end(), 0.0);
    for (std::size_t a = 0; a < n; ++a) fyij[a * n + a] = c_ / (2 * y);
  }

 private:
  static void require_positive(double y) {
    if (!(y > 0.0)) throw PreconditionError("the Bohm functional needs a positive density");
  }
  double c_;
};

std::vector<std::string> jet_names(std::size_t n) {
  std::vector<std::string> names{"y"};
  for (std::size_t a = 1; a <= n; ++a) names.push_back("y" + std::to_string(a));
  for (std::size_t a = 1; a <= n; ++a)
    for (std::size_t b = a; b <= n; ++b) names.push_back("y" + std::to_string(a) + std::to_string(b));
  return names;
}

class ExpressionFunctional final : public DensityFunctional {
 public:
  ExpressionFunctional(std::size_t dim, const Expr& F, const Expr& fy, const std::vector<Expr>& fyi,
                       const std::vector<std::vector<Expr>>& fyij)
      : n_(dim) {
    if (dim == 0 || dim > 9) throw InvalidArgument("density functionals support 1 to 9 dimensions");
    if (fyi.size() != dim || fyij.size() != dim) throw InvalidArgument("functional partials have the wrong shape");
    const auto names = jet_names(dim);
    F_ = Program(F, names);
    fy_ = Program(fy, names);
    for (const Expr& e : fyi) fyi_.emplace_back(e, names);
    for (const auto& row : fyij) {
      if (row.size() != dim) throw InvalidArgument("dF/dy_ij must be n x n");
      for (const Expr& e : row) fyij_.emplace_back(e, names);
    }
  }
  double value(double y, std::span<const double> yi, std::span<const double> yij) const override {
    const auto v = pack(y, yi, yij);
    return run(F_, v);
  }
  void partials(double y, std::span<const double> yi, std::span<const double> yij, double& fy,
                std::span<double> fyi, std::span<double> fyij) const override {
    const auto v = pack(y, yi, yij);
    fy = run(fy_, v);
    for (std::size_t a = 0; a < n_; ++a) fyi[a] = run(fyi_[a], v);
    for (std::size_t a = 0; a < n_ * n_; ++a) fyij[a] = run(fyij_[a], v);
  }

 private:
  std::vector<double> pack(double y, std::span<const double> yi, std::span<const double> yij) const {
    std::vector<double> v{y};
    v.insert(v.end(), yi.begin(), yi.end());
    for (std::size_t a = 0; a < n_; ++a)
      for (std::size_t b = a; b < n_; ++b) v.push_back(yij[a * n_ + b]);
    return v;
  }
  static double run(const Program& p, const std::vector<double>& v) {
    thread_local std::vector<double> stack;
    if (stack.size() < p.stack_size()) stack.resize(p.stack_size());
    return p(v, stack);
  }

  std::size_t n_;
  Program F_, fy_;
  std::vector<Program> fyi_, fyij_;
};

}  // namespace

std::shared_ptr<const DensityFunctional> no_functional() { return std::make_shared<NoFunctional>(); }

std::shared_ptr<const DensityFunctional> bohm_functional(double hbar, double m) {
  return std::make_shared<Bohm>(hbar, m, 1.0);
}

std::shared_ptr<const DensityFunctional> madelung_functional(double hbar, double m) {
  return std::make_shared<Bohm>(hbar, m, -1.0);
}

std::shared_ptr<const DensityFunctional> expression_functional(std::size_t dim, const Expr& F, const Expr& dF_dy,
                                                               std::vector<Expr> dF_dyi,
                                                               std::vector<std::vector<Expr>> dF_dyij) {
  auto out = std::make_shared<ExpressionFunctional>(dim, F, dF_dy, dF_dyi, dF_dyij);
  validate_functional(*out, dim);
  return out;
}

void validate_functional(const DensityFunctional& F, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.5, 2.0), any(-1.0, 1.0);
  std::vector<double> yi(n), yij(n * n), gi(n), gij(n * n);
  const auto fail = [](const std::string& what, double an, double fd) {
    throw InvalidArgument(what + " = " + std::to_string(an) + " disagrees with the finite difference " +
                          std::to_string(fd));
  };
  for (int trial = 0; trial < 16; ++trial) {
    double y = pos(rng);
    for (double& v : yi) v = any(rng);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) yij[a * n + b] = yij[b * n + a] = any(rng);
    double gy;
    F.partials(y, yi, yij, gy, gi, gij);
    {
      const double h = fd_step(y), keep = y;
      y = keep + h;
      const double up = F.value(y, yi, yij);
      y = keep - h;
      const double down = F.value(y, yi, yij);
      y = keep;
      if (!close(gy, (up - down) / (2 * h))) fail("dF/dy", gy, (up - down) / (2 * h));
    }
    for (std::size_t a = 0; a < n; ++a) {
      const double h = fd_step(yi[a]), keep = yi[a];
      yi[a] = keep + h;
      const double up = F.value(y, yi, yij);
      yi[a] = keep - h;
      const double down = F.value(y, yi, yij);
      yi[a] = keep;
      const double fd = (up - down) / (2 * h);
      if (!close(gi[a], fd)) fail("dF/dy" + std::to_string(a + 1), gi[a], fd);
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        if (gij[a * n + b] != gij[b * n + a])
          throw InvalidArgument("dF/dy_ij must be symmetric in the convention used here");
        const double h = fd_step(yij[a * n + b]), keep = yij[a * n + b];
        yij[a * n + b] = yij[b * n + a] = keep + h;
        const double up = F.value(y, yi, yij);
        yij[a * n + b] = yij[b * n + a] = keep - h;
        const double down = F.value(y, yi, yij);
        yij[a * n + b] = yij[b * n + a] = keep;
        const double fd = (up - down) / (2 * h) * (a == b ? 1.0 : 0.5);
        if (!close(gij[a * n + b], fd))
          fail("dF/dy" + std::to_string(a + 1) + std::to_string(b + 1), gij[a * n + b], fd);
      }
  }
}

DensityJet density_jet(const ScalarField& rho, DerivativeMode mode, double floor_rel) {
  const Grid& g = rho.grid();
  const std::size_t n = g.dim(), size = g.size();
  const double floor = floor_rel * rho.max();
  DensityJet jet{rho, VectorField(g), std::vector<ScalarField>(n * n, ScalarField(g)),
                 std::vector<unsigned char>(size)};
  for (std::size_t i = 0; i < size; ++i) jet.active[i] = rho[i] >= floor && rho[i] > 0.0;
  if (mode == DerivativeMode::log) {
    ScalarField lg(g);
    for (std::size_t i = 0; i < size; ++i) lg[i] = std::log(std::max(rho[i], floor));
    const VectorField dg = gradient(lg);
    for (std::size_t a = 0; a < n; ++a) jet.yi[a] = rho * dg[a];
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        ScalarField s = partial(dg[b], a);
        s += dg[a] * dg[b];
        s *= rho;
        jet.yij[a * n + b] = s;
        if (a != b) jet.yij[b * n + a] = std::move(s);
      }
  } else {
    jet.yi = gradient(rho);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        ScalarField s = partial(jet.yi[b], a);
        jet.yij[a * n + b] = s;
        if (a != b) jet.yij[b * n + a] = std::move(s);
      }
  }
  return jet;
}

namespace {

struct Partials {
  ScalarField value;
  ScalarField fy;
  std::vector<ScalarField> fyi;   // n
  std::vector<ScalarField> fyij;  // n*n
};

Partials functional_partials(const DensityFunctional& F, const DensityJet& jet, bool with_partials) {
  const Grid& g = jet.y.grid();
  const std::size_t n = g.dim(), size = g.size();
  Partials p{ScalarField(g), ScalarField(g), std::vector<ScalarField>(n, ScalarField(g)),
             std::vector<ScalarField>(n * n, ScalarField(g))};
  if (F.vanishes()) return p;
#pragma omp parallel
  {
    std::vector<double> yi(n), yij(n * n), gi(n), gij(n * n);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < size; ++i) {
      if (!jet.active[i]) continue;
      for (std::size_t a = 0; a < n; ++a) yi[a] = jet.yi[a][i];
      for (std::size_t a = 0; a < n * n; ++a) yij[a] = jet.yij[a][i];
      p.value[i] = F.value(jet.y[i], yi, yij);
      if (!with_partials) continue;
      double fy;
      F.partials(jet.y[i], yi, yij, fy, gi, gij);
      p.fy[i] = fy;
      for (std::size_t a = 0; a < n; ++a) p.fyi[a][i] = gi[a];
      for (std::size_t a = 0; a < n * n; ++a) p.fyij[a][i] = gij[a];
    }
  }
  p.value.require_finite("density functional");
  return p;
}

ScalarField identity_from(const Partials& p, const ScalarField& rho) {
  const std::size_t n = rho.grid().dim();
  ScalarField out = rho * p.fy;
  for (std::size_t a = 0; a < n; ++a) out -= partial(rho * p.fyi[a], a);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const ScalarField& G = p.fyij[a * n + b];
      if (G.max_abs() == 0.0) continue;
      out += partial(partial(rho * G, b), a);
    }
  out.require_finite("functional identity");
  return out;
}

// dL/dv, dL/dx and L on the grid at velocity V.
struct LagrangianFields {
  ScalarField value;
  VectorField dx, dv;
};

LagrangianFields lagrangian_fields(const Lagrangian& L, const VectorField& V, bool with_value) {
  const Grid& g = V.grid();
  const std::size_t n = g.dim(), size = g.size();
  if (L.dim() != n) throw InvalidArgument("Lagrangian dimension differs from the grid");
  LagrangianFields out{ScalarField(g), VectorField(g), VectorField(g)};
#pragma omp parallel
  {
    std::vector<double> x(n), v(n), gx(n), gv(n);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < size; ++i) {
      g.point(i, x);
      for (std::size_t a = 0; a < n; ++a) v[a] = V[a][i];
      if (with_value) out.value[i] = L.value(x, v);
      L.dx(x, v, gx);
      L.dv(x, v, gv);
      for (std::size_t a = 0; a < n; ++a) {
        out.dx[a][i] = gx[a];
        out.dv[a][i] = gv[a];
      }
    }
  }
  out.value.require_finite("Lagrangian");
  out.dx.require_finite("dL/dx");
  out.dv.require_finite("dL/dv");
  return out;
}

}  // namespace

ScalarField functional_field(const DensityFunctional& F, const ScalarField& rho, DerivativeMode mode) {
  return functional_partials(F, density_jet(rho, mode), false).value;
}

ScalarField functional_identity_defect(const DensityFunctional& F, const ScalarField& rho, DerivativeMode mode) {
  return identity_from(functional_partials(F, density_jet(rho, mode), true), rho);
}

double action(const WeakCurve& curve, const Lagrangian& L, const DensityFunctional& F, DerivativeMode mode) {
  std::vector<double> slices;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const ScalarField& rho = curve.rho(k).field();
    ScalarField density = lagrangian_fields(L, curve.vel(k), true).value;
    if (!F.vanishes()) density += functional_field(F, rho, mode);
    const double w = (k == 0 || k + 1 == curve.size()) ? 0.5 : 1.0;
    slices.push_back(w * curve.dt() * integrate(rho * density));
  }
  return pairwise_sum(slices);
}

ElResidual weak_el(const WeakCurve& curve, const Lagrangian& L, const DensityFunctional& F, std::size_t k,
                   DerivativeMode mode, double floor_rel) {
  if (k < 1 || k + 2 > curve.size())
    throw InvalidArgument("time index " + std::to_string(k) + " is outside the central-difference range");
  const ScalarField& rho = curve.rho(k).field();
  const LagrangianFields here = lagrangian_fields(L, curve.vel(k), false);
  const VectorField ahead = lagrangian_fields(L, curve.vel(k + 1), false).dv;
  const VectorField behind = lagrangian_fields(L, curve.vel(k - 1), false).dv;

  VectorField bracket = ahead - behind;
  bracket *= 0.5 / curve.dt();
  bracket += directional_derivative(curve.vel(k), here.dv);
  bracket -= here.dx;
  if (!F.vanishes()) {
    const Partials p = functional_partials(F, density_jet(rho, mode, floor_rel), true);
    ScalarField phi = p.value;
    phi += identity_from(p, rho);
    bracket -= gradient(phi);
  }

  ElResidual r{rho * bracket, 0.0, 0.0};
  const Grid& g = rho.grid();
  const double floor = floor_rel * rho.max();
  for (std::size_t a = 0; a < g.dim(); ++a) {
    ScalarField mag(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      mag[i] = std::abs(r.weighted[a][i]);
      if (rho[i] >= floor) r.bracket_linf = std::max(r.bracket_linf, std::abs(bracket[a][i]));
    }
    r.weighted_l1 += integrate(mag);
  }
  return r;
}

VectorField weak_el_residual(const WeakCurve& curve, const Lagrangian& L, const DensityFunctional& F, std::size_t k,
                             DerivativeMode mode) {
  return weak_el(curve, L, F, k, mode).weighted;
}

namespace {

ScalarField transport_rate(const ScalarField& rho, const VectorField& W) { return -1.0 * divergence(rho * W); }

ScalarField rk4_step(const ScalarField& rho, const VectorField& W, double ds) {
  const ScalarField k1 = transport_rate(rho, W);
  const ScalarField k2 = transport_rate(rho + (0.5 * ds) * k1, W);
  const ScalarField k3 = transport_rate(rho + (0.5 * ds) * k2, W);
  const ScalarField k4 = transport_rate(rho + ds * k3, W);
  ScalarField sum = k1 + 2.0 * k2;
  sum += 2.0 * k3;
  sum += k4;
  return rho + (ds / 6.0) * sum;
}

WeakCurve perturbed(const WeakCurve& curve, const std::vector<VectorField>& W, double ds, const EllipticOptions& opt) {
  const std::size_t T = curve.size();
  std::vector<DensityField> rho;
  for (std::size_t k = 0; k < T; ++k) {
    ScalarField r = rk4_step(curve.rho(k).field(), W[k], ds);
    const double low = r.min();
    if (low < 0.0)
      throw PreconditionError("variation step drives the density negative (min " + std::to_string(low) +
                              "); reduce ds");
    rho.emplace_back(std::move(r));
  }
  std::vector<VectorField> vel;
  const double dt = curve.dt();
  for (std::size_t k = 0; k < T; ++k) {
    ScalarField rate(curve.grid());
    if (k == 0) {
      rate = -3.0 * rho[0].field() + 4.0 * rho[1].field() - rho[2].field();
    } else if (k + 1 == T) {
      rate = 3.0 * rho[T - 1].field() - 4.0 * rho[T - 2].field() + rho[T - 3].field();
    } else {
      rate = rho[k + 1].field() - rho[k - 1].field();
    }
    rate *= 0.5 / dt;
    vel.push_back(solve_weighted_poisson(rho[k].field(), rate, opt).velocity);
  }
  return WeakCurve(curve.times(), std::move(rho), std::move(vel));
}

}  // namespace

Variation build_variation(const WeakCurve& curve, const std::vector<Expr>& W, double ds, EllipticOptions opt) {
  const Grid& g = curve.grid();
  if (!g.all_periodic()) throw PreconditionError("variations are built on periodic grids only");
  if (W.size() != g.dim()) throw InvalidArgument("W needs one expression per axis");
  if (!(ds > 0.0)) throw InvalidArgument("ds must be positive");
  std::vector<VectorField> fields;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    std::vector<ScalarField> comps;
    for (const Expr& e : W) comps.push_back(eval_on_grid(e, g, {{"t", curve.times()[k]}}));
    fields.emplace_back(std::move(comps));
  }
  for (std::size_t k : {std::size_t{0}, curve.size() - 1}) {
    const double edge = fields[k].max_abs();
    if (edge > 1e-12)
      throw PreconditionError("W must vanish at the end times; max |W| = " + std::to_string(edge) + " at t = " +
                              std::to_string(curve.times()[k]));
  }
  WeakCurve minus = perturbed(curve, fields, -ds, opt);
  WeakCurve plus = perturbed(curve, fields, ds, opt);
  return Variation{ds, std::move(fields), std::move(minus), curve, std::move(plus)};
}

GradientCheck variation_gradient_check(const Variation& var, const Lagrangian& L, const DensityFunctional& F,
                                       DerivativeMode mode) {
  GradientCheck c;
  c.fd = (action(var.plus, L, F, mode) - action(var.minus, L, F, mode)) / (2 * var.ds);
  std::vector<double> terms;
  for (std::size_t k = 1; k + 1 < var.base.size(); ++k) {
    const VectorField r = weak_el_residual(var.base, L, F, k, mode);
    terms.push_back(-var.base.dt() * integrate(dot(r, var.W[k])));
  }
  c.formula = pairwise_sum(terms);
  c.rel_err = std::abs(c.fd - c.formula) / std::max(std::abs(c.fd), 1e-300);
  return c;
}

}  // namespace weakform
