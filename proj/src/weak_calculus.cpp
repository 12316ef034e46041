#include "weakform/weak_calculus.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "smallmat.hpp"
#include "weakform/calculus.hpp"

namespace weakform {

namespace sm = smallmat;

WeakCurve::WeakCurve(std::vector<double> times, std::vector<DensityField> rho, std::vector<VectorField> vel)
    : times_(std::move(times)), rho_(std::move(rho)), vel_(std::move(vel)) {
  if (times_.size() < 3) throw InvalidArgument("a weak curve needs at least three snapshots");
  if (rho_.size() != times_.size() || vel_.size() != times_.size())
    throw InvalidArgument("weak curve needs one density and one velocity per time");
  dt_ = (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1);
  if (!(dt_ > 0.0)) throw InvalidArgument("weak curve times must increase");
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    const double step = times_[k + 1] - times_[k];
    if (!(step > 0.0) || std::abs(step - dt_) > 1e-9 * dt_)
      throw InvalidArgument("weak curve times must be strictly increasing with a uniform step");
  }
  for (std::size_t k = 0; k < times_.size(); ++k) {
    require_same_grid(rho_[k].grid(), rho_[0].grid(), "weak curve density");
    require_same_grid(vel_[k].grid(), rho_[0].grid(), "weak curve velocity");
  }
}

WeakCurve curve_from_expressions(const Grid& grid, const Expr& rho, const std::vector<Expr>& vel, double t0, double t1,
                                 std::size_t count, bool normalize, DensityTolerances tol) {
  if (vel.size() != grid.dim()) throw InvalidArgument("velocity needs one expression per axis");
  if (count < 3) throw InvalidArgument("a weak curve needs at least three snapshots");
  std::vector<double> times;
  std::vector<DensityField> rhos;
  std::vector<VectorField> vels;
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(count - 1);
    times.push_back(t);
    ScalarField r = eval_on_grid(rho, grid, {{"t", t}});
    rhos.push_back(normalize ? DensityField::normalized(std::move(r), tol) : DensityField(std::move(r), tol));
    std::vector<ScalarField> comps;
    for (const Expr& e : vel) comps.push_back(eval_on_grid(e, grid, {{"t", t}}));
    vels.emplace_back(std::move(comps));
  }
  return WeakCurve(std::move(times), std::move(rhos), std::move(vels));
}

ScalarField continuity_residual(const WeakCurve& curve, std::size_t k) {
  if (k < 1 || k + 2 > curve.size())
    throw InvalidArgument("time index " + std::to_string(k) + " is outside the central-difference range");
  ScalarField r = curve.rho(k + 1).field() - curve.rho(k - 1).field();
  r *= 0.5 / curve.dt();
  r += divergence(curve.rho(k).field() * curve.vel(k));
  return r;
}

double weak_derivative_defect(const WeakCurve& curve, const ScalarField& f, std::size_t k, double boundary_tolerance) {
  if (k < 1 || k + 2 > curve.size())
    throw InvalidArgument("time index " + std::to_string(k) + " is outside the central-difference range");
  require_same_grid(f.grid(), curve.grid(), "weak_derivative_defect");
  if (boundary_trace(f) > boundary_tolerance)
    throw PreconditionError("test function is not compactly supported inside the box");
  const double ahead = integrate(curve.rho(k + 1).field() * f);
  const double behind = integrate(curve.rho(k - 1).field() * f);
  const double flux = integrate(curve.rho(k).field() * dot(gradient(f), curve.vel(k)));
  return (ahead - behind) / (2.0 * curve.dt()) - flux;
}

ScalarField divergence_identity_defect(const ScalarField& f, const VectorField& v, const VectorField& w) {
  require_same_grid(f.grid(), v.grid(), "divergence_identity_defect");
  require_same_grid(f.grid(), w.grid(), "divergence_identity_defect");
  ScalarField out = divergence(divergence(f * w) * v);
  out -= divergence(divergence(f * v) * w);
  out -= divergence(f * lie_bracket(v, w));
  return out;
}

DensityFn gaussian_density(std::size_t dim, double std) {
  if (!(std > 0.0)) throw InvalidArgument("gaussian width must be positive");
  const double norm = std::pow(2.0 * std::numbers::pi * std * std, -0.5 * static_cast<double>(dim));
  const double c = -0.5 / (std * std);
  return [dim, norm, c](std::span<const double> y) {
    double r2 = 0.0;
    for (std::size_t a = 0; a < dim; ++a) r2 += y[a] * y[a];
    return norm * std::exp(c * r2);
  };
}

DensityFn expression_density(const Expr& e, std::size_t dim) {
  auto fn = std::make_shared<PointFunction>(e, dim);
  return [fn](std::span<const double> y) { return (*fn)(y); };
}

namespace {

class AffineFlow final : public WeakFamily {
 public:
  explicit AffineFlow(AffineFlowSpec spec) : spec_(std::move(spec)) {
    n_ = spec_.A.size();
    if (n_ == 0 || n_ > 8) throw InvalidArgument("affine flow needs 1 to 8 target dimensions");
    m_ = spec_.A[0].size();
    if (m_ == 0 || m_ > 8) throw InvalidArgument("affine flow needs 1 to 8 parameters");
    for (const auto& row : spec_.A)
      if (row.size() != m_) throw InvalidArgument("affine flow matrix A is ragged");
    if (!spec_.generators.empty() && spec_.generators.size() != m_)
      throw InvalidArgument("affine flow needs one generator per parameter");
    for (const auto& g : spec_.generators) {
      if (g.size() != n_) throw InvalidArgument("affine flow generator has the wrong size");
      for (const auto& row : g)
        if (row.size() != n_) throw InvalidArgument("affine flow generator has the wrong size");
    }
    if (!spec_.sigma) throw InvalidArgument("affine flow needs a base density");
  }

  std::size_t params() const override { return m_; }
  std::size_t target_dim() const override { return n_; }

  class Bound final : public Point {
   public:
    const AffineFlow* flow;
    std::size_t n = 0, m = 0;
    double c[8] = {};      // A u
    double minv[64] = {};  // M(u)^-1, row-major
    double a[64] = {};     // A, row-major n x m
    double k[512] = {};    // dM/du_j M^-1, row-major per j
    bool flowing = false;
    double inv_det = 1.0;

    void eval(std::size_t, std::span<const double> x, double& rho, std::span<double> vel) const override {
      double d[8], y[8];
      for (std::size_t r = 0; r < n; ++r) d[r] = x[r] - c[r];
      for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t b = 0; b < n; ++b) s += minv[r * n + b] * d[b];
        y[r] = s;
      }
      rho = flow->spec_.sigma(std::span<const double>(y, n)) * inv_det;
      for (std::size_t j = 0; j < m; ++j) {
        const double* kj = k + j * n * n;
        for (std::size_t r = 0; r < n; ++r) {
          double s = a[r * m + j];
          if (flowing)
            for (std::size_t b = 0; b < n; ++b) s += kj[r * n + b] * d[b];
          vel[j * n + r] = s;
        }
      }
    }
  };

  std::unique_ptr<Point> bind(std::span<const double> u) const override {
    auto b = std::make_unique<Bound>();
    b->flow = this;
    b->n = n_;
    b->m = m_;
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t j = 0; j < m_; ++j) {
        b->a[r * m_ + j] = spec_.A[r][j];
        b->c[r] += spec_.A[r][j] * u[j];
      }
    if (spec_.generators.empty()) {
      for (std::size_t r = 0; r < n_; ++r) b->minv[r * n_ + r] = 1.0;
      return b;
    }
    b->flowing = true;
    sm::Mat prefix(n_, 1.0);
    for (std::size_t j = 0; j < m_; ++j) {
      sm::Mat g(n_);
      for (std::size_t r = 0; r < n_; ++r)
        for (std::size_t c = 0; c < n_; ++c) g(r, c) = spec_.generators[j][r][c];
      const sm::Mat kj = prefix * g * sm::inverse(prefix);
      for (std::size_t r = 0; r < n_; ++r)
        for (std::size_t c = 0; c < n_; ++c) b->k[j * n_ * n_ + r * n_ + c] = kj(r, c);
      prefix = prefix * sm::expm(sm::scaled(g, u[j]));
    }
    double det = 1.0;
    const sm::Mat minv = sm::inverse(prefix, &det);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t c = 0; c < n_; ++c) b->minv[r * n_ + c] = minv(r, c);
    b->inv_det = 1.0 / std::abs(det);
    return b;
  }

 private:
  AffineFlowSpec spec_;
  std::size_t n_ = 0, m_ = 0;
};

class ScaledVelocity final : public WeakFamily {
 public:
  ScaledVelocity(std::shared_ptr<const WeakFamily> base, std::size_t axis, double factor)
      : base_(std::move(base)), axis_(axis), factor_(factor) {
    if (axis_ >= base_->params()) throw InvalidArgument("scaled velocity axis out of range");
  }
  std::size_t params() const override { return base_->params(); }
  std::size_t target_dim() const override { return base_->target_dim(); }

  class Bound final : public Point {
   public:
    std::unique_ptr<Point> inner;
    std::size_t lo = 0, hi = 0;
    double factor = 1.0;
    void eval(std::size_t flat, std::span<const double> x, double& rho, std::span<double> vel) const override {
      inner->eval(flat, x, rho, vel);
      for (std::size_t i = lo; i < hi; ++i) vel[i] *= factor;
    }
  };

  std::unique_ptr<Point> bind(std::span<const double> u) const override {
    auto b = std::make_unique<Bound>();
    b->inner = base_->bind(u);
    b->lo = axis_ * target_dim();
    b->hi = b->lo + target_dim();
    b->factor = factor_;
    return b;
  }

 private:
  std::shared_ptr<const WeakFamily> base_;
  std::size_t axis_;
  double factor_;
};

class ExpressionFamily final : public WeakFamily {
 public:
  ExpressionFamily(const Expr& rho, const std::vector<std::vector<Expr>>& vel, std::size_t dim, bool normalize,
                   Grid target)
      : n_(dim), m_(vel.size()), normalize_(normalize), target_(std::move(target)) {
    std::vector<std::string> us;
    for (std::size_t j = 0; j < m_; ++j) us.push_back("u" + std::to_string(j + 1));
    rho_ = PointFunction(rho, dim, us);
    for (const auto& vj : vel) {
      if (vj.size() != dim) throw InvalidArgument("each velocity needs one expression per target axis");
      for (const Expr& e : vj) vel_.emplace_back(e, dim, us);
    }
  }
  std::size_t params() const override { return m_; }
  std::size_t target_dim() const override { return n_; }

  class Bound final : public Point {
   public:
    const ExpressionFamily* fam;
    std::vector<double> u;
    double scale = 1.0;
    void eval(std::size_t, std::span<const double> x, double& rho, std::span<double> vel) const override {
      rho = scale * fam->rho_(x, u);
      for (std::size_t i = 0; i < fam->vel_.size(); ++i) vel[i] = fam->vel_[i](x, u);
    }
  };

  std::unique_ptr<Point> bind(std::span<const double> u) const override {
    auto b = std::make_unique<Bound>();
    b->fam = this;
    b->u.assign(u.begin(), u.end());
    if (normalize_) {
      std::vector<double> x(n_);
      const double mass = integrate_with(target_, [&](std::size_t i) {
        target_.point(i, x);
        return rho_(x, b->u);
      });
      if (!(mass > 0.0)) throw PreconditionError("expression density has no mass");
      b->scale = 1.0 / mass;
    }
    return b;
  }

 private:
  std::size_t n_, m_;
  bool normalize_;
  Grid target_;
  PointFunction rho_;
  std::vector<PointFunction> vel_;
};

// Nodes read back from disk; only parameter values on the stored grid are valid.
class MaterializedFamily final : public WeakFamily {
 public:
  MaterializedFamily(Grid params, std::vector<WeakNode> nodes) : params_(std::move(params)), nodes_(std::move(nodes)) {}
  std::size_t params() const override { return params_.dim(); }
  std::size_t target_dim() const override { return nodes_.front().rho.grid().dim(); }

  class Bound final : public Point {
   public:
    const WeakNode* node;
    void eval(std::size_t flat, std::span<const double>, double& rho, std::span<double> vel) const override {
      rho = node->rho[flat];
      const std::size_t n = node->rho.grid().dim();
      for (std::size_t j = 0; j < node->vel.size(); ++j)
        for (std::size_t a = 0; a < n; ++a) vel[j * n + a] = node->vel[j][a][flat];
    }
  };

  std::unique_ptr<Point> bind(std::span<const double> u) const override {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < params_.dim(); ++a) {
      const double pos = (u[a] - params_.axis(a).lo) / params_.spacing(a);
      const double r = std::round(pos);
      if (std::abs(pos - r) > 1e-6 || r < 0 || r >= static_cast<double>(params_.points(a)))
        throw PreconditionError("stored weak function has no node at the requested parameter");
      flat += static_cast<std::size_t>(r) * params_.stride(a);
    }
    auto b = std::make_unique<Bound>();
    b->node = &nodes_[flat];
    return b;
  }

 private:
  Grid params_;
  std::vector<WeakNode> nodes_;
};

class Reparameterized final : public WeakFamily {
 public:
  Reparameterized(std::shared_ptr<const WeakFamily> base, std::vector<std::vector<double>> B)
      : base_(std::move(base)), B_(std::move(B)) {}
  std::size_t params() const override { return base_->params(); }
  std::size_t target_dim() const override { return base_->target_dim(); }

  class Bound final : public Point {
   public:
    std::unique_ptr<Point> inner;
    const std::vector<std::vector<double>>* B;
    std::size_t n = 0, m = 0;
    void eval(std::size_t flat, std::span<const double> x, double& rho, std::span<double> vel) const override {
      double v[64];
      inner->eval(flat, x, rho, std::span<double>(v, n * m));
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t a = 0; a < n; ++a) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += (*B)[j][i] * v[j * n + a];
          vel[i * n + a] = s;
        }
    }
  };

  std::unique_ptr<Point> bind(std::span<const double> w) const override {
    const std::size_t m = params();
    std::vector<double> u(m, 0.0);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < m; ++i) u[j] += B_[j][i] * w[i];
    auto b = std::make_unique<Bound>();
    b->inner = base_->bind(u);
    b->B = &B_;
    b->n = target_dim();
    b->m = m;
    return b;
  }

 private:
  std::shared_ptr<const WeakFamily> base_;
  std::vector<std::vector<double>> B_;
};

struct Sampled {
  ScalarField rho;
  std::vector<VectorField> vel;
};

Sampled sample_node(const WeakFamily& fam, const Grid& target, std::span<const double> u, bool with_velocity) {
  const auto bound = fam.bind(u);
  const std::size_t n = target.dim(), m = fam.params();
  Sampled s{ScalarField(target), {}};
  std::vector<std::vector<double>> v;
  if (with_velocity) v.assign(m * n, std::vector<double>(target.size()));
  const std::size_t size = target.size();
#pragma omp parallel
  {
    std::vector<double> x(n), buf(m * n);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < size; ++i) {
      target.point(i, x);
      double r;
      bound->eval(i, x, r, buf);
      s.rho[i] = r;
      if (with_velocity)
        for (std::size_t q = 0; q < m * n; ++q) v[q][i] = buf[q];
    }
  }
  s.rho.require_finite("weak function density");
  if (with_velocity)
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<ScalarField> comps;
      for (std::size_t a = 0; a < n; ++a) comps.emplace_back(target, std::move(v[j * n + a]));
      s.vel.emplace_back(std::move(comps));
      s.vel.back().require_finite("weak function velocity");
    }
  return s;
}

std::vector<double> node_coordinates(const Grid& params, std::size_t flat) {
  std::vector<double> u(params.dim());
  params.point(flat, u);
  return u;
}

}  // namespace

std::shared_ptr<const WeakFamily> affine_flow(AffineFlowSpec spec) {
  return std::make_shared<AffineFlow>(std::move(spec));
}

std::shared_ptr<const WeakFamily> scaled_velocity(std::shared_ptr<const WeakFamily> base, std::size_t axis,
                                                  double factor) {
  return std::make_shared<ScaledVelocity>(std::move(base), axis, factor);
}

std::shared_ptr<const WeakFamily> expression_family(const Expr& rho, const std::vector<std::vector<Expr>>& vel,
                                                    std::size_t dim, bool normalize, const Grid& target) {
  return std::make_shared<ExpressionFamily>(rho, vel, dim, normalize, target);
}

WeakFunction::WeakFunction(Grid params, Grid target, std::shared_ptr<const WeakFamily> family, DensityTolerances tol)
    : params_(std::move(params)), target_(std::move(target)), family_(std::move(family)), tol_(tol) {
  if (!family_) throw InvalidArgument("weak function needs a family");
  if (family_->params() != params_.dim()) throw InvalidArgument("family parameter count differs from the grid");
  if (family_->target_dim() != target_.dim()) throw InvalidArgument("family target dimension differs from the grid");
  if (family_->params() * family_->target_dim() > 64) throw InvalidArgument("too many velocity components");
  // Support check on the parameter box corners and centre: these are where a
  // translating or stretching family leaves the target box first.
  const std::size_t m = params_.dim();
  std::vector<std::size_t> probes;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < m; ++a) flat += ((mask >> a) & 1 ? params_.points(a) - 1 : 0) * params_.stride(a);
    probes.push_back(flat);
  }
  std::size_t centre = 0;
  for (std::size_t a = 0; a < m; ++a) centre += (params_.points(a) / 2) * params_.stride(a);
  probes.push_back(centre);
  for (std::size_t flat : probes) {
    Sampled s = sample_node(*family_, target_, node_coordinates(params_, flat), false);
    try {
      DensityField check(std::move(s.rho), tol_);
    } catch (const PreconditionError& e) {
      throw PreconditionError(std::string("weak function support violation at parameter node ") +
                              std::to_string(flat) + ": " + e.what());
    }
  }
}

WeakNode WeakFunction::node_at(std::span<const double> u) const {
  Sampled s = sample_node(*family_, target_, u, true);
  return WeakNode{DensityField(std::move(s.rho), tol_), std::move(s.vel)};
}

WeakNode WeakFunction::node(std::size_t param_flat) const { return node_at(node_coordinates(params_, param_flat)); }

std::size_t WeakFunction::neighbour(std::size_t param_flat, std::size_t axis, int step) const {
  const std::size_t n = params_.points(axis);
  const std::size_t i = params_.index_along(param_flat, axis);
  std::size_t j;
  if (params_.axis(axis).periodic) {
    j = static_cast<std::size_t>(static_cast<long>(i) + static_cast<long>(n) + step) % n;
  } else {
    const long k = static_cast<long>(i) + step;
    if (k < 0 || k >= static_cast<long>(n)) throw InvalidArgument("parameter node has no neighbour along this axis");
    j = static_cast<std::size_t>(k);
  }
  return param_flat - i * params_.stride(axis) + j * params_.stride(axis);
}

bool WeakFunction::interior(std::size_t param_flat) const {
  for (std::size_t a = 0; a < params_.dim(); ++a) {
    if (params_.axis(a).periodic) continue;
    const std::size_t i = params_.index_along(param_flat, a);
    if (i == 0 || i + 1 == params_.points(a)) return false;
  }
  return true;
}

WeakFunction linear_pushforward(const std::vector<std::vector<double>>& A, DensityFn sigma, const Grid& params,
                                const Grid& target, DensityTolerances tol) {
  return WeakFunction(params, target, affine_flow(AffineFlowSpec{A, {}, std::move(sigma)}), tol);
}

ScalarField continuity_residual(const WeakFunction& wf, std::size_t axis, std::size_t param_flat) {
  if (axis >= wf.m()) throw InvalidArgument("parameter axis out of range");
  if (!wf.interior(param_flat)) throw InvalidArgument("continuity residual needs an interior parameter node");
  const Grid& P = wf.params();
  const Sampled ahead = sample_node(wf.family(), wf.target(), node_coordinates(P, wf.neighbour(param_flat, axis, 1)), false);
  const Sampled behind = sample_node(wf.family(), wf.target(), node_coordinates(P, wf.neighbour(param_flat, axis, -1)), false);
  const Sampled here = sample_node(wf.family(), wf.target(), node_coordinates(P, param_flat), true);
  ScalarField r = ahead.rho - behind.rho;
  r *= 0.5 / P.spacing(axis);
  r += divergence(here.rho * here.vel[axis]);
  return r;
}

double max_continuity_residual(const WeakFunction& wf, std::size_t stride) {
  if (stride == 0) stride = 1;
  double worst = 0.0;
  std::size_t seen = 0;
  for (std::size_t q = 0; q < wf.params().size(); ++q) {
    if (!wf.interior(q)) continue;
    if (seen++ % stride != 0) continue;
    for (std::size_t a = 0; a < wf.m(); ++a) worst = std::max(worst, continuity_residual(wf, a, q).max_abs());
  }
  return worst;
}

VectorField mixed_partial_defect(const WeakFunction& wf, std::size_t i, std::size_t j, std::size_t param_flat) {
  if (i == j) throw InvalidArgument("mixed partial defect needs two distinct parameter axes");
  if (i >= wf.m() || j >= wf.m()) throw InvalidArgument("parameter axis out of range");
  if (!wf.interior(param_flat)) throw InvalidArgument("mixed partial defect needs an interior parameter node");
  const Grid& P = wf.params();
  auto at = [&](std::size_t flat) { return sample_node(wf.family(), wf.target(), node_coordinates(P, flat), true); };
  const Sampled here = at(param_flat);
  const Sampled up_j = at(wf.neighbour(param_flat, j, 1)), down_j = at(wf.neighbour(param_flat, j, -1));
  const Sampled up_i = at(wf.neighbour(param_flat, i, 1)), down_i = at(wf.neighbour(param_flat, i, -1));
  VectorField dvi = up_j.vel[i] - down_j.vel[i];
  dvi *= 0.5 / P.spacing(j);
  VectorField dvj = up_i.vel[j] - down_i.vel[j];
  dvj *= 0.5 / P.spacing(i);
  VectorField d = dvi - dvj;
  d -= lie_bracket(here.vel[i], here.vel[j]);
  return here.rho * std::move(d);
}

namespace {

std::vector<std::size_t> parity_classes(const Grid& g, std::size_t& count) {
  std::vector<std::size_t> cls(g.size(), 0);
  count = 1;
  for (std::size_t a = 0; a < g.dim(); ++a) {
    if (g.points(a) % 2 != 0) continue;
    for (std::size_t i = 0; i < g.size(); ++i) cls[i] += (g.index_along(i, a) % 2) * count;
    count *= 2;
  }
  return cls;
}

void remove_class_means(std::vector<double>& v, const std::vector<std::size_t>& cls, std::size_t count) {
  std::vector<double> sum(count, 0.0), n(count, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum[cls[i]] += v[i];
    n[cls[i]] += 1.0;
  }
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= sum[cls[i]] / n[cls[i]];
}

double dot_plain(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

EllipticResult solve_weighted_poisson(const ScalarField& weight, const ScalarField& rate, EllipticOptions opt) {
  const Grid& g = weight.grid();
  require_same_grid(g, rate.grid(), "solve_weighted_poisson");
  if (!g.all_periodic()) throw PreconditionError("the optimal-velocity solve needs a fully periodic grid");
  weight.require_finite("elliptic weight");
  rate.require_finite("elliptic rate");
  const double wmax = weight.max();
  const double floor = opt.floor * wmax;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(weight[i] >= floor) || !(weight[i] > 0.0))
      throw PreconditionError("density falls below the elliptic floor at flat index " + std::to_string(i));

  std::size_t classes = 0;
  const auto cls = parity_classes(g, classes);
  std::vector<double> b(rate.values().begin(), rate.values().end());
  remove_class_means(b, cls, classes);
  const double bnorm = std::sqrt(dot_plain(b, b));
  EllipticResult res{VectorField(g), 0, 0.0};
  if (bnorm == 0.0) return res;

  // Jacobi diagonal of -sum_a D_a w D_a.
  std::vector<double> diag(g.size(), 0.0);
  for (std::size_t a = 0; a < g.dim(); ++a) {
    const double c = 0.25 / (g.spacing(a) * g.spacing(a));
    const std::size_t n = g.points(a), s = g.stride(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t k = g.index_along(i, a);
      const std::size_t up = i - k * s + ((k + 1) % n) * s, down = i - k * s + ((k + n - 1) % n) * s;
      diag[i] += c * (weight[up] + weight[down]);
    }
  }

  auto apply = [&](const std::vector<double>& x) {
    const ScalarField phi(g, x);
    ScalarField out(g);
    for (std::size_t a = 0; a < g.dim(); ++a) out -= partial(weight * partial(phi, a), a);
    return std::vector<double>(out.values().begin(), out.values().end());
  };

  const std::size_t max_it = opt.max_iterations ? opt.max_iterations : 20 * g.size();
  std::vector<double> x(g.size(), 0.0), r = b, z(g.size()), p;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = dot_plain(r, z);
  double rel = 1.0;
  std::size_t it = 0;
  while (it < max_it) {
    const std::vector<double> ap = apply(p);
    const double pap = dot_plain(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++it;
    rel = std::sqrt(dot_plain(r, r)) / bnorm;
    if (rel <= opt.rel_tol) break;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = r[i] / diag[i];
    const double rz_new = dot_plain(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
  }
  if (!(rel <= opt.rel_tol)) {
    std::ostringstream os;
    os << "conjugate gradient stalled at relative residual " << rel << " after " << it << " iterations";
    throw ConvergenceError(os.str(), it);
  }
  remove_class_means(x, cls, classes);
  res.velocity = gradient(ScalarField(g, std::move(x)));
  res.iterations = it;
  res.relative_residual = rel;
  return res;
}

EllipticResult solve_optimal_velocity(const DensityField& prev, const DensityField& next, double dt,
                                      EllipticOptions opt) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  ScalarField mid = prev.field() + next.field();
  mid *= 0.5;
  ScalarField rate = next.field() - prev.field();
  rate *= 1.0 / dt;
  return solve_weighted_poisson(mid, rate, opt);
}

WeakFunction reparameterize(const WeakFunction& wf, const std::vector<std::vector<double>>& B) {
  const std::size_t m = wf.m();
  if (B.size() != m) throw InvalidArgument("reparameterization matrix must be m x m");
  sm::Mat b(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (B[i].size() != m) throw InvalidArgument("reparameterization matrix must be m x m");
    for (std::size_t j = 0; j < m; ++j) b(i, j) = B[i][j];
  }
  double det = 0.0;
  const sm::Mat binv = sm::inverse(b, &det);
  if (std::abs(det) < 1e-14) throw PreconditionError("reparameterization matrix is singular");

  // w-grid: centred on B^-1 of the original centre, half-widths divided by the
  // column norms of B, same point counts. A diagonal B maps the grid exactly.
  const Grid& P = wf.params();
  std::vector<double> centre(m);
  for (std::size_t a = 0; a < m; ++a) centre[a] = 0.5 * (P.axis(a).lo + P.axis(a).hi);
  std::vector<Axis> axes;
  for (std::size_t i = 0; i < m; ++i) {
    double wc = 0.0, col = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      wc += binv(i, j) * centre[j];
      col += B[j][i] * B[j][i];
    }
    const double half = 0.5 * (P.axis(i).hi - P.axis(i).lo) / std::sqrt(col);
    axes.push_back(Axis{wc - half, wc + half, P.points(i), false});
  }
  return WeakFunction(Grid(std::move(axes)), wf.target(), std::make_shared<Reparameterized>(wf.family_ptr(), B),
                      wf.tolerances());
}

ReparameterizeReport reparameterize_check(const WeakFunction& wf, const std::vector<std::vector<double>>& B,
                                          double tolerance) {
  ReparameterizeReport r;
  r.original = max_continuity_residual(wf);
  r.reparameterized = max_continuity_residual(reparameterize(wf, B));
  r.pass = r.reparameterized <= tolerance;
  return r;
}

std::shared_ptr<const WeakFamily> materialized_family(Grid params, std::vector<WeakNode> nodes) {
  return std::make_shared<MaterializedFamily>(std::move(params), std::move(nodes));
}

}  // namespace weakform
