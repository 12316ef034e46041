#include "weakform/quantum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "weakform/calculus.hpp"

namespace weakform {

namespace {

constexpr double kNodeRel = 1e-12;
constexpr double kFloorRel = 1e-13;

void require_positive(double hbar, double m) {
  if (!(hbar > 0.0) || !(m > 0.0)) throw InvalidArgument("hbar and m must be positive");
}

void require_periodic(const Grid& g) {
  if (!g.all_periodic()) throw PreconditionError("wave functions live on periodic grids");
}

double raw_norm(const ScalarField& re, const ScalarField& im) { return integrate(re * re + im * im); }

// Planning is not thread-safe in FFTW; execution with new-array calls is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Fft {
 public:
  explicit Fft(const Grid& g) : size_(g.size()) {
    std::vector<int> dims;
    for (std::size_t a = 0; a < g.dim(); ++a) dims.push_back(static_cast<int>(g.points(a)));
    fftw_complex* scratch = fftw_alloc_complex(size_);
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), scratch, scratch, FFTW_FORWARD,
                             FFTW_ESTIMATE);
    backward_ = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), scratch, scratch, FFTW_BACKWARD,
                              FFTW_ESTIMATE);
    fftw_free(scratch);
  }
  ~Fft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  void forward(fftw_complex* data) const { fftw_execute_dft(forward_, data, data); }
  void backward(fftw_complex* data) const { fftw_execute_dft(backward_, data, data); }

 private:
  std::size_t size_;
  fftw_plan forward_ = nullptr, backward_ = nullptr;
};

struct Buffer {
  explicit Buffer(std::size_t n) : data(fftw_alloc_complex(n)) {}
  ~Buffer() { fftw_free(data); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  fftw_complex* data;
};

// |k|^2 of every discrete Fourier mode, in the grid's flat layout.
std::vector<double> wavenumber_squared(const Grid& g) {
  std::vector<double> k2(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t a = 0; a < g.dim(); ++a) {
      const auto n = static_cast<long>(g.points(a));
      long j = static_cast<long>(g.index_along(i, a));
      if (j >= (n + 1) / 2) j -= n;
      const double k = 2 * std::numbers::pi * static_cast<double>(j) / (static_cast<double>(n) * g.spacing(a));
      k2[i] += k * k;
    }
  }
  return k2;
}

}  // namespace

WaveFunction::WaveFunction(ScalarField re, ScalarField im, double hbar, double m, double norm_tol)
    : re_(std::move(re)), im_(std::move(im)), hbar_(hbar), m_(m) {
  require_positive(hbar, m);
  require_same_grid(re_.grid(), im_.grid(), "wave function");
  require_periodic(re_.grid());
  re_.require_finite("wave function (re)");
  im_.require_finite("wave function (im)");
  const double n = raw_norm(re_, im_);
  if (std::abs(n - 1.0) > norm_tol)
    throw PreconditionError("wave function norm " + std::to_string(n) + " differs from 1");
}

WaveFunction WaveFunction::normalized(ScalarField re, ScalarField im, double hbar, double m) {
  const double n = raw_norm(re, im);
  if (!(n > 0.0) || !std::isfinite(n)) throw PreconditionError("wave function has zero or non-finite norm");
  const double c = 1.0 / std::sqrt(n);
  re *= c;
  im *= c;
  return WaveFunction(std::move(re), std::move(im), hbar, m);
}

ScalarField WaveFunction::density() const { return re_ * re_ + im_ * im_; }

double norm(const WaveFunction& psi) { return raw_norm(psi.re(), psi.im()); }

std::vector<double> mean_position(const WaveFunction& psi) {
  const ScalarField rho = psi.density();
  const Grid& g = rho.grid();
  std::vector<double> out;
  for (std::size_t a = 0; a < g.dim(); ++a)
    out.push_back(integrate_with(g, [&](std::size_t i) { return g.coordinate(a, g.index_along(i, a)) * rho[i]; }));
  return out;
}

std::vector<double> position_variance(const WaveFunction& psi) {
  const ScalarField rho = psi.density();
  const Grid& g = rho.grid();
  const std::vector<double> mean = mean_position(psi);
  std::vector<double> out;
  for (std::size_t a = 0; a < g.dim(); ++a)
    out.push_back(integrate_with(g, [&](std::size_t i) {
      const double d = g.coordinate(a, g.index_along(i, a)) - mean[a];
      return d * d * rho[i];
    }));
  return out;
}

double energy(const WaveFunction& psi, const ScalarField& U) {
  const Grid& g = psi.grid();
  require_same_grid(g, U.grid(), "energy");
  const Fft fft(g);
  const Buffer buf(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    buf.data[i][0] = psi.re()[i];
    buf.data[i][1] = psi.im()[i];
  }
  fft.forward(buf.data);
  const std::vector<double> k2 = wavenumber_squared(g);
  std::vector<double> terms(g.size());
  double cell = 1.0;
  for (std::size_t a = 0; a < g.dim(); ++a) cell *= g.spacing(a);
  for (std::size_t i = 0; i < g.size(); ++i)
    terms[i] = k2[i] * (buf.data[i][0] * buf.data[i][0] + buf.data[i][1] * buf.data[i][1]);
  const double kinetic = psi.hbar() * psi.hbar() / (2 * psi.m()) * cell / static_cast<double>(g.size()) *
                         pairwise_sum(terms);
  return kinetic + integrate(U * psi.density());
}

WaveFunction wave_from_expressions(const Grid& grid, const Expr& re, const Expr& im, double hbar, double m) {
  require_periodic(grid);
  return WaveFunction::normalized(eval_on_grid(re, grid), eval_on_grid(im, grid), hbar, m);
}

WaveFunction gaussian_packet(const Grid& grid, const std::vector<double>& centre, double sigma0,
                             const std::vector<double>& momentum, double hbar, double m) {
  require_periodic(grid);
  require_positive(hbar, m);
  const std::size_t n = grid.dim();
  if (centre.size() != n || momentum.size() != n) throw InvalidArgument("centre and momentum need one entry per axis");
  if (!(sigma0 > 0.0)) throw InvalidArgument("sigma0 must be positive");
  ScalarField re(grid), im(grid);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.point(i, x);
    double r2 = 0.0, phase = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      r2 += (x[a] - centre[a]) * (x[a] - centre[a]);
      phase += momentum[a] * x[a] / hbar;
    }
    const double amp = std::exp(-r2 / (4 * sigma0 * sigma0));
    re[i] = amp * std::cos(phase);
    im[i] = amp * std::sin(phase);
  }
  return WaveFunction::normalized(std::move(re), std::move(im), hbar, m);
}

WaveFunction coherent_state(const Grid& grid, const std::vector<double>& x0, double omega, double hbar, double m) {
  if (!(omega > 0.0)) throw InvalidArgument("omega must be positive");
  require_positive(hbar, m);
  return gaussian_packet(grid, x0, std::sqrt(hbar / (2 * m * omega)), std::vector<double>(grid.dim(), 0.0), hbar,
                         m);
}

struct SplitStep::Impl {
  Impl(const Grid& g, const ScalarField& U, double hbar, double m, double dt) : grid(g), fft(g) {
    const std::vector<double> k2 = wavenumber_squared(g);
    kinetic.resize(g.size());
    potential.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      kinetic[i] = std::polar(1.0, -hbar * k2[i] * dt / (4 * m)) / static_cast<double>(g.size());
      potential[i] = std::polar(1.0, -U[i] * dt / hbar);
    }
  }
  void half_kinetic(fftw_complex* data) const {
    fft.forward(data);
    for (std::size_t i = 0; i < kinetic.size(); ++i) {
      const std::complex<double> z = std::complex<double>(data[i][0], data[i][1]) * kinetic[i];
      data[i][0] = z.real();
      data[i][1] = z.imag();
    }
    fft.backward(data);
  }

  Grid grid;
  Fft fft;
  std::vector<std::complex<double>> kinetic;    // half step, includes the 1/N of the inverse transform
  std::vector<std::complex<double>> potential;  // full step
};

SplitStep::SplitStep(const Grid& grid, ScalarField U, double hbar, double m, double dt) : dt_(dt) {
  require_periodic(grid);
  require_positive(hbar, m);
  require_same_grid(grid, U.grid(), "split step");
  U.require_finite("potential");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  const double budget = dt * U.max_abs() / hbar;
  if (!(budget < 0.5))
    throw PreconditionError("dt max|U| / hbar = " + std::to_string(budget) + " exceeds the stability budget 0.5");
  impl_ = std::make_unique<Impl>(grid, U, hbar, m, dt);
}

SplitStep::~SplitStep() = default;

WaveFunction SplitStep::advance(const WaveFunction& psi, std::size_t steps) const {
  require_same_grid(psi.grid(), impl_->grid, "split step");
  const std::size_t n = impl_->grid.size();
  const Buffer buf(n);
  for (std::size_t i = 0; i < n; ++i) {
    buf.data[i][0] = psi.re()[i];
    buf.data[i][1] = psi.im()[i];
  }
  for (std::size_t s = 0; s < steps; ++s) {
    impl_->half_kinetic(buf.data);
    for (std::size_t i = 0; i < n; ++i) {
      const std::complex<double> z = std::complex<double>(buf.data[i][0], buf.data[i][1]) * impl_->potential[i];
      buf.data[i][0] = z.real();
      buf.data[i][1] = z.imag();
    }
    impl_->half_kinetic(buf.data);
  }
  ScalarField re(impl_->grid), im(impl_->grid);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = buf.data[i][0];
    im[i] = buf.data[i][1];
  }
  return WaveFunction(std::move(re), std::move(im), psi.hbar(), psi.m());
}

Evolution split_step_evolve(const WaveFunction& psi, const ScalarField& U, double dt, std::size_t steps,
                            std::size_t stride) {
  if (stride == 0) throw InvalidArgument("snapshot stride must be positive");
  const SplitStep stepper(psi.grid(), U, psi.hbar(), psi.m(), dt);
  Evolution ev{{0.0}, {psi}};
  std::size_t done = 0;
  while (done < steps) {
    const std::size_t chunk = std::min(stride, steps - done);
    ev.snapshots.push_back(stepper.advance(ev.snapshots.back(), chunk));
    done += chunk;
    ev.times.push_back(static_cast<double>(done) * dt);
  }
  return ev;
}

Evolution split_step_evolve(const WaveFunction& psi, const Expr& U, double dt, std::size_t steps,
                            std::size_t stride) {
  return split_step_evolve(psi, eval_on_grid(U, psi.grid()), dt, steps, stride);
}

namespace {

// Connected components of the nodes where mask is set, with periodic neighbours.
std::vector<std::vector<std::size_t>> components(const Grid& g, const std::vector<unsigned char>& mask) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<unsigned char> seen(g.size(), 0);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < g.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    out.emplace_back();
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      out.back().push_back(i);
      for (std::size_t a = 0; a < g.dim(); ++a) {
        const std::size_t n = g.points(a), k = g.index_along(i, a), s = g.stride(a);
        for (const std::size_t next : {i - k * s + ((k + 1) % n) * s, i - k * s + ((k + n - 1) % n) * s}) {
          if (mask[next] && !seen[next]) {
            seen[next] = 1;
            stack.push_back(next);
          }
        }
      }
    }
  }
  return out;
}

void detect_nodes(const WaveFunction& psi, const ScalarField& rho, const std::vector<unsigned char>& active) {
  const Grid& g = psi.grid();
  std::vector<unsigned char> inactive(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) inactive[i] = !active[i];
  auto parts = components(g, inactive);
  if (parts.size() > 1) {
    std::sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
    throw NodeDetected(*std::min_element(parts.front().begin(), parts.front().end()));
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!active[i]) continue;
    for (std::size_t a = 0; a < g.dim(); ++a) {
      const std::size_t n = g.points(a), k = g.index_along(i, a), s = g.stride(a);
      const std::size_t j = i - k * s + ((k + 1) % n) * s;
      if (!active[j]) continue;
      // Re(psi_j conj(psi_i)) < 0: the phase turns by more than pi/2 between neighbours.
      if (psi.re()[j] * psi.re()[i] + psi.im()[j] * psi.im()[i] < 0.0) throw NodeDetected(rho[i] < rho[j] ? i : j);
    }
  }
}

}  // namespace

MadelungState madelung_decompose(const WaveFunction& psi) {
  const Grid& g = psi.grid();
  const std::size_t n = g.dim();
  ScalarField rho = psi.density();
  const double peak = rho.max();
  std::vector<unsigned char> active(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) active[i] = rho[i] >= kNodeRel * peak;
  detect_nodes(psi, rho, active);

  const double c = psi.hbar() / psi.m();
  VectorField V(g);
  for (std::size_t a = 0; a < n; ++a) {
    const ScalarField dre = partial(psi.re(), a), dim = partial(psi.im(), a);
    for (std::size_t i = 0; i < g.size(); ++i)
      V[a][i] = active[i] ? c * (psi.re()[i] * dim[i] - psi.im()[i] * dre[i]) / rho[i] : 0.0;
  }

  // lap(sqrt rho)/sqrt rho = lap(g)/2 + |grad g|^2/4 with g = log rho.
  const double floor = kFloorRel * peak;
  ScalarField lg(g);
  for (std::size_t i = 0; i < g.size(); ++i) lg[i] = std::log(std::max(rho[i], std::numeric_limits<double>::min()));
  const VectorField dg = gradient(lg);
  ScalarField Q(g);
  for (std::size_t a = 0; a < n; ++a) {
    const ScalarField second = partial(dg[a], a);
    for (std::size_t i = 0; i < g.size(); ++i) Q[i] += 0.5 * second[i] + 0.25 * dg[a][i] * dg[a][i];
  }
  const double q = -psi.hbar() * psi.hbar() / (2 * psi.m());
  for (std::size_t i = 0; i < g.size(); ++i) Q[i] = rho[i] >= floor ? q * Q[i] : 0.0;
  Q.require_finite("quantum potential");
  return MadelungState{DensityField(std::move(rho)), std::move(V), std::move(Q), std::move(active)};
}

WeakCurve madelung_curve(const Evolution& ev) {
  std::vector<DensityField> rho;
  std::vector<VectorField> vel;
  for (const WaveFunction& psi : ev.snapshots) {
    MadelungState s = madelung_decompose(psi);
    rho.push_back(std::move(s.rho));
    vel.push_back(std::move(s.V));
  }
  return WeakCurve(ev.times, std::move(rho), std::move(vel));
}

namespace {

VectorField potential_gradient(const Grid& g, const Expr& U) {
  std::vector<ScalarField> comps;
  for (const std::string& x : spatial_names(g.dim())) comps.push_back(eval_on_grid(derivative(U, x), g));
  return VectorField(std::move(comps));
}

// m (d_t V + (V.grad) V) + grad U at k, without the density factor.
VectorField newton_bracket(const std::vector<MadelungState>& s, double dt, double m, const VectorField& gradU,
                           std::size_t k) {
  VectorField out = s[k + 1].V - s[k - 1].V;
  out *= 0.5 / dt;
  out += directional_derivative(s[k].V, s[k].V);
  out *= m;
  out += gradU;
  return out;
}

void require_interior(const Evolution& ev, std::size_t k) {
  if (ev.snapshots.size() < 3) throw InvalidArgument("need at least three snapshots");
  if (k < 1 || k + 2 > ev.snapshots.size())
    throw InvalidArgument("time index " + std::to_string(k) + " is outside the central-difference range");
}

// Nodes whose neighbours up to `reach` steps along every axis are above the
// floor. Near the floor edge the two assembly paths zero different terms.
std::vector<unsigned char> stencil_core(const ScalarField& rho, std::size_t reach) {
  const Grid& g = rho.grid();
  const double floor = kFloorRel * rho.max();
  std::vector<unsigned char> core(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    bool ok = rho[i] >= floor;
    for (std::size_t a = 0; a < g.dim() && ok; ++a) {
      const std::size_t m = g.points(a), k = g.index_along(i, a), st = g.stride(a);
      for (std::size_t d = 1; d <= reach && ok; ++d)
        ok = rho[i - k * st + ((k + d) % m) * st] >= floor && rho[i - k * st + ((k + m - d % m) % m) * st] >= floor;
    }
    core[i] = ok;
  }
  return core;
}

double vector_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

VectorNorm weak_newton_residual(const Evolution& ev, const Expr& U, std::size_t k) {
  require_interior(ev, k);
  const WaveFunction& psi = ev.snapshots[k];
  const std::vector<MadelungState> s{madelung_decompose(ev.snapshots[k - 1]), madelung_decompose(psi),
                                     madelung_decompose(ev.snapshots[k + 1])};
  const double dt = ev.times[k + 1] - ev.times[k];
  const VectorField field = s[1].rho.field() * newton_bracket(s, dt, psi.m(), potential_gradient(psi.grid(), U), 1);
  VectorNorm r;
  for (std::size_t a = 0; a < field.components(); ++a) r.value.push_back(integrate(field[a]));
  r.norm = vector_norm(r.value);
  return r;
}

QuantumBalance quantum_potential_balance(const MadelungState& state) {
  const ScalarField& rho = state.rho.field();
  const Grid& g = rho.grid();
  const VectorField field = rho * gradient(state.Q);
  QuantumBalance r;
  for (std::size_t a = 0; a < g.dim(); ++a) r.value.push_back(integrate(field[a]));
  r.norm = vector_norm(r.value);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t a = 0; a < g.dim(); ++a) {
      const std::size_t k = g.index_along(i, a);
      if (k == 0 || k + 1 == g.points(a)) r.boundary_trace = std::max(r.boundary_trace, rho[i]);
    }
  r.flagged = r.boundary_trace > 1e-12;
  return r;
}

std::vector<EquivalenceEntry> schrodinger_el_equivalence(const Evolution& ev, const Expr& U) {
  if (ev.snapshots.size() < 3) throw InvalidArgument("need at least three snapshots");
  const WaveFunction& first = ev.snapshots.front();
  const Grid& g = first.grid();
  const std::size_t n = g.dim();
  std::vector<MadelungState> states;
  for (const WaveFunction& psi : ev.snapshots) states.push_back(madelung_decompose(psi));
  std::vector<DensityField> rho;
  std::vector<VectorField> vel;
  for (const MadelungState& s : states) {
    rho.push_back(s.rho);
    vel.push_back(s.V);
  }
  const WeakCurve curve(ev.times, std::move(rho), std::move(vel));
  const VectorField gradU = potential_gradient(g, U);
  const auto L = kinetic_minus_potential(n, first.m(), U);
  const auto F = madelung_functional(first.hbar(), first.m());
  const auto printed = bohm_functional(first.hbar(), first.m());

  std::vector<EquivalenceEntry> out;
  for (std::size_t k = 1; k + 1 < states.size(); ++k) {
    const MadelungState& s = states[k];
    const VectorField newton = newton_bracket(states, curve.dt(), first.m(), gradU, k);
    const VectorField gradQ = gradient(s.Q);
    const VectorField field = s.rho.field() * (newton + gradQ);
    const VectorField other = weak_el_residual(curve, *L, *F, k, DerivativeMode::log);
    // The functional's printed sign turns +grad Q into -grad Q.
    const VectorField field_printed = s.rho.field() * (newton - gradQ);
    const VectorField other_printed = weak_el_residual(curve, *L, *printed, k, DerivativeMode::log);

    EquivalenceEntry e;
    e.time = ev.times[k];
    const std::vector<unsigned char> core = stencil_core(s.rho.field(), 3);
    for (std::size_t a = 0; a < n; ++a) {
      ScalarField mag(g);
      for (std::size_t i = 0; i < g.size(); ++i) {
        mag[i] = std::abs(field[a][i]);
        if (!core[i]) continue;
        e.cross_check = std::max(e.cross_check, std::abs(field[a][i] - other[a][i]));
        e.cross_check_printed =
            std::max(e.cross_check_printed, std::abs(field_printed[a][i] - other_printed[a][i]));
      }
      e.el_l1 += integrate(mag);
    }
    ScalarField cont = continuity_residual(curve, k);
    for (std::size_t i = 0; i < g.size(); ++i) cont[i] = std::abs(cont[i]);
    e.continuity_l1 = integrate(cont);

    // Curl on nodes whose whole stencil is active.
    if (n >= 2) {
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
          const ScalarField c = partial(s.V[b], a) - partial(s.V[a], b);
          for (std::size_t i = 0; i < g.size(); ++i) {
            bool inside = s.active[i];
            for (std::size_t d = 0; d < n && inside; ++d) {
              const std::size_t m = g.points(d), k2 = g.index_along(i, d), st = g.stride(d);
              inside = s.active[i - k2 * st + ((k2 + 1) % m) * st] && s.active[i - k2 * st + ((k2 + m - 1) % m) * st];
            }
            if (inside) e.curl_linf = std::max(e.curl_linf, std::abs(c[i]));
          }
        }
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace weakform
