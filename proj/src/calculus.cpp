#include "weakform/calculus.hpp"

#include <cmath>

namespace weakform {

ScalarField partial(const ScalarField& f, std::size_t axis) {
  const Grid& g = f.grid();
  if (axis >= g.dim()) throw InvalidArgument("partial: axis out of range");
  f.require_finite("partial");
  ScalarField out(g);
  const std::size_t n = g.points(axis);
  const std::size_t s = g.stride(axis);
  const std::size_t block = n * s;
  const std::size_t lines = g.size() / n;
  const double inv2h = 0.5 / g.spacing(axis);
  const bool periodic = g.axis(axis).periodic;
  const double* in = f.values().data();
  double* o = out.values().data();

#pragma omp parallel for schedule(static)
  for (std::size_t line = 0; line < lines; ++line) {
    const std::size_t base = (line / s) * block + line % s;
    const double* p = in + base;
    double* q = o + base;
    for (std::size_t i = 1; i + 1 < n; ++i) q[i * s] = (p[(i + 1) * s] - p[(i - 1) * s]) * inv2h;
    if (periodic) {
      q[0] = (p[s] - p[(n - 1) * s]) * inv2h;
      q[(n - 1) * s] = (p[0] - p[(n - 2) * s]) * inv2h;
    } else {
      // (-3f0 + 4f1 - f2)/2h, grouped so constants give exactly zero
      q[0] = (3.0 * (p[s] - p[0]) - (p[2 * s] - p[s])) * inv2h;
      q[(n - 1) * s] = (3.0 * (p[(n - 1) * s] - p[(n - 2) * s]) - (p[(n - 2) * s] - p[(n - 3) * s])) * inv2h;
    }
  }
  return out;
}

VectorField gradient(const ScalarField& f) {
  std::vector<ScalarField> comps;
  comps.reserve(f.grid().dim());
  for (std::size_t a = 0; a < f.grid().dim(); ++a) comps.push_back(partial(f, a));
  return VectorField(std::move(comps));
}

ScalarField divergence(const VectorField& v) {
  ScalarField out(v.grid());
  for (std::size_t a = 0; a < v.components(); ++a) {
    require_same_grid(v[a].grid(), v.grid(), "divergence");
    out += partial(v[a], a);
  }
  return out;
}

ScalarField laplacian(const ScalarField& f) { return divergence(gradient(f)); }

VectorField directional_derivative(const VectorField& v, const VectorField& w) {
  require_same_grid(v.grid(), w.grid(), "directional_derivative");
  VectorField out(w.grid());
  for (std::size_t c = 0; c < w.components(); ++c)
    for (std::size_t a = 0; a < v.components(); ++a) out[c] += v[a] * partial(w[c], a);
  return out;
}

VectorField lie_bracket(const VectorField& v, const VectorField& w) {
  return directional_derivative(v, w) - directional_derivative(w, v);
}

ScalarField curl_2d(const VectorField& v) {
  if (v.components() != 2) throw InvalidArgument("curl_2d needs a planar field");
  return partial(v[1], 0) - partial(v[0], 1);
}

std::vector<double> axis_weights(const Axis& axis, double spacing) {
  std::vector<double> w(axis.points, spacing);
  if (!axis.periodic) {
    w.front() *= 0.5;
    w.back() *= 0.5;
  }
  return w;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t mid = values.size() / 2;
  return pairwise_sum(values.first(mid)) + pairwise_sum(values.subspan(mid));
}

double integrate(const ScalarField& f) {
  const double* v = f.values().data();
  return integrate_with(f.grid(), [v](std::size_t i) { return v[i]; });
}

}  // namespace weakform
