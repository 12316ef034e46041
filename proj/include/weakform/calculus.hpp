#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "weakform/field.hpp"

namespace weakform {

// Second-order central differences. Periodic axes wrap; other axes use the
// one-sided (-3f0 + 4f1 - f2)/2h stencil at the two boundary nodes.
ScalarField partial(const ScalarField& f, std::size_t axis);
VectorField gradient(const ScalarField& f);
ScalarField divergence(const VectorField& v);
// div(grad f) with the wide stencil, never the compact 3-point one.
ScalarField laplacian(const ScalarField& f);
// Component-wise (V.grad) W_c.
VectorField directional_derivative(const VectorField& v, const VectorField& w);
// (V.grad) W - (W.grad) V
VectorField lie_bracket(const VectorField& v, const VectorField& w);
// Scalar curl dV_1/dx_0 - dV_0/dx_1 of a planar field.
ScalarField curl_2d(const VectorField& v);

// Per-axis quadrature weights: h on periodic axes, trapezoid otherwise.
std::vector<double> axis_weights(const Axis& axis, double spacing);

// Fixed-tree pairwise sum; the result depends only on the input order.
double pairwise_sum(std::span<const double> values);

namespace detail {

template <class F>
double integrate_axis(const Grid& g, const std::vector<std::vector<double>>& w, std::size_t a,
                      std::size_t base, std::size_t lo, std::size_t hi, F& f) {
  if (hi - lo <= 8) {
    double s = 0.0;
    const std::size_t stride = g.stride(a);
    for (std::size_t i = lo; i < hi; ++i) {
      const std::size_t at = base + i * stride;
      const double inner = a + 1 == g.dim() ? f(at) : integrate_axis(g, w, a + 1, at, 0, g.points(a + 1), f);
      s += w[a][i] * inner;
    }
    return s;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return integrate_axis(g, w, a, base, lo, mid, f) + integrate_axis(g, w, a, base, mid, hi, f);
}

}  // namespace detail

// Quadrature of value(flat_index) over the grid with a fixed reduction tree.
template <class F>
double integrate_with(const Grid& grid, F&& value) {
  std::vector<std::vector<double>> w;
  w.reserve(grid.dim());
  for (std::size_t a = 0; a < grid.dim(); ++a) w.push_back(axis_weights(grid.axis(a), grid.spacing(a)));
  return detail::integrate_axis(grid, w, 0, 0, 0, grid.points(0), value);
}

double integrate(const ScalarField& f);

}  // namespace weakform
