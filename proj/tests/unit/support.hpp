#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "weakform/calculus.hpp"
#include "weakform/field.hpp"

namespace wft {

using namespace weakform;

inline Grid box(std::size_t dim, double lo, double hi, std::size_t n, bool periodic) {
  return Grid(std::vector<Axis>(dim, Axis{lo, hi, n, periodic}));
}

inline Grid torus(std::size_t dim, std::size_t n) { return box(dim, 0.0, 2 * std::numbers::pi, n, true); }

// Max |f - g| over nodes whose every index is at least `margin` from a boundary.
inline double max_diff(const ScalarField& f, const ScalarField& g, std::size_t margin = 0) {
  const Grid& grid = f.grid();
  double m = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    bool inside = true;
    for (std::size_t a = 0; a < grid.dim(); ++a) {
      const std::size_t k = grid.index_along(i, a);
      if (k < margin || k + margin >= grid.points(a)) inside = false;
    }
    if (inside) m = std::max(m, std::abs(f[i] - g[i]));
  }
  return m;
}

template <class F>
ScalarField sampled(const Grid& g, F f) {
  return ScalarField::sample(g, [&](std::span<const double> x) { return f(x); });
}

}  // namespace wft
