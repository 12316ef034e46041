#include "weakform/density.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "weakform/calculus.hpp"

namespace weakform {

double boundary_trace(const ScalarField& f) {
  const Grid& g = f.grid();
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    bool on_face = false;
    for (std::size_t a = 0; a < g.dim() && !on_face; ++a) {
      if (g.axis(a).periodic) continue;
      const std::size_t k = g.index_along(i, a);
      on_face = k == 0 || k + 1 == g.points(a);
    }
    if (on_face) m = std::max(m, std::abs(f[i]));
  }
  return m;
}

DensityField::DensityField(ScalarField rho, DensityTolerances tol) : rho_(std::move(rho)) {
  rho_.require_finite("density");
  for (std::size_t i = 0; i < rho_.size(); ++i)
    if (rho_[i] < 0.0) throw PreconditionError("density is negative at flat index " + std::to_string(i));
  const double mass = integrate(rho_);
  if (std::abs(mass - 1.0) > tol.norm) {
    std::ostringstream os;
    os << "density mass " << mass << " differs from 1 by more than " << tol.norm;
    throw PreconditionError(os.str());
  }
  const double trace = boundary_trace(rho_);
  if (trace > tol.boundary) {
    std::ostringstream os;
    os << "density boundary trace " << trace << " exceeds " << tol.boundary << "; widen the box";
    throw PreconditionError(os.str());
  }
}

DensityField DensityField::normalized(ScalarField rho, DensityTolerances tol) {
  rho.require_finite("density");
  const double mass = integrate(rho);
  if (!(mass > 0.0)) throw PreconditionError("density has no mass");
  rho *= 1.0 / mass;
  return DensityField(std::move(rho), tol);
}

DensityField DensityField::trusted(ScalarField rho) {
  DensityField d;
  d.rho_ = std::move(rho);
  return d;
}

}  // namespace weakform
