#pragma once

#include "weakform/field.hpp"

namespace weakform {

struct DensityTolerances {
  double norm = 1e-8;       // |integral - 1|
  double boundary = 1e-12;  // largest value on non-periodic boundary faces
};

// Largest |f| on the boundary faces of non-periodic axes; 0 on a torus.
double boundary_trace(const ScalarField& f);

// A non-negative field with unit mass that decays towards non-periodic faces.
class DensityField {
 public:
  DensityField() = default;
  explicit DensityField(ScalarField rho, DensityTolerances tol = {});
  // Rescales to unit mass before validating.
  static DensityField normalized(ScalarField rho, DensityTolerances tol = {});
  // Skips validation; for values that are densities by construction.
  static DensityField trusted(ScalarField rho);

  const ScalarField& field() const noexcept { return rho_; }
  operator const ScalarField&() const noexcept { return rho_; }
  const Grid& grid() const noexcept { return rho_.grid(); }
  std::size_t size() const noexcept { return rho_.size(); }
  double operator[](std::size_t i) const { return rho_[i]; }
  std::span<const double> values() const noexcept { return rho_.values(); }

 private:
  ScalarField rho_;
};

}  // namespace weakform
