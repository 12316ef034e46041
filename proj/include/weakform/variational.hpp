#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "weakform/expr.hpp"
#include "weakform/weak_calculus.hpp"

namespace weakform {

class Lagrangian {
 public:
  virtual ~Lagrangian() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> x, std::span<const double> v) const = 0;
  virtual void dx(std::span<const double> x, std::span<const double> v, std::span<double> out) const = 0;
  virtual void dv(std::span<const double> x, std::span<const double> v, std::span<double> out) const = 0;
};

// L = m|v|^2/2 - U(x); dL/dx = -grad U by symbolic differentiation.
std::shared_ptr<const Lagrangian> kinetic_minus_potential(std::size_t dim, double m, const Expr& U);
// L, dL/dx_a, dL/dv_a in x1..xn and v1..vn; partials are checked against
// central differences at construction.
std::shared_ptr<const Lagrangian> expression_lagrangian(std::size_t dim, const Expr& L, std::vector<Expr> dL_dx,
                                                        std::vector<Expr> dL_dv);
// Throws InvalidArgument if a partial disagrees with a central difference by
// more than 1e-6 relative on seeded samples in [-2, 2]^2n.
void validate_lagrangian(const Lagrangian& L, std::uint64_t seed = 7);

// F(y, y_i, y_ij) with y_ij symmetric, stored row-major n x n. Partials use the
// symmetric convention: G_ij = G_ji and dF = sum_ij G_ij dy_ij for symmetric dy,
// so an off-diagonal G_ij is half the derivative along dy_ij = dy_ji.
class DensityFunctional {
 public:
  virtual ~DensityFunctional() = default;
  virtual double value(double y, std::span<const double> yi, std::span<const double> yij) const = 0;
  virtual void partials(double y, std::span<const double> yi, std::span<const double> yij, double& fy,
                        std::span<double> fyi, std::span<double> fyij) const = 0;
  virtual bool vanishes() const { return false; }
};

std::shared_ptr<const DensityFunctional> no_functional();
// -hbar^2/2m (-sum y_i^2 / 4y^2 + sum y_ii / 2y), which equals the quantum potential Q.
std::shared_ptr<const DensityFunctional> bohm_functional(double hbar, double m);
// The negated Bohm functional, -Q; the sign under which the weak Euler-Lagrange
// equation reproduces the Schroedinger momentum balance.
std::shared_ptr<const DensityFunctional> madelung_functional(double hbar, double m);
// Expressions in y, y1..yn, y11..ynn (y_ij for i <= j, symmetric); dF_dyij is
// n x n in the symmetric convention. Validated against central differences.
std::shared_ptr<const DensityFunctional> expression_functional(std::size_t dim, const Expr& F, const Expr& dF_dy,
                                                               std::vector<Expr> dF_dyi,
                                                               std::vector<std::vector<Expr>> dF_dyij);
void validate_functional(const DensityFunctional& F, std::size_t dim, std::uint64_t seed = 11);

// Derivatives of rho feeding F. log: y_i = rho D_i g, y_ij = rho (D_i D_j g + D_i g D_j g)
// with g = log rho; direct: y_i = D_i rho, y_ij = D_i D_j rho.
enum class DerivativeMode { log, direct };

struct DensityJet {
  ScalarField y;
  VectorField yi;
  std::vector<ScalarField> yij;  // n*n, symmetric
  std::vector<unsigned char> active;  // rho >= floor
};
// Nodes with rho < floor_rel * max(rho) are inactive: F and its partials are taken as 0 there.
DensityJet density_jet(const ScalarField& rho, DerivativeMode mode, double floor_rel = 1e-13);

// F evaluated on a density, zero on inactive nodes.
ScalarField functional_field(const DensityFunctional& F, const ScalarField& rho, DerivativeMode mode);
// rho F_y - D_i(rho F_yi) + D_i D_j(rho G_ij).
ScalarField functional_identity_defect(const DensityFunctional& F, const ScalarField& rho,
                                       DerivativeMode mode = DerivativeMode::log);

// Trapezoid in time of the integral of rho (L(x, V) + F).
double action(const WeakCurve& curve, const Lagrangian& L, const DensityFunctional& F,
              DerivativeMode mode = DerivativeMode::log);

struct ElResidual {
  VectorField weighted;       // rho (bracket)
  double weighted_l1 = 0.0;   // integral of |rho bracket|, summed over components
  double bracket_linf = 0.0;  // max |bracket| where rho >= floor
};

// rho ((d_t + V.D) dL/dv - dL/dx - D F - D(rho F_y - D_i(rho F_yi) + D_i D_j(rho G_ij))) at an interior k.
ElResidual weak_el(const WeakCurve& curve, const Lagrangian& L, const DensityFunctional& F, std::size_t k,
                   DerivativeMode mode = DerivativeMode::log, double floor_rel = 1e-13);
VectorField weak_el_residual(const WeakCurve& curve, const Lagrangian& L, const DensityFunctional& F, std::size_t k,
                             DerivativeMode mode = DerivativeMode::log);

struct Variation {
  double ds = 0.0;
  std::vector<VectorField> W;  // one per time
  WeakCurve minus, base, plus;
};

// rho(+-ds) by one RK4 step of d rho/ds = -div(rho W); V(+-ds) from the gradient
// (minimal-energy) solution of continuity on each slice. W is an expression in
// t and x1..xn and must vanish at both end times; periodic grids only.
Variation build_variation(const WeakCurve& curve, const std::vector<Expr>& W, double ds,
                          EllipticOptions opt = {});

struct GradientCheck {
  double fd = 0.0;       // (S(+ds) - S(-ds)) / 2ds
  double formula = 0.0;  // -sum_k dt integral of residual_k . W_k over interior k
  double rel_err = 0.0;
};
GradientCheck variation_gradient_check(const Variation& var, const Lagrangian& L, const DensityFunctional& F,
                                       DerivativeMode mode = DerivativeMode::log);

}  // namespace weakform
