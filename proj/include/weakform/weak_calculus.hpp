#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "weakform/density.hpp"
#include "weakform/expr.hpp"
#include "weakform/field.hpp"

namespace weakform {

// Time-indexed pairs (rho_k, V_k) on one grid with a uniform step.
class WeakCurve {
 public:
  WeakCurve(std::vector<double> times, std::vector<DensityField> rho, std::vector<VectorField> vel);

  std::size_t size() const noexcept { return times_.size(); }
  double dt() const noexcept { return dt_; }
  const std::vector<double>& times() const noexcept { return times_; }
  const Grid& grid() const noexcept { return rho_.front().grid(); }
  const DensityField& rho(std::size_t k) const { return rho_.at(k); }
  const VectorField& vel(std::size_t k) const { return vel_.at(k); }

 private:
  std::vector<double> times_;
  double dt_ = 0.0;
  std::vector<DensityField> rho_;
  std::vector<VectorField> vel_;
};

// Samples rho(t, x) and V(t, x) at `count` uniform times in [t0, t1]. With
// `normalize`, each rho snapshot is rescaled to unit mass.
WeakCurve curve_from_expressions(const Grid& grid, const Expr& rho, const std::vector<Expr>& vel, double t0, double t1,
                                 std::size_t count, bool normalize = true, DensityTolerances tol = {});

// (rho_{k+1} - rho_{k-1})/2dt + div(rho_k V_k) for 1 <= k <= T-2.
ScalarField continuity_residual(const WeakCurve& curve, std::size_t k);

// d/dt of the integral of rho f minus the integral of rho grad(f).V at time k.
double weak_derivative_defect(const WeakCurve& curve, const ScalarField& f, std::size_t k,
                              double boundary_tolerance = 1e-12);

// div(div(fW) V) - div(div(fV) W) - div(f [V,W]) with [V,W] = (V.grad)W - (W.grad)V.
ScalarField divergence_identity_defect(const ScalarField& f, const VectorField& v, const VectorField& w);

// Pointwise source of a multi-parameter family: for a bound parameter u,
// eval() yields rho and the m velocities V_j (stored as vel[j*n + c]).
class WeakFamily {
 public:
  class Point {
   public:
    virtual ~Point() = default;
    virtual void eval(std::size_t flat, std::span<const double> x, double& rho, std::span<double> vel) const = 0;
  };

  virtual ~WeakFamily() = default;
  virtual std::size_t params() const = 0;
  virtual std::size_t target_dim() const = 0;
  virtual std::unique_ptr<Point> bind(std::span<const double> u) const = 0;
};

using DensityFn = std::function<double(std::span<const double>)>;

// Isotropic Gaussian with standard deviation `std` centred at the origin.
DensityFn gaussian_density(std::size_t dim, double std);
// Expression in x1..xn; normalization is the caller's business.
DensityFn expression_density(const Expr& e, std::size_t dim);

struct WeakNode {
  DensityField rho;
  std::vector<VectorField> vel;
};

class WeakFunction {
 public:
  WeakFunction(Grid params, Grid target, std::shared_ptr<const WeakFamily> family, DensityTolerances tol = {});

  const Grid& params() const noexcept { return params_; }
  const Grid& target() const noexcept { return target_; }
  std::size_t m() const noexcept { return params_.dim(); }
  const WeakFamily& family() const noexcept { return *family_; }
  const std::shared_ptr<const WeakFamily>& family_ptr() const noexcept { return family_; }
  const DensityTolerances& tolerances() const noexcept { return tol_; }

  // Materializes one parameter node; the density is validated.
  WeakNode node(std::size_t param_flat) const;
  WeakNode node_at(std::span<const double> u) const;
  // Node neighbour along `axis`, wrapping on periodic parameter axes.
  std::size_t neighbour(std::size_t param_flat, std::size_t axis, int step) const;
  bool interior(std::size_t param_flat) const;

 private:
  Grid params_;
  Grid target_;
  std::shared_ptr<const WeakFamily> family_;
  DensityTolerances tol_;
};

// rho(u) = sigma(M(u)^-1 (x - A u)) / |det M(u)| with M(u) = exp(u1 G1) ... exp(um Gm).
// Its velocities V_j = (dM/du_j M^-1)(x - A u) + A_j satisfy continuity exactly.
struct AffineFlowSpec {
  std::vector<std::vector<double>> A;                        // n rows, m columns
  std::vector<std::vector<std::vector<double>>> generators;  // m matrices n x n, empty for none
  DensityFn sigma;
};
std::shared_ptr<const WeakFamily> affine_flow(AffineFlowSpec spec);

// The linear-map example: rho(u, x) = sigma(x - A u), V_i = A_i.
WeakFunction linear_pushforward(const std::vector<std::vector<double>>& A, DensityFn sigma, const Grid& params,
                                const Grid& target, DensityTolerances tol = {});

// Scales V_axis by `factor`, leaving rho alone; a deliberately inconsistent family.
std::shared_ptr<const WeakFamily> scaled_velocity(std::shared_ptr<const WeakFamily> base, std::size_t axis, double factor);

// Family given by expressions in x1..xn and u1..um, optionally renormalized per node.
std::shared_ptr<const WeakFamily> expression_family(const Expr& rho, const std::vector<std::vector<Expr>>& vel,
                                                    std::size_t dim, bool normalize, const Grid& target);

// Stored nodes in parameter-grid order; binds only at grid nodes.
std::shared_ptr<const WeakFamily> materialized_family(Grid params, std::vector<WeakNode> nodes);

// Continuity residual drho/du_axis + div(rho V_axis) at an interior node.
ScalarField continuity_residual(const WeakFunction& wf, std::size_t axis, std::size_t param_flat);
// Largest |residual| over interior nodes (every `stride`-th one) and all axes.
double max_continuity_residual(const WeakFunction& wf, std::size_t stride = 1);

// rho (dV_i/du_j - dV_j/du_i - [V_i, V_j]) at an interior node.
VectorField mixed_partial_defect(const WeakFunction& wf, std::size_t i, std::size_t j, std::size_t param_flat);

struct EllipticOptions {
  double rel_tol = 1e-10;
  std::size_t max_iterations = 0;  // 0 means 20 * grid size
  double floor = 1e-13;           // relative to max(weight)
};

struct EllipticResult {
  VectorField velocity;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

// V = grad(phi) with -div(weight grad(phi)) = rate on a torus, by Jacobi-preconditioned CG.
// With even point counts the wide stencil splits into parity sublattices; the rate is
// projected to zero mean on each and phi is gauge-fixed per sublattice.
EllipticResult solve_weighted_poisson(const ScalarField& weight, const ScalarField& rate, EllipticOptions opt = {});
// Midpoint weight and forward rate between two snapshots.
EllipticResult solve_optimal_velocity(const DensityField& prev, const DensityField& next, double dt,
                                      EllipticOptions opt = {});

struct ReparameterizeReport {
  double original = 0.0;
  double reparameterized = 0.0;
  bool pass = false;
};

// Builds W_i = sum_j B_ji V_j on parameters w with u = B w and compares the
// worst continuity residual with the original's under the same tolerance.
ReparameterizeReport reparameterize_check(const WeakFunction& wf, const std::vector<std::vector<double>>& B,
                                          double tolerance);
WeakFunction reparameterize(const WeakFunction& wf, const std::vector<std::vector<double>>& B);

// Directory layout: manifest.json plus one snapshot per node in the field format.
void save_curve(const WeakCurve& curve, const std::filesystem::path& dir);
WeakCurve load_curve(const std::filesystem::path& dir);
void save_weak_function(const WeakFunction& wf, const std::filesystem::path& dir);
WeakFunction load_weak_function(const std::filesystem::path& dir);

}  // namespace weakform
