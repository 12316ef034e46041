#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "weakform/expr.hpp"
#include "weakform/field.hpp"
#include "weakform/weak_calculus.hpp"

namespace weakform {

using MultiIndex = std::vector<std::size_t>;

// Strictly increasing k-subsets of {0..n-1} in lexicographic order.
std::vector<MultiIndex> increasing_indices(std::size_t n, std::size_t k);

// A k-form sum_I w_I dx^I stored on increasing multi-indices only.
class KForm {
 public:
  KForm(Grid grid, std::size_t degree);
  KForm(Grid grid, std::size_t degree, std::vector<ScalarField> coefficients);

  std::size_t degree() const noexcept { return degree_; }
  const Grid& grid() const noexcept { return grid_; }
  const std::vector<MultiIndex>& indices() const noexcept { return indices_; }
  std::size_t count() const noexcept { return coef_.size(); }
  const ScalarField& operator[](std::size_t slot) const { return coef_.at(slot); }
  ScalarField& operator[](std::size_t slot) { return coef_.at(slot); }
  // Slot of an increasing multi-index.
  std::size_t slot(std::span<const std::size_t> index) const;

  // w(x)(v_1, ..., v_k); vectors[a] holds the n components of v_a.
  double evaluate(std::size_t flat, const std::vector<std::vector<double>>& vectors) const;

  KForm& operator+=(const KForm& o);
  KForm& operator*=(double c);
  double max_abs() const noexcept;

 private:
  Grid grid_;
  std::size_t degree_ = 0;
  std::vector<MultiIndex> indices_;
  std::vector<ScalarField> coef_;
};

KForm operator+(KForm a, const KForm& b);
KForm operator*(double c, KForm a);

// Coefficient expressions in x1..xn, one per increasing multi-index in slot order.
KForm form_from_expressions(const Grid& grid, std::size_t degree, const std::vector<Expr>& coefficients);

// Determinant of the k x k matrix m[a][b], by permutation expansion.
double small_det(const std::vector<std::vector<double>>& m);

KForm exterior_derivative(const KForm& omega);

// A weak function whose continuity residual was measured at construction.
class WeakMap {
 public:
  // `stride` thins the interior parameter nodes visited by the check.
  WeakMap(WeakFunction wf, double tolerance, std::size_t stride = 1);

  const WeakFunction& function() const noexcept { return wf_; }
  double tolerance() const noexcept { return tol_; }
  double continuity() const noexcept { return residual_; }

 private:
  WeakFunction wf_;
  double tol_;
  double residual_;
};

// Integral of rho(q) w(V_{axes[0]}, ..., V_{axes[k-1]}) at every parameter node.
ScalarField weak_pullback(const WeakMap& F, const KForm& omega, std::span<const std::size_t> axes);
// All increasing axis tuples at once: a k-form on the parameter grid.
KForm weak_pullback(const WeakMap& F, const KForm& omega);

struct CommutationResult {
  double defect = 0.0;  // max over interior nodes and tuples
  KForm pulled_d;       // F* dw
  KForm d_pulled;       // d F* w
};
CommutationResult pullback_commutation(const WeakMap& F, const KForm& omega);
double pullback_commutation_defect(const WeakMap& F, const KForm& omega);

struct StokesResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double defect = 0.0;
};

// Integral over the parameter box of F*(dw) against the oriented boundary
// integral of F*w. Face a carries sign (-1)^a outward, so
//   rhs = sum_a (-1)^a [ int_{u_a = hi} a_a - int_{u_a = lo} a_a ],
// with a_a the coefficient of F*w on the axes other than a.
StokesResult weak_stokes_defect(const WeakMap& F, const KForm& omega);

struct SurfaceStokesResult : StokesResult {
  double continuity = 0.0;
  bool flagged = false;  // continuity residual above the tolerance
};

// lhs = int_D int rho curl(F).(U x V), rhs = int_{dD} int rho F.(U du + V dv)
// for a two-parameter weak function into R^3.
SurfaceStokesResult r3_surface_stokes(const WeakFunction& wf, const VectorField& field, double tolerance,
                                      std::size_t stride = 1);

void save_kform(const KForm& omega, const std::filesystem::path& dir);
KForm load_kform(const std::filesystem::path& dir);

}  // namespace weakform
