#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "weakform/error.hpp"

namespace weakform {

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t points = 4;
  bool periodic = false;

  bool operator==(const Axis&) const = default;
};

// Uniform Cartesian lattice on a box. Periodic axes exclude the right endpoint.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<Axis> axes);

  std::size_t dim() const noexcept { return axes_.size(); }
  std::size_t size() const noexcept { return size_; }
  const Axis& axis(std::size_t a) const { return axes_.at(a); }
  const std::vector<Axis>& axes() const noexcept { return axes_; }
  std::size_t points(std::size_t a) const { return axes_[a].points; }
  double spacing(std::size_t a) const { return spacing_[a]; }
  // Row-major: the last axis varies fastest.
  std::size_t stride(std::size_t a) const { return strides_[a]; }
  double coordinate(std::size_t a, std::size_t i) const { return axes_[a].lo + static_cast<double>(i) * spacing_[a]; }
  std::size_t index_along(std::size_t flat, std::size_t a) const { return (flat / strides_[a]) % axes_[a].points; }
  void point(std::size_t flat, std::span<double> x) const;
  bool all_periodic() const noexcept;
  bool any_periodic() const noexcept;

  // Halve every spacing: periodic axes double their points, others go to 2(N-1)+1.
  Grid refined() const;

  bool operator==(const Grid& other) const { return axes_ == other.axes_; }

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::vector<double> spacing_;
  std::size_t size_ = 0;
};

void require_same_grid(const Grid& a, const Grid& b, const char* context);

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(Grid grid, double fill = 0.0);
  ScalarField(Grid grid, std::vector<double> values);

  template <class F>
  static ScalarField sample(const Grid& grid, F&& f);

  const Grid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(const ScalarField& o);
  ScalarField& operator*=(double c);

  double max_abs() const noexcept;
  double min() const noexcept;
  double max() const noexcept;
  // Throws NonFiniteValue naming the first offending index.
  void require_finite(const char* context) const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(ScalarField a, const ScalarField& b);
ScalarField operator*(double c, ScalarField a);
ScalarField operator-(ScalarField a);

class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const Grid& grid);
  explicit VectorField(std::vector<ScalarField> components);

  const Grid& grid() const;
  std::size_t components() const noexcept { return comps_.size(); }
  const ScalarField& operator[](std::size_t c) const { return comps_[c]; }
  ScalarField& operator[](std::size_t c) { return comps_[c]; }

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double c);

  // Largest component magnitude over the grid.
  double max_abs() const noexcept;
  void require_finite(const char* context) const;

 private:
  std::vector<ScalarField> comps_;
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double c, VectorField a);
VectorField operator*(const ScalarField& f, VectorField v);
ScalarField dot(const VectorField& a, const VectorField& b);

template <class F>
ScalarField ScalarField::sample(const Grid& grid, F&& f) {
  ScalarField out(grid);
  const std::size_t n = grid.size();
  const std::size_t d = grid.dim();
#pragma omp parallel
  {
    std::vector<double> x(d);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      grid.point(i, x);
      out.values_[i] = f(std::span<const double>(x));
    }
  }
  return out;
}

}  // namespace weakform
