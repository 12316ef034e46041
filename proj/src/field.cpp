#include "weakform/field.hpp"

#include <algorithm>
#include <cmath>

namespace weakform {

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw InvalidArgument("grid needs at least one axis");
  strides_.assign(axes_.size(), 1);
  spacing_.resize(axes_.size());
  size_ = 1;
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    const Axis& ax = axes_[a];
    if (!std::isfinite(ax.lo) || !std::isfinite(ax.hi) || !(ax.hi > ax.lo))
      throw InvalidArgument("grid axis " + std::to_string(a) + " needs finite lo < hi");
    if (ax.points < 4) throw InvalidArgument("grid axis " + std::to_string(a) + " needs at least 4 points");
    spacing_[a] = (ax.hi - ax.lo) / static_cast<double>(ax.periodic ? ax.points : ax.points - 1);
    size_ *= ax.points;
  }
  for (std::size_t a = axes_.size() - 1; a > 0; --a) strides_[a - 1] = strides_[a] * axes_[a].points;
}

void Grid::point(std::size_t flat, std::span<double> x) const {
  for (std::size_t a = 0; a < axes_.size(); ++a) x[a] = coordinate(a, index_along(flat, a));
}

bool Grid::all_periodic() const noexcept {
  return std::all_of(axes_.begin(), axes_.end(), [](const Axis& a) { return a.periodic; });
}

bool Grid::any_periodic() const noexcept {
  return std::any_of(axes_.begin(), axes_.end(), [](const Axis& a) { return a.periodic; });
}

Grid Grid::refined() const {
  std::vector<Axis> axes = axes_;
  for (Axis& a : axes) a.points = a.periodic ? 2 * a.points : 2 * (a.points - 1) + 1;
  return Grid(std::move(axes));
}

void require_same_grid(const Grid& a, const Grid& b, const char* context) {
  if (!(a == b)) throw GridMismatch(std::string(context) + ": fields live on different grids");
}

ScalarField::ScalarField(Grid grid, double fill) : grid_(std::move(grid)), values_(grid_.size(), fill) {}

ScalarField::ScalarField(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw GridMismatch("scalar field has " + std::to_string(values_.size()) + " values for a grid of " +
                       std::to_string(grid_.size()));
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_, "field addition");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_, "field subtraction");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

ScalarField& ScalarField::operator*=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_, "field product");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] *= o.values_[i];
  return *this;
}

ScalarField& ScalarField::operator*=(double c) {
  for (double& v : values_) v *= c;
  return *this;
}

double ScalarField::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double ScalarField::min() const noexcept { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const noexcept { return *std::max_element(values_.begin(), values_.end()); }

void ScalarField::require_finite(const char* context) const {
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i])) throw NonFiniteValue(i, context);
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(ScalarField a, const ScalarField& b) { return a *= b; }
ScalarField operator*(double c, ScalarField a) { return a *= c; }
ScalarField operator-(ScalarField a) { return a *= -1.0; }

VectorField::VectorField(const Grid& grid) {
  comps_.reserve(grid.dim());
  for (std::size_t c = 0; c < grid.dim(); ++c) comps_.emplace_back(grid);
}

VectorField::VectorField(std::vector<ScalarField> components) : comps_(std::move(components)) {
  if (comps_.empty()) throw InvalidArgument("vector field needs components");
  if (comps_.size() != comps_[0].grid().dim())
    throw GridMismatch("vector field needs one component per grid axis");
  for (const ScalarField& c : comps_) require_same_grid(c.grid(), comps_[0].grid(), "vector field");
}

const Grid& VectorField::grid() const {
  if (comps_.empty()) throw InvalidArgument("empty vector field");
  return comps_[0].grid();
}

VectorField& VectorField::operator+=(const VectorField& o) {
  for (std::size_t c = 0; c < comps_.size(); ++c) comps_[c] += o.comps_.at(c);
  return *this;
}

VectorField& VectorField::operator-=(const VectorField& o) {
  for (std::size_t c = 0; c < comps_.size(); ++c) comps_[c] -= o.comps_.at(c);
  return *this;
}

VectorField& VectorField::operator*=(double c) {
  for (ScalarField& f : comps_) f *= c;
  return *this;
}

double VectorField::max_abs() const noexcept {
  double m = 0.0;
  for (const ScalarField& f : comps_) m = std::max(m, f.max_abs());
  return m;
}

void VectorField::require_finite(const char* context) const {
  for (const ScalarField& f : comps_) f.require_finite(context);
}

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double c, VectorField a) { return a *= c; }

VectorField operator*(const ScalarField& f, VectorField v) {
  for (std::size_t c = 0; c < v.components(); ++c) v[c] *= f;
  return v;
}

ScalarField dot(const VectorField& a, const VectorField& b) {
  ScalarField out(a.grid());
  for (std::size_t c = 0; c < a.components(); ++c) out += a[c] * b[c];
  return out;
}

}  // namespace weakform
