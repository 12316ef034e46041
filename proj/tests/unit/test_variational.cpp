#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "weakform/variational.hpp"

using namespace wft;

namespace {

// Unit-mass Gaussian of variance s2 on g.
DensityField gaussian(const Grid& g, double s2, double centre = 0.0) {
  return DensityField::normalized(sampled(g, [&](auto x) { return std::exp(-0.5 * (x[0] - centre) * (x[0] - centre) / s2); }));
}

WeakCurve static_curve(const DensityField& rho, double t0, double t1, std::size_t count) {
  std::vector<double> t;
  std::vector<DensityField> r;
  std::vector<VectorField> v;
  for (std::size_t k = 0; k < count; ++k) {
    t.push_back(t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(count - 1));
    r.push_back(rho);
    v.emplace_back(rho.grid());
  }
  return WeakCurve(t, r, v);
}

double max_inside(const ScalarField& f, double half_width) {
  double m = 0.0;
  std::vector<double> x(1);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.grid().point(i, x);
    if (std::abs(x[0]) <= half_width) m = std::max(m, std::abs(f[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("lagrangian construction and validation") {
  const auto L = kinetic_minus_potential(2, 2.0, parse("x1^2 + sin(x2)"));
  std::vector<double> x{0.5, 1.0}, v{1.0, -2.0}, out(2);
  CHECK(L->value(x, v) == doctest::Approx(0.5 * 2.0 * 5.0 - 0.25 - std::sin(1.0)));
  L->dx(x, v, out);
  CHECK(out[0] == doctest::Approx(-1.0));
  CHECK(out[1] == doctest::Approx(-std::cos(1.0)));
  L->dv(x, v, out);
  CHECK(out[1] == doctest::Approx(-4.0));
  validate_lagrangian(*L);

  CHECK_NOTHROW(expression_lagrangian(1, parse("0.5*v1^2 - x1^4"), {parse("-4*x1^3")}, {parse("v1")}));
  CHECK_THROWS_AS(expression_lagrangian(1, parse("0.5*v1^2 - x1^4"), {parse("-3*x1^3")}, {parse("v1")}),
                  InvalidArgument);
  CHECK_THROWS_AS(expression_lagrangian(1, parse("v1^2"), {parse("0")}, {parse("v1")}), InvalidArgument);
  CHECK_THROWS_AS(kinetic_minus_potential(1, 0.0, parse("0")), InvalidArgument);
}

TEST_CASE("density functional partials") {
  validate_functional(*bohm_functional(1.0, 1.0), 1);
  validate_functional(*bohm_functional(0.7, 1.3), 3);
  validate_functional(*madelung_functional(1.0, 2.0), 2);
  CHECK(no_functional()->vanishes());

  // Off-diagonal partials in the symmetric convention: d(y12)/dy12 along dy12 = dy21 is 1, so G12 = G21 = 1/2.
  CHECK_NOTHROW(expression_functional(2, parse("y*y1^2 + y12"), parse("y1^2"), {parse("2*y*y1"), parse("0")},
                                      {{parse("0"), parse("0.5")}, {parse("0.5"), parse("0")}}));
  CHECK_THROWS_AS(expression_functional(2, parse("y12"), parse("0"), {parse("0"), parse("0")},
                                        {{parse("0"), parse("1")}, {parse("1"), parse("0")}}),
                  InvalidArgument);
  CHECK_THROWS_AS(expression_functional(1, parse("y^2"), parse("y"), {parse("0")}, {{parse("0")}}),
                  InvalidArgument);

  const std::vector<double> yi{0.0}, yij{1.0};
  CHECK_THROWS_AS(bohm_functional(1, 1)->value(0.0, yi, yij), PreconditionError);
}

TEST_CASE("Bohm functional on a Gaussian is the quantum potential") {
  const Grid g = box(1, -10.0, 10.0, 401, false);
  const DensityField rho = gaussian(g, 1.0);
  const ScalarField F = functional_field(*bohm_functional(1.0, 1.0), rho, DerivativeMode::log);
  const ScalarField Q = sampled(g, [](auto x) { return 0.25 - x[0] * x[0] / 8.0; });
  CHECK(max_inside(F - Q, 6.0) < 1e-10);
  CHECK(F[200] == doctest::Approx(0.25).epsilon(1e-12));

  // 0-homogeneous in rho.
  const ScalarField F3 = functional_field(*bohm_functional(1.0, 1.0), 3.0 * rho.field(), DerivativeMode::log);
  CHECK(max_inside(F3 - F, 6.0) < 1e-10);

  // Inactive nodes contribute nothing.
  const DensityJet jet = density_jet(rho, DerivativeMode::log);
  CHECK(!jet.active.front());
  CHECK(F[0] == 0.0);
}

TEST_CASE("functional identity") {
  const Grid g = box(1, -10.0, 10.0, 401, false);
  const DensityField rho = gaussian(g, 1.0);
  const auto bohm = bohm_functional(1.0, 1.0);
  CHECK(max_inside(functional_identity_defect(*bohm, rho, DerivativeMode::log), 6.0) < 1e-10);

  // Direct derivatives only reach the identity at second order.
  double err[2];
  for (int r = 0; r < 2; ++r) {
    const Grid gr = box(1, -10.0, 10.0, 200 * (1 << r) + 1, false);
    const DensityField rr = gaussian(gr, 1.0);
    err[r] = max_inside(functional_identity_defect(*bohm, rr, DerivativeMode::direct), 3.0);
  }
  const double order = std::log2(err[0] / err[1]);
  CHECK(err[1] > 1e-9);
  CHECK(order == doctest::Approx(2.0).epsilon(0.15));

  const auto linear = expression_functional(1, parse("y"), parse("1"), {parse("0")}, {{parse("0")}});
  CHECK(max_inside(functional_identity_defect(*linear, rho) - rho.field(), 6.0) == 0.0);
  const auto constant = expression_functional(1, parse("2"), parse("0"), {parse("0")}, {{parse("0")}});
  CHECK(functional_identity_defect(*constant, rho).max_abs() == 0.0);
}

TEST_CASE("action of static curves") {
  const Grid g = box(1, -10.0, 10.0, 401, false);
  const DensityField rho = gaussian(g, 1.0);
  const WeakCurve c = static_curve(rho, 0.5, 2.0, 7);
  CHECK(action(c, *kinetic_minus_potential(1, 1.0, parse("0")), *no_functional()) == 0.0);
  CHECK(action(c, *kinetic_minus_potential(1, 1.0, parse("0.5*x1^2")), *no_functional()) ==
        doctest::Approx(-0.75).epsilon(1e-10));
  CHECK(action(c, *kinetic_minus_potential(1, 1.0, parse("0")), *bohm_functional(1.0, 1.0)) ==
        doctest::Approx(1.5 / 8.0).epsilon(1e-10));
}

TEST_CASE("weak Euler-Lagrange residual") {
  const Grid g = box(1, -6.0, 6.0, 241, false);
  SUBCASE("constant potential, static") {
    const WeakCurve c = static_curve(gaussian(g, 0.5), 0.0, 1.0, 5);
    const ElResidual r = weak_el(c, *kinetic_minus_potential(1, 1.0, parse("3")), *no_functional(), 2);
    CHECK(r.weighted_l1 == 0.0);
    CHECK(r.bracket_linf == 0.0);
  }
  SUBCASE("harmonic ground state balances with the Madelung sign") {
    const WeakCurve c = static_curve(gaussian(g, 0.5), 0.0, 1.0, 5);
    const auto L = kinetic_minus_potential(1, 1.0, parse("0.5*x1^2"));
    const ElResidual good = weak_el(c, *L, *madelung_functional(1.0, 1.0), 2);
    CHECK(good.weighted_l1 < 1e-10);
    // The other sign leaves rho (x - (-x)) behind.
    const ElResidual bad = weak_el(c, *L, *bohm_functional(1.0, 1.0), 2);
    const double expect = integrate(c.rho(2).field() * sampled(g, [](auto x) { return 2 * std::abs(x[0]); }));
    CHECK(bad.weighted_l1 == doctest::Approx(expect).epsilon(1e-8));
    CHECK_THROWS_AS(weak_el(c, *L, *no_functional(), 0), InvalidArgument);
    CHECK_THROWS_AS(weak_el(c, *L, *no_functional(), 4), InvalidArgument);
  }
  SUBCASE("free expansion converges") {
    double err[2];
    for (int r = 0; r < 2; ++r) {
      const Grid gr = box(1, -12.0, 12.0, 240 * (1 << r) + 1, false);
      const double dt = 0.05 / (1 << r);
      const WeakCurve c = curve_from_expressions(gr, parse("exp(-x1^2/(2*(1+t)^2))"), {parse("x1/(1+t)")},
                                                 -dt, dt, 3);
      err[r] = weak_el(c, *kinetic_minus_potential(1, 1.0, parse("0")), *no_functional(), 1).weighted_l1;
    }
    CHECK(err[0] < 5e-3);
    CHECK(std::log2(err[0] / err[1]) == doctest::Approx(2.0).epsilon(0.1));
  }
}

TEST_CASE("variations") {
  const Grid g = box(1, -7.0, 7.0, 256, true);
  const WeakCurve c = static_curve(gaussian(g, 1.0), 0.0, 1.0, 9);
  const std::vector<Expr> W{parse("sin(pi*t)*x1*exp(-x1^2/4)")};
  const Variation var = build_variation(c, W, 1e-4);
  for (std::size_t k = 0; k < c.size(); ++k) {
    CHECK(std::abs(integrate(var.plus.rho(k)) - 1.0) < 1e-10);
    CHECK(std::abs(integrate(var.minus.rho(k)) - 1.0) < 1e-10);
  }
  CHECK(max_diff(var.plus.rho(0), c.rho(0)) == 0.0);

  const auto L = kinetic_minus_potential(1, 1.0, parse("0.5*x1^2"));
  const GradientCheck check = variation_gradient_check(var, *L, *no_functional());
  CHECK(std::abs(check.fd) > 1e-3);
  CHECK(check.rel_err < 1e-4);

  const Variation none = build_variation(c, {parse("0*x1")}, 1e-4);
  const GradientCheck zero = variation_gradient_check(none, *L, *no_functional());
  CHECK(zero.fd == 0.0);
  CHECK(zero.formula == 0.0);

  CHECK_THROWS_AS(build_variation(c, {parse("x1*exp(-x1^2)")}, 1e-4), PreconditionError);
  const WeakCurve open = static_curve(gaussian(box(1, -8.0, 8.0, 256, false), 1.0), 0.0, 1.0, 9);
  CHECK_THROWS_AS(build_variation(open, W, 1e-4), PreconditionError);
  CHECK_THROWS_AS(build_variation(c, {W[0], W[0]}, 1e-4), InvalidArgument);
}

TEST_CASE("narrow packets reproduce the strong Euler-Lagrange residual") {
  // x(t) = sin t is not a trajectory of U = x^4/4; its strong residual is x'' + x^3.
  const auto L = kinetic_minus_potential(1, 1.0, parse("x1^4/4"));
  const double t = 0.8, strong = -std::sin(t) + std::pow(std::sin(t), 3);
  double err[2];
  for (int r = 0; r < 2; ++r) {
    const double s2 = 0.01 / (1 << (2 * r));
    const Grid g = box(1, -2.0, 3.0, 4001, false);
    const std::string centre = "(x1 - sin(t))";
    const WeakCurve c = curve_from_expressions(g, parse("exp(-" + centre + "^2/(2*" + std::to_string(s2) + "))"),
                                               {parse("cos(t) + 0*x1")}, t - 1e-3, t + 1e-3, 3);
    const double mean = integrate(weak_el_residual(c, *L, *no_functional(), 1)[0]);
    err[r] = std::abs(mean - strong);
  }
  // The gap is 3 x(t) s^2 for this quartic potential.
  CHECK(err[0] == doctest::Approx(3 * std::sin(t) * 0.01).epsilon(1e-3));
  CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(1e-3));
}
