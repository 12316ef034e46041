#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "support.hpp"
#include "weakform/forms.hpp"

using namespace wft;

namespace {

WeakMap linear_map(const std::vector<std::vector<double>>& A, double std, std::size_t n, std::size_t nq,
                   double qlo = 0.0, double qhi = 0.5) {
  const std::size_t dim = A.size(), m = A.front().size();
  WeakFunction wf = linear_pushforward(A, gaussian_density(dim, std), box(m, qlo, qhi, nq, false),
                                       box(dim, -8.0, 9.0, n, false));
  return WeakMap(std::move(wf), 1.0);
}

std::vector<Expr> exprs(std::initializer_list<const char*> src) {
  std::vector<Expr> out;
  for (const char* s : src) out.push_back(parse(s));
  return out;
}

}  // namespace

TEST_CASE("multi-indices and evaluation") {
  const auto idx = increasing_indices(3, 2);
  REQUIRE(idx.size() == 3);
  CHECK(idx[0] == MultiIndex{0, 1});
  CHECK(idx[1] == MultiIndex{0, 2});
  CHECK(idx[2] == MultiIndex{1, 2});
  CHECK(increasing_indices(5, 3).size() == 10);
  CHECK(increasing_indices(4, 0).size() == 1);
  CHECK_THROWS_AS(KForm(box(2, 0.0, 1.0, 8, false), 3), InvalidArgument);
  CHECK_THROWS_AS(KForm(box(2, 0.0, 1.0, 8, false), 1, {ScalarField(box(2, 0.0, 1.0, 8, false))}), InvalidArgument);

  const Grid g = box(4, -1.0, 1.0, 5, false);
  std::vector<ScalarField> c;
  for (std::size_t s = 0; s < 4; ++s)
    c.push_back(sampled(g, [s](auto x) { return std::sin(1.0 + s + x[0] * x[1]) + x[2] - 0.3 * x[3] * s; }));
  const KForm w3(g, 3, c);
  const std::vector<double> a{0.3, -1.2, 2.0, 0.7}, b{1.1, 0.4, -0.6, 0.25}, d{-0.9, 0.05, 0.8, 1.7};
  for (std::size_t i = 0; i < g.size(); i += 37) {
    const double v = w3.evaluate(i, {a, b, d});
    CHECK(w3.evaluate(i, {b, a, d}) == -v);
    CHECK(w3.evaluate(i, {a, d, b}) == -v);
    CHECK(w3.evaluate(i, {d, b, a}) == -v);
    CHECK(w3.evaluate(i, {b, d, a}) == v);
    CHECK(w3.evaluate(i, {a, a, d}) == 0.0);
  }
  // dx1^dx2(e1, e2) = 1 with the determinant convention.
  KForm area(box(2, 0.0, 1.0, 4, false), 2);
  area[0] = ScalarField(area.grid(), 1.0);
  CHECK(area.evaluate(0, {{1.0, 0.0}, {0.0, 1.0}}) == 1.0);
  CHECK(area.evaluate(0, {{0.0, 1.0}, {1.0, 0.0}}) == -1.0);
}

TEST_CASE("exterior derivative") {
  SUBCASE("x1 dx2") {
    const Grid g = box(2, -1.0, 2.0, 33, false);
    const KForm w = form_from_expressions(g, 1, exprs({"0", "x1"}));
    const KForm d = exterior_derivative(w);
    REQUIRE(d.degree() == 2);
    CHECK(max_diff(d[0], ScalarField(g, 1.0)) < 1e-12);
  }
  SUBCASE("constant coefficients give exactly zero") {
    const Grid g = box(3, -1.0, 2.0, 9, false);
    const KForm w = form_from_expressions(g, 1, exprs({"0.3", "-2", "1.25"}));
    CHECK(exterior_derivative(w).max_abs() == 0.0);
    const KForm t = form_from_expressions(torus(3, 8), 2, exprs({"1", "2", "3"}));
    CHECK(exterior_derivative(t).max_abs() == 0.0);
  }
  SUBCASE("d of d vanishes") {
    for (bool periodic : {false, true}) {
      const Grid g = periodic ? torus(3, 24) : box(3, -2.0, 2.0, 24, false);
      KForm f(g, 0);
      f[0] = sampled(g, [](auto x) { return std::sin(x[0]) * std::cos(2 * x[1]) + std::exp(0.2 * x[2] * x[0]); });
      const KForm df = exterior_derivative(f);
      CHECK(df.max_abs() > 0.5);
      CHECK(exterior_derivative(df).max_abs() < 1e-10);
      const KForm ddf2 = exterior_derivative(exterior_derivative(df));
      CHECK(ddf2.max_abs() < 1e-9);
    }
  }
  SUBCASE("top degree is refused") {
    CHECK_THROWS_AS(exterior_derivative(KForm(box(2, 0.0, 1.0, 4, false), 2)), InvalidArgument);
  }
  SUBCASE("second order for a generic form") {
    const auto err = [](std::size_t n) {
      const Grid g = box(2, -1.0, 1.0, n, false);
      const KForm w = form_from_expressions(g, 1, exprs({"sin(x2) * x1", "exp(x1) * cos(x2)"}));
      const auto exact = sampled(g, [](auto x) { return std::exp(x[0]) * std::cos(x[1]) - std::cos(x[1]) * x[0]; });
      return max_diff(exterior_derivative(w)[0], exact);
    };
    const double r = err(33) / err(65);
    CHECK(r > 3.5);
    CHECK(r < 4.5);
  }
}

TEST_CASE("weak pullback") {
  const WeakMap F = linear_map({{1.0, 0.2}, {0.1, 0.8}, {0.3, 0.4}}, 1.0, 40, 5);
  const Grid& t = F.function().target();
  SUBCASE("zero form pulls back to zero") {
    CHECK(weak_pullback(F, KForm(t, 1)).max_abs() == 0.0);
  }
  SUBCASE("linear coefficients and a centred gaussian give the strong pullback at the mean") {
    const KForm w = form_from_expressions(t, 1, exprs({"1 + x1 - 2*x3", "0.5*x1 + 3", "x2 - x3"}));
    const KForm p = weak_pullback(F, w);
    const Grid& P = F.function().params();
    const std::vector<std::vector<double>> A{{1.0, 0.2}, {0.1, 0.8}, {0.3, 0.4}};
    double worst = 0.0;
    for (std::size_t q = 0; q < P.size(); ++q) {
      std::vector<double> u(2), x(3);
      P.point(q, u);
      for (std::size_t r = 0; r < 3; ++r) x[r] = A[r][0] * u[0] + A[r][1] * u[1];
      const double c[3] = {1 + x[0] - 2 * x[2], 0.5 * x[0] + 3, x[1] - x[2]};
      for (std::size_t j = 0; j < 2; ++j) {
        const double strong = c[0] * A[0][j] + c[1] * A[1][j] + c[2] * A[2][j];
        worst = std::max(worst, std::abs(p[j][q] - strong));
      }
    }
    CHECK(worst < 1e-10);
  }
  SUBCASE("index tuple length must match the degree") {
    const std::vector<std::size_t> one{0}, two{0, 1};
    CHECK_THROWS_AS(weak_pullback(F, KForm(t, 1), two), InvalidArgument);
    CHECK_THROWS_AS(weak_pullback(F, KForm(t, 2), one), InvalidArgument);
    const std::vector<std::size_t> down{1, 0};
    CHECK_THROWS_AS(weak_pullback(F, KForm(t, 2), down), InvalidArgument);
    CHECK(weak_pullback(F, KForm(t, 2), two).max_abs() == 0.0);
  }
  SUBCASE("linear in the form") {
    const KForm a = form_from_expressions(t, 1, exprs({"x1*x2", "cos(x3)", "x1 - x3^2"}));
    const KForm b = form_from_expressions(t, 1, exprs({"exp(-x2^2)", "x3", "1"}));
    const KForm lhs = weak_pullback(F, 2.5 * a + (-0.75) * b);
    const KForm rhs = 2.5 * weak_pullback(F, a) + (-0.75) * weak_pullback(F, b);
    for (std::size_t s = 0; s < lhs.count(); ++s)
      CHECK(max_diff(lhs[s], rhs[s]) <= 1e-13 * std::max(1.0, rhs[s].max_abs()));
  }
  SUBCASE("single tuple agrees with the full form") {
    const KForm w = form_from_expressions(t, 2, exprs({"x1", "x2*x3", "1"}));
    const std::vector<std::size_t> two{0, 1};
    CHECK(max_diff(weak_pullback(F, w, two), weak_pullback(F, w)[0]) == 0.0);
  }
}

TEST_CASE("narrow densities approach the strong pullback") {
  // One parameter into R: F*(sin x dx)(q) = A sin(Aq) exp(-s^2/2) exactly.
  const auto run = [](double s) {
    const Grid target = box(1, -8.0, 8.0, 4097, false);
    const WeakFunction wf = linear_pushforward({{1.3}}, gaussian_density(1, s), box(1, -1.0, 1.0, 9, false), target);
    const WeakMap F(wf, std::numeric_limits<double>::infinity());
    const ScalarField p = weak_pullback(F, form_from_expressions(target, 1, exprs({"sin(x1)"})))
        .operator[](0);
    double closed = 0.0, strong = 0.0;
    for (std::size_t q = 0; q < p.size(); ++q) {
      const double u = F.function().params().coordinate(0, q);
      closed = std::max(closed, std::abs(p[q] - 1.3 * std::sin(1.3 * u) * std::exp(-0.5 * s * s)));
      strong = std::max(strong, std::abs(p[q] - 1.3 * std::sin(1.3 * u)));
    }
    CHECK(closed < 1e-10);
    return strong;
  };
  const double e1 = run(0.2), e2 = run(0.1), e3 = run(0.05);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.02));
  CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("pullback commutes with d") {
  SUBCASE("constant velocities and coefficients") {
    const WeakMap F = linear_map({{1.0, 0.2}, {0.1, 0.8}, {0.3, 0.4}}, 1.0, 32, 5);
    const KForm w = form_from_expressions(F.function().target(), 1, exprs({"0.5", "-1", "2"}));
    CHECK(pullback_commutation_defect(F, w) <= 1e-10);
  }
  SUBCASE("cubic form converges at second order") {
    std::vector<double> e;
    for (std::size_t k : {0, 1}) {
      const WeakMap F = linear_map({{1.0, 0.2}, {0.1, 0.8}, {0.3, 0.4}}, 1.0, 32u << k, (4u << k) + 1, -0.5, 0.5);
      const KForm w = form_from_expressions(F.function().target(), 1,
                                            exprs({"x1*x2*x3 + x2^3", "x1^2*x3 - x2", "0.5*x1^3 + x2*x3^2"}));
      e.push_back(pullback_commutation_defect(F, w));
    }
    CHECK(e[0] > 1e-4);
    CHECK(e[0] / e[1] > 3.3);
    CHECK(e[0] / e[1] < 4.7);
  }
  SUBCASE("pullback of a function") {
    const WeakMap F = linear_map({{1.0}, {0.5}}, 1.0, 48, 9, -0.5, 0.5);
    KForm f(F.function().target(), 0);
    f[0] = sampled(f.grid(), [](auto x) { return x[0] * x[0] + x[1]; });
    CHECK(pullback_commutation_defect(F, f) < 1e-10);
  }
}

TEST_CASE("weak Stokes") {
  const std::vector<std::vector<double>> A{{1.0, 0.2}, {0.1, 0.8}, {0.3, 0.4}};
  SUBCASE("orientation on the unit square") {
    // A narrow density on the identity map: F*(x1 dx2) has d = area.
    const WeakFunction wf = linear_pushforward({{1.0, 0.0}, {0.0, 1.0}}, gaussian_density(2, 0.3),
                                               box(2, 0.0, 1.0, 5, false), box(2, -3.0, 4.0, 64, false));
    const WeakMap F(wf, 1.0);
    const StokesResult r = weak_stokes_defect(F, form_from_expressions(wf.target(), 1, exprs({"0", "x1"})));
    CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.rhs == doctest::Approx(1.0).epsilon(1e-10));
    const StokesResult s = weak_stokes_defect(F, form_from_expressions(wf.target(), 1, exprs({"-x2", "0"})));
    CHECK(s.lhs == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(s.rhs == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("closed form") {
    const WeakMap F = linear_map(A, 1.0, 40, 5);
    const KForm w = form_from_expressions(F.function().target(), 1, exprs({"x2 + 1", "x1", "x3"}));
    const StokesResult r = weak_stokes_defect(F, w);
    CHECK(std::abs(r.lhs) < 1e-10);
    CHECK(std::abs(r.rhs) < 1e-10);
  }
  SUBCASE("quadratic form on a linear pushforward") {
    const WeakMap F = linear_map(A, 1.0, 40, 5);
    const KForm w = form_from_expressions(F.function().target(), 1,
                                          exprs({"x1*x2 + 0.5*x3^2", "x1*x3 - x2^2", "0.7*x1^2 + x2*x3 + x1"}));
    const StokesResult r = weak_stokes_defect(F, w);
    CHECK(std::abs(r.lhs) > 1e-3);
    CHECK(r.defect < 1e-10);
  }
  SUBCASE("parallel velocities") {
    const WeakMap F = linear_map({{1.0, 1.0}, {0.5, 0.5}, {0.2, 0.2}}, 1.0, 40, 5);
    const KForm w = form_from_expressions(F.function().target(), 1, exprs({"x1*x2", "x3^2", "x1"}));
    const StokesResult r = weak_stokes_defect(F, w);
    CHECK(r.lhs == 0.0);
    CHECK(r.defect < 1e-10);
  }
  SUBCASE("preconditions") {
    const WeakFunction wf = linear_pushforward(A, gaussian_density(3, 1.0), box(2, 0.0, 0.5, 5, true),
                                               box(3, -8.0, 9.0, 24, false));
    const WeakMap F(wf, 1.0);
    CHECK_THROWS_AS(weak_stokes_defect(F, KForm(wf.target(), 1)), PreconditionError);
    const WeakMap G = linear_map(A, 1.0, 24, 5);
    CHECK_THROWS_AS(weak_stokes_defect(G, KForm(G.function().target(), 2)), InvalidArgument);
    CHECK_THROWS_AS(WeakMap(linear_map(A, 1.0, 24, 5).function(), 1e-20), PreconditionError);
  }
}

TEST_CASE("surface Stokes in R^3") {
  AffineFlowSpec spec;
  spec.A = {{1.0, 0.2}, {0.1, 0.8}, {0.3, 0.4}};
  spec.generators = {{{0.0, -0.6, 0.0}, {0.6, 0.0, 0.0}, {0.0, 0.0, 0.0}},
                     {{0.3, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}};
  spec.sigma = gaussian_density(3, 0.5);
  const WeakFunction wf(box(2, 0.0, 0.5, 5, false), box(3, -5.0, 6.0, 32, false), affine_flow(spec));
  const Grid& t = wf.target();
  const KForm w = form_from_expressions(t, 1, exprs({"x1*x2 + 0.5*x3^2", "x1*x3 - x2^2", "0.7*x1^2 + x2*x3 + x1"}));
  const VectorField field({w[0], w[1], w[2]});

  const StokesResult general = weak_stokes_defect(WeakMap(wf, 1.0), w);
  const SurfaceStokesResult surface = r3_surface_stokes(wf, field, 1.0);
  CHECK(!surface.flagged);
  CHECK(std::abs(general.lhs - surface.lhs) <= 1e-12);
  CHECK(std::abs(general.rhs - surface.rhs) <= 1e-12);
  CHECK(std::abs(general.defect - surface.defect) <= 1e-12);

  SUBCASE("gradient field has no flux") {
    const VectorField grad({sampled(t, [](auto x) { return x[1] + 2 * x[0]; }),
                            sampled(t, [](auto x) { return x[0] + x[2] * x[2]; }),
                            sampled(t, [](auto x) { return 2 * x[1] * x[2]; })});
    const SurfaceStokesResult r = r3_surface_stokes(wf, grad, 1.0);
    CHECK(std::abs(r.lhs) < 1e-12);
  }
  SUBCASE("parallel tangents") {
    const WeakFunction flat = linear_pushforward({{1.0, 1.0}, {0.5, 0.5}, {0.2, 0.2}}, gaussian_density(3, 1.0),
                                                 box(2, 0.0, 0.5, 5, false), box(3, -8.0, 9.0, 32, false));
    const VectorField rot({sampled(flat.target(), [](auto x) { return -x[1]; }),
                           sampled(flat.target(), [](auto x) { return x[0]; }), ScalarField(flat.target())});
    const SurfaceStokesResult r = r3_surface_stokes(flat, rot, 1.0);
    CHECK(r.lhs == 0.0);
    CHECK(std::abs(r.rhs) < 1e-10);
  }
  SUBCASE("linear pushforward with a rotation field") {
    const WeakFunction lin = linear_pushforward(spec.A, gaussian_density(3, 1.0), box(2, 0.0, 0.5, 5, false),
                                                box(3, -8.0, 9.0, 32, false));
    const VectorField rot({sampled(lin.target(), [](auto x) { return -x[1]; }),
                           sampled(lin.target(), [](auto x) { return x[0]; }), ScalarField(lin.target())});
    const SurfaceStokesResult r = r3_surface_stokes(lin, rot, 1.0);
    // curl = (0, 0, 2), U x V has third component 1*0.8 - 0.1*0.2; area 0.25.
    CHECK(r.lhs == doctest::Approx(2 * 0.78 * 0.25).epsilon(1e-12));
    CHECK(r.defect < 1e-12);
  }
  SUBCASE("inconsistent velocity is flagged") {
    const Grid fine = box(3, -8.0, 9.0, 64, false), params = box(2, 0.0, 0.5, 5, false);
    const WeakFunction good = linear_pushforward(spec.A, gaussian_density(3, 1.0), params, fine);
    const WeakFunction bad(params, fine, scaled_velocity(good.family_ptr(), 1, 1.1));
    const VectorField rot({sampled(fine, [](auto x) { return -x[1]; }), sampled(fine, [](auto x) { return x[0]; }),
                           ScalarField(fine)});
    const double tol = 2 * max_continuity_residual(good);
    CHECK(r3_surface_stokes(bad, rot, tol).flagged);
    CHECK(!r3_surface_stokes(good, rot, tol).flagged);
  }
}

TEST_CASE("form directories round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "weakform_unit" / "form";
  fs::remove_all(dir);
  const Grid g = box(3, -1.0, 1.0, 6, false);
  const KForm w = form_from_expressions(g, 2, exprs({"x1", "x2*x3", "sin(x1)"}));
  save_kform(w, dir);
  const KForm back = load_kform(dir);
  CHECK(back.degree() == 2);
  for (std::size_t s = 0; s < 3; ++s) CHECK(max_diff(back[s], w[s]) == 0.0);
}
