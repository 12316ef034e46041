#include <doctest.h>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "support.hpp"
#include "weakform/canonical_json.hpp"
#include "weakform/field_io.hpp"
#include "weakform/report.hpp"

using namespace wft;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "weakform_unit";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
}

}  // namespace

TEST_CASE("field round trip is bit exact") {
  const Grid g(std::vector<Axis>{{-1.25, 3.0, 7, false}, {0.0, 0.1, 5, true}});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<double> vals(g.size());
  for (double& v : vals) v = u(rng) / 3.0;
  vals[0] = -0.0;
  vals[1] = 5e-324;
  const ScalarField f(g, vals);

  const fs::path p = scratch("scalar.wf");
  write_field(p, f);
  const ScalarField back = read_field(p).scalar();
  CHECK(back.grid() == g);
  for (std::size_t i = 0; i < g.size(); ++i)
    REQUIRE(std::bit_cast<std::uint64_t>(back[i]) == std::bit_cast<std::uint64_t>(f[i]));

  const VectorField v({f, 2.0 * f});
  write_field(p, v);
  const VectorField vb = read_field(p).vector();
  CHECK(vb.components() == 2);
  CHECK(max_diff(vb[1], 2.0 * f) == 0.0);

  const std::string bytes = slurp(p);
  const std::string header = bytes.substr(0, bytes.find('\n'));
  CHECK(header ==
        R"({"components":2,"dtype":"f64le","hi":[3,0.1],"kind":"vector","lo":[-1.25,0],"order":"row-major",)"
        R"("periodic":[false,true],"shape":[7,5],"version":1})");
}

TEST_CASE("field decoding errors") {
  const ScalarField f(box(1, 0.0, 1.0, 4, false), 1.0);
  const fs::path p = scratch("bad.wf");
  write_field(p, f);
  const std::string good = slurp(p);

  spit(p, good.substr(0, good.size() - 3));
  CHECK_THROWS_WITH_AS(read_field(p), doctest::Contains("length mismatch"), IoError);

  std::string f32 = good;
  f32.replace(f32.find("f64le"), 5, "f32le");
  spit(p, f32);
  CHECK_THROWS_WITH_AS(read_field(p), doctest::Contains("dtype"), IoError);

  std::string v2 = good;
  v2.replace(v2.find("\"version\":1"), 11, "\"version\":2");
  spit(p, v2);
  CHECK_THROWS_WITH_AS(read_field(p), doctest::Contains("version"), IoError);

  spit(p, "not json\n");
  CHECK_THROWS_AS(read_field(p), IoError);
  CHECK_THROWS_AS(read_field(scratch("missing.wf")), IoError);
}

TEST_CASE("canonical json") {
  nlohmann::json j{{"b", 0.1}, {"a", {1, 2.5, nullptr}}, {"c", 1e-300}, {"d", 3.0}};
  CHECK(canonical_dump(j) == R"({"a":[1,2.5,null],"b":0.1,"c":1e-300,"d":3})");
  j["e"] = std::nan("");
  CHECK(canonical_dump(j).find("\"e\":null") != std::string::npos);
}

TEST_CASE("report serialization") {
  SUBCASE("empty check list") {
    VerificationReport r;
    r.scenario = "empty";
    r.command = "stokes";
    CHECK(r.passed());
    const auto back = report_from_json(nlohmann::json::parse(to_json_text(r)));
    CHECK(back.checks.empty());
    CHECK(to_csv(r) == "name,value,tolerance,pass\n");
  }
  SUBCASE("refinement study round trip") {
    VerificationReport r;
    r.scenario = "refine";
    r.command = "check-continuity";
    r.add(order_check("residual_order", {1e-2, 2.5e-3, 6.25e-4}, 1.8, 2.2));
    Check plain{"residual", 6.25e-4, 1e-3};
    r.add(plain);
    Check control{"control", 0.5};
    control.lower = 0.1;
    r.add(control);
    const auto j = nlohmann::json::parse(to_json_text(r));
    CHECK(j["checks"][0]["refinement_orders"].size() == 2);
    CHECK(j["checks"][0]["refinement_orders"][0].get<double>() == doctest::Approx(2.0));
    const auto back = report_from_json(j);
    CHECK(back.checks.size() == 3);
    CHECK(back.checks[0].refinement_orders == r.checks[0].refinement_orders);
    CHECK(to_json_text(back) == to_json_text(r));
  }
  SUBCASE("stored pass flags are recomputed on load") {
    VerificationReport r;
    r.add(Check{"x", 2.0, 1.0});
    auto j = to_json(r);
    CHECK_FALSE(j["passed"].get<bool>());
    j["checks"][0]["pass"] = true;
    CHECK_THROWS_AS(report_from_json(j), IoError);
  }
  SUBCASE("non-finite values fail and serialize as null") {
    VerificationReport r;
    r.add(Check{"nan", std::nan(""), 1.0});
    CHECK_FALSE(r.passed());
    const auto j = to_json(r);
    CHECK(j["checks"][0]["value"].is_null());
    CHECK_FALSE(report_from_json(j).checks[0].pass());
  }
}

TEST_CASE("order check semantics") {
  const Check good = order_check("o", {1.0, 0.25, 0.0625}, 1.8, 2.2);
  CHECK(good.pass());
  const Check bad = order_check("o", {1.0, 0.25, 0.125}, 1.8, 2.2);
  CHECK_FALSE(bad.pass());
  CHECK(bad.value == doctest::Approx(1.0));
  CHECK_FALSE(order_check("o", {1.0}, 1.8, 2.2).pass());
}

TEST_CASE("config hash is stable and sensitive") {
  const auto a = nlohmann::json::parse(R"({"x":1,"y":[1,2]})");
  const auto b = nlohmann::json::parse(R"({ "y":[1,2], "x":1 })");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(nlohmann::json::parse(R"({"x":2,"y":[1,2]})")));
}
