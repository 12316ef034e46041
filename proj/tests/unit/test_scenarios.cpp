#include <doctest.h>

#include <set>

#include "weakform/config.hpp"
#include "weakform/scenario.hpp"

using namespace weakform;
using nlohmann::json;

namespace {

json continuity_config() {
  return json::parse(R"j({
    "name": "c", "kind": "check-continuity", "levels": 2,
    "source": {"pushforward": {
      "A": [[1.0]], "sigma": {"gaussian": 0.7},
      "params": {"lo": [0.0], "hi": [1.0], "points": [9]},
      "target": {"lo": [-8.0], "hi": [8.0], "points": [64], "periodic": [true]}}},
    "order": [1.8, 2.2]})j");
}

std::string pointer_of(const std::string& command, const json& config) {
  try {
    run_scenario(command, config);
  } catch (const ConfigError& e) {
    return e.pointer();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("config reader") {
  const json j = json::parse(R"j({"a": 1, "b": {"c/d": [1, 2]}, "e": "sin(", "g": "foo(x1)"})j");
  const ConfigNode root(j, "");
  CHECK(root.at("a").count() == 1);
  CHECK_THROWS_AS(root.finish(), ConfigError);
  try {
    root.at("b").at("c/d")[5];
    FAIL("no error");
  } catch (const ConfigError& e) {
    CHECK(e.pointer() == "/b/c~1d");
  }
  try {
    root.at("e").expr();
  } catch (const ConfigError& e) {
    CHECK(e.pointer() == "/e");
  }
  CHECK_THROWS_AS(root.at("g").expr(), ConfigError);
  CHECK_THROWS_AS(root.at("a").string(), ConfigError);
  CHECK_THROWS_AS(root.at("missing"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("{"), ConfigError);
}

TEST_CASE("scenario config errors carry pointers") {
  json c = continuity_config();
  c["source"]["pushforward"]["extra"] = 1;
  CHECK(pointer_of("check-continuity", c) == "/source/pushforward/extra");

  c = continuity_config();
  c["bogus"] = true;
  CHECK(pointer_of("check-continuity", c) == "/bogus");

  c = continuity_config();
  CHECK(pointer_of("stokes", c) == "/kind");

  c = continuity_config();
  c["source"]["pushforward"]["A"] = json::parse("[[1.0, 2.0]]");
  CHECK(pointer_of("check-continuity", c) == "/source/pushforward/A");

  c = continuity_config();
  c["source"]["pushforward"]["target"]["points"] = json::parse("[2]");
  CHECK(pointer_of("check-continuity", c).rfind("/source/pushforward/target", 0) == 0);

  c = continuity_config();
  c["source"]["curve"] = json::object();
  CHECK(pointer_of("check-continuity", c) == "/source");
}

TEST_CASE("refinement levels and orders") {
  const VerificationReport two = run_scenario("check-continuity", continuity_config());
  CHECK(two.passed());
  const Check* order = two.find("continuity_order");
  REQUIRE(order);
  CHECK(order->refinement_orders.size() == 1);

  const VerificationReport three = run_scenario("check-continuity", continuity_config(), RunOptions{3, false});
  CHECK(three.find("continuity_residual")->values.size() == 3);
  CHECK(three.find("continuity_order")->refinement_orders.size() == 2);
  CHECK(three.metadata["levels"][2]["target"]["points"][0] == 256);
}

TEST_CASE("reports are deterministic") {
  const std::string a = to_json_text(run_scenario("check-continuity", continuity_config()));
  const std::string b = to_json_text(run_scenario("check-continuity", continuity_config()));
  CHECK(a == b);
}

TEST_CASE("shipped scenarios") {
  std::set<std::string> names;
  for (const EmbeddedScenario& s : embedded_scenarios()) {
    const json j = parse_config_text(s.text);
    const std::string name = j.at("name").get<std::string>();
    CHECK(names.insert(name).second);
    CHECK(std::find(scenario_commands().begin(), scenario_commands().end(), j.at("kind").get<std::string>()) !=
          scenario_commands().end());
  }
  for (const Criterion& c : acceptance_criteria()) {
    CHECK(!c.scenarios.empty());
    for (const std::string& s : c.scenarios) CHECK_MESSAGE(names.count(s) == 1, s);
  }
  CHECK(acceptance_criteria().size() == 9);
}

TEST_CASE("curve source and divergence cases") {
  const json curve = json::parse(R"j({
    "name": "drift", "kind": "check-continuity", "levels": 2,
    "source": {"curve": {
      "grid": {"lo": [-8.0], "hi": [8.0], "points": [128], "periodic": [true]},
      "rho": "exp(-(x1 - 0.5*t)^2)", "velocity": ["0.5"], "t0": 0.0, "t1": 1.0, "count": 9}},
    "order": [1.8, 2.2]})j");
  const VerificationReport r = run_scenario("check-continuity", curve);
  CHECK(r.passed());

  const json wrong = json::parse(R"j({
    "name": "wrong", "kind": "mixed-partials",
    "divergence": [{"grid": {"lo": [-1, -1], "hi": [1, 1], "points": [9, 9]}, "f": "1", "V": ["x2"], "W": ["0", "x1"]}]})j");
  CHECK(pointer_of("mixed-partials", wrong) == "/divergence/0/V");
}

TEST_CASE("negative control in the mixed-partials runner") {
  const json j = json::parse(R"j({
    "name": "flow", "kind": "mixed-partials",
    "flow": {
      "map": {"A": [[1.0, 0.0], [0.0, 1.0]],
              "generators": [[[0.0, -0.5], [0.5, 0.0]], [[0.2, 0.0], [0.0, -0.1]]],
              "sigma": {"gaussian": 0.6},
              "params": {"lo": [-0.2, -0.2], "hi": [0.2, 0.2], "points": [4, 4]},
              "target": {"lo": [-5, -5], "hi": [5, 5], "points": [48, 48], "periodic": [true, true]}},
      "control": {"axis": 1, "factor": 1.1, "threshold": 1e-3}}})j");
  const VerificationReport r = run_scenario("mixed-partials", j);
  CHECK(r.find("antisymmetry")->value == 0.0);
  CHECK(r.find("control_defect")->pass());
  CHECK(r.find("control_defect")->value > 1e-3);
}
