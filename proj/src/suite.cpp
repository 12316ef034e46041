#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>

#include <omp.h>

#include "weakform/canonical_json.hpp"
#include "weakform/config.hpp"
#include "weakform/scenario.hpp"

namespace weakform {

using nlohmann::json;

const std::vector<Criterion>& acceptance_criteria() {
  static const std::vector<Criterion> table{
      {1, "continuity residual converges at order 2 (1D and 2D)", 10.0,
       {"continuity-linear-1d", "continuity-linear-2d"}},
      {2, "mixed partials of a flow map: order 2, exact antisymmetry, control fails", 30.0,
       {"mixed-partials-flow"}},
      {3, "divergence identity: order 2, exact zero for V = W", 10.0, {"divergence-identity"}},
      {4, "pullback commutes with d at 64^3", 120.0, {"pullback-polynomial"}},
      {5, "weak Stokes and the R^3 surface path", 120.0, {"stokes-linear-r3", "stokes-affine-order"}},
      {6, "divergence identity of the Bohm functional", 10.0, {"identity-bohm-1d", "identity-bohm-2d"}},
      {7, "variation gradient check", 60.0, {"el-static-gaussian", "el-schrodinger-critical"}},
      {8, "Schroedinger solver and Madelung checks", 180.0,
       {"schrodinger-free-packet", "schrodinger-coherent", "schrodinger-ground-state", "schrodinger-mixture"}},
      {9, "quantum and variational assembly paths agree", 0.0,
       {"schrodinger-ground-state", "schrodinger-free-equivalence", "schrodinger-coherent-2d"}},
  };
  return table;
}

std::size_t default_workers() {
  if (const char* env = std::getenv("WEAKFORM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

ScenarioRun run_embedded(const EmbeddedScenario& s) {
  ScenarioRun run;
  run.name = s.file;
  const auto start = std::chrono::steady_clock::now();
  try {
    const json config = parse_config_text(s.text);
    if (config.is_object() && config.contains("name") && config["name"].is_string())
      run.name = config["name"].get<std::string>();
    const std::string command =
        config.is_object() && config.contains("kind") && config["kind"].is_string() ? config["kind"].get<std::string>()
                                                                                    : std::string{};
    run.report = run_scenario(command, config);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

}  // namespace

SuiteResult run_suite(std::size_t workers, const std::filesystem::path& out) {
  const auto& scenarios = embedded_scenarios();
  SuiteResult result;
  result.runs.resize(scenarios.size());
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(scenarios.size(), 1));
  const int inner = std::max(1, static_cast<int>(std::thread::hardware_concurrency() / workers));

  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    omp_set_num_threads(inner);
    for (std::size_t i; (i = next.fetch_add(1)) < scenarios.size();) result.runs[i] = run_embedded(scenarios[i]);
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::map<std::string, bool> ok;
  json list = json::array();
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const ScenarioRun& run = result.runs[i];
    const bool passed = run.error.empty() && run.report.passed();
    ok[run.name] = passed;
    json entry{{"name", run.name}, {"file", scenarios[i].file}, {"passed", passed}};
    if (!run.error.empty()) {
      entry["error"] = run.error;
    } else {
      entry["command"] = run.report.command;
      json failed = json::array();
      for (const Check& c : run.report.checks)
        if (!c.pass()) failed.push_back(c.name);
      entry["failed_checks"] = failed;
    }
    list.push_back(entry);
  }

  bool all = !scenarios.empty();
  for (const auto& [name, passed] : ok) all = all && passed;
  json criteria = json::array();
  for (const Criterion& c : acceptance_criteria()) {
    bool passed = true;
    for (const std::string& s : c.scenarios) passed = passed && ok.count(s) && ok[s];
    criteria.push_back({{"criterion", c.number}, {"title", c.title}, {"scenarios", c.scenarios}, {"passed", passed}});
    all = all && passed;
  }
  criteria.push_back({{"criterion", 10},
                      {"title", "every shipped scenario passes"},
                      {"scenarios", json::array()},
                      {"passed", all}});

  result.passed = all;
  result.summary = {{"schema", kReportSchema}, {"version", kVersion}, {"passed", all},
                    {"scenarios", list},       {"criteria", criteria}};

  if (!out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
    for (const ScenarioRun& run : result.runs)
      if (run.error.empty()) write_report(run.report, out / (run.name + ".json"), ReportFormat::json);
    std::ofstream f(out / "summary.json", std::ios::binary);
    f << canonical_dump(result.summary) << '\n';
    if (!f) throw IoError("cannot write " + (out / "summary.json").string());
  }
  return result;
}

}  // namespace weakform
