#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "weakform/report.hpp"

namespace weakform {

struct RunOptions {
  std::size_t refine = 0;  // resolution levels; 0 keeps the config's own
  bool r3 = false;         // stokes: also run the R^3 surface path
};

// Subcommands that run a single scenario config.
const std::vector<std::string>& scenario_commands();

// Runs one scenario. The config's "kind" must equal `command`. Config problems
// raise ConfigError with a JSON pointer; failed checks are reported, not thrown.
VerificationReport run_scenario(const std::string& command, const nlohmann::json& config,
                                const RunOptions& options = {});

struct EmbeddedScenario {
  std::string file;  // e.g. "continuity_linear_1d.json"
  std::string text;
};
// The shipped scenario matrix, compiled into the library.
const std::vector<EmbeddedScenario>& embedded_scenarios();

struct Criterion {
  int number;
  std::string title;
  double budget_seconds;
  std::vector<std::string> scenarios;  // scenario names
};
const std::vector<Criterion>& acceptance_criteria();

struct ScenarioRun {
  std::string name;
  VerificationReport report;
  double seconds = 0.0;
  std::string error;  // set when the scenario threw
};

struct SuiteResult {
  std::vector<ScenarioRun> runs;  // in embedded order
  nlohmann::json summary;         // deterministic: no timings
  bool passed = false;
};

// Runs every embedded scenario on up to `workers` threads. With a non-empty
// `out`, writes <name>.json per scenario and summary.json there.
SuiteResult run_suite(std::size_t workers, const std::filesystem::path& out = {});

// WEAKFORM_THREADS if set and positive, else the hardware concurrency.
std::size_t default_workers();

}  // namespace weakform
