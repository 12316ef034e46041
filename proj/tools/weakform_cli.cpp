// weakform: run verification scenarios from JSON configs.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "weakform/weakform.h"

namespace {

enum Exit { ok = 0, other = 1, check_failed = 2, config_error = 3 };

int status_exit(wf_status s) {
  if (s == WF_CONFIG || s == WF_SYNTAX || s == WF_UNKNOWN_FUNCTION || s == WF_UNBOUND_VARIABLE) return config_error;
  return other;
}

int report_error(wf_status s) {
  std::cerr << "weakform: " << wf_last_error() << '\n';
  return status_exit(s);
}

struct Owned {
  char* p = nullptr;
  ~Owned() { wf_string_free(p); }
};

struct Options {
  std::string config;
  std::size_t refine = 0;
  bool r3 = false;
  std::string format = "json";
  std::string out;
};

int run_one(const std::string& command, const Options& o) {
  std::ifstream in(o.config, std::ios::binary);
  if (!in) {
    std::cerr << "weakform: cannot read " << o.config << '\n';
    return other;
  }
  std::stringstream text;
  text << in.rdbuf();

  wf_report* raw = nullptr;
  if (wf_status s = wf_run_scenario(command.c_str(), text.str().c_str(), o.refine, o.r3, &raw); s != WF_OK) {
    const std::string pointer = wf_last_error_pointer();
    if (s == WF_CONFIG && !pointer.empty()) std::cerr << "weakform: config error at " << pointer << '\n';
    return report_error(s);
  }
  std::unique_ptr<wf_report, decltype(&wf_report_free)> report(raw, wf_report_free);
  const wf_format format = o.format == "csv" ? WF_FORMAT_CSV : WF_FORMAT_JSON;
  if (!o.out.empty()) {
    if (wf_status s = wf_report_write(report.get(), o.out.c_str(), format); s != WF_OK) return report_error(s);
  } else {
    Owned text_out;
    if (wf_status s = wf_report_render(report.get(), format, &text_out.p); s != WF_OK) return report_error(s);
    std::cout << text_out.p << '\n';
  }
  for (std::size_t i = 0; i < wf_report_check_count(report.get()); ++i) {
    const char* name = nullptr;
    double value = 0.0;
    int passed = 0;
    wf_report_check(report.get(), i, &name, &value, &passed);
    if (!passed) std::cerr << "FAIL " << name << " = " << value << '\n';
  }
  return wf_report_passed(report.get()) ? ok : check_failed;
}

int run_suite(const std::string& out) {
  wf_suite* raw = nullptr;
  if (wf_status s = wf_suite_run(wf_default_workers(), out.empty() ? nullptr : out.c_str(), &raw); s != WF_OK)
    return report_error(s);
  std::unique_ptr<wf_suite, decltype(&wf_suite_free)> suite(raw, wf_suite_free);
  for (std::size_t i = 0; i < wf_suite_count(suite.get()); ++i) {
    const char* name = nullptr;
    const char* error = nullptr;
    double seconds = 0.0;
    int passed = 0;
    wf_suite_entry(suite.get(), i, &name, &seconds, &passed, &error);
    char line[256];
    std::snprintf(line, sizeof line, "%s %-28s %8.2f s", passed ? "PASS" : "FAIL", name, seconds);
    std::cerr << line << (*error ? std::string("  ") + error : std::string()) << '\n';
  }
  Owned summary;
  if (wf_status s = wf_suite_summary(suite.get(), &summary.p); s != WF_OK) return report_error(s);
  std::cout << summary.p << '\n';
  return wf_suite_passed(suite.get()) ? ok : check_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-formulation identity checks driven by JSON scenarios"};
  app.set_version_flag("--version", std::string(wf_version()));
  app.require_subcommand(1);

  Options o;
  const char* commands[][2] = {
      {"check-continuity", "continuity residual of a weak curve or pushforward across resolutions"},
      {"mixed-partials", "mixed-partial defect of a weak function and the divergence identity"},
      {"pullback", "commutation of weak pullback with the exterior derivative"},
      {"stokes", "weak Stokes theorem: lhs, rhs and defect"},
      {"euler-lagrange", "weak Euler-Lagrange residual, functional identity and variation gradient check"},
      {"schrodinger", "split-step run with Madelung checks"},
  };
  for (auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "scenario JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--refine", o.refine, "resolution levels (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--out", o.out, "write the report here instead of stdout");
    if (std::string(name) == "stokes") sub->add_flag("--r3", o.r3, "also run the R^3 surface path");
  }
  bool all = false;
  std::string suite_out;
  CLI::App* suite = app.add_subcommand("suite", "run the shipped scenario matrix");
  suite->add_flag("--all", all, "every shipped scenario")->required();
  suite->add_option("--out", suite_out, "directory for per-scenario reports and summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  if (suite->parsed()) return run_suite(suite_out);
  for (CLI::App* sub : app.get_subcommands())
    if (sub->parsed()) return run_one(sub->get_name(), o);
  return other;
}
