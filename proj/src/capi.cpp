#include "weakform/weakform.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "weakform/config.hpp"
#include "weakform/expr.hpp"
#include "weakform/field_io.hpp"
#include "weakform/json_util.hpp"
#include "weakform/report.hpp"
#include "weakform/scenario.hpp"

using namespace weakform;

struct wf_report {
  VerificationReport report;
};

struct wf_suite {
  SuiteResult result;
};

struct wf_expr {
  Expr expr;
};

struct wf_field {
  std::string kind;
  std::vector<ScalarField> components;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_pointer;

wf_status fail(wf_status s, std::string message, std::string pointer = {}) {
  last_error = std::move(message);
  last_pointer = std::move(pointer);
  return s;
}

// Runs f, translating exceptions into status codes.
template <class F>
wf_status guard(F&& f) {
  last_error.clear();
  last_pointer.clear();
  try {
    f();
    return WF_OK;
  } catch (const ConfigError& e) {
    return fail(WF_CONFIG, e.what(), e.pointer());
  } catch (const Error& e) {
    return fail(static_cast<wf_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(WF_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(WF_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

#define WF_REQUIRE(cond, what) \
  if (!(cond)) return fail(WF_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* wf_version(void) { return kVersion; }
const char* wf_last_error(void) { return last_error.c_str(); }
const char* wf_last_error_pointer(void) { return last_pointer.c_str(); }
void wf_string_free(char* s) { std::free(s); }

wf_status wf_run_scenario(const char* command, const char* config_json, size_t refine, int r3, wf_report** out) {
  WF_REQUIRE(command && config_json && out, "null argument");
  return guard([&] {
    const auto config = parse_config_text(config_json);
    auto r = std::make_unique<wf_report>();
    r->report = run_scenario(command, config, RunOptions{refine, r3 != 0});
    *out = r.release();
  });
}

int wf_report_passed(const wf_report* r) { return r && r->report.passed() ? 1 : 0; }
size_t wf_report_check_count(const wf_report* r) { return r ? r->report.checks.size() : 0; }

wf_status wf_report_check(const wf_report* r, size_t i, const char** name, double* value, int* passed) {
  WF_REQUIRE(r, "null report");
  WF_REQUIRE(i < r->report.checks.size(), "check index out of range");
  const Check& c = r->report.checks[i];
  if (name) *name = c.name.c_str();
  if (value) *value = c.value;
  if (passed) *passed = c.pass() ? 1 : 0;
  return WF_OK;
}

wf_status wf_report_render(const wf_report* r, wf_format format, char** out) {
  WF_REQUIRE(r && out, "null argument");
  return guard([&] { *out = dup(format == WF_FORMAT_CSV ? to_csv(r->report) : to_json_text(r->report)); });
}

wf_status wf_report_write(const wf_report* r, const char* path, wf_format format) {
  WF_REQUIRE(r && path, "null argument");
  return guard([&] {
    write_report(r->report, path, format == WF_FORMAT_CSV ? ReportFormat::csv : ReportFormat::json);
  });
}

void wf_report_free(wf_report* r) { delete r; }

size_t wf_default_workers(void) { return default_workers(); }

wf_status wf_suite_run(size_t workers, const char* out_dir, wf_suite** out) {
  WF_REQUIRE(out, "null argument");
  return guard([&] {
    auto s = std::make_unique<wf_suite>();
    s->result = run_suite(workers, out_dir ? std::filesystem::path(out_dir) : std::filesystem::path{});
    *out = s.release();
  });
}

int wf_suite_passed(const wf_suite* s) { return s && s->result.passed ? 1 : 0; }
size_t wf_suite_count(const wf_suite* s) { return s ? s->result.runs.size() : 0; }

wf_status wf_suite_entry(const wf_suite* s, size_t i, const char** name, double* seconds, int* passed,
                         const char** error) {
  WF_REQUIRE(s, "null suite");
  WF_REQUIRE(i < s->result.runs.size(), "scenario index out of range");
  const ScenarioRun& run = s->result.runs[i];
  if (name) *name = run.name.c_str();
  if (seconds) *seconds = run.seconds;
  if (passed) *passed = run.error.empty() && run.report.passed() ? 1 : 0;
  if (error) *error = run.error.c_str();
  return WF_OK;
}

wf_status wf_suite_summary(const wf_suite* s, char** out) {
  WF_REQUIRE(s && out, "null argument");
  return guard([&] { *out = dup(s->result.summary.dump(2)); });
}

void wf_suite_free(wf_suite* s) { delete s; }

wf_status wf_expr_parse(const char* source, wf_expr** out) {
  WF_REQUIRE(source && out, "null argument");
  return guard([&] { *out = new wf_expr{parse(source)}; });
}

wf_status wf_expr_eval(const wf_expr* e, const char* const* names, const double* values, size_t count, double* out) {
  WF_REQUIRE(e && out && (count == 0 || (names && values)), "null argument");
  return guard([&] {
    std::vector<std::string> vars(names, names + count);
    const Program p(e->expr, vars);
    *out = p(std::span<const double>(values, count));
  });
}

wf_status wf_expr_string(const wf_expr* e, char** out) {
  WF_REQUIRE(e && out, "null argument");
  return guard([&] { *out = dup(e->expr.str()); });
}

wf_status wf_expr_derivative(const wf_expr* e, const char* variable, wf_expr** out) {
  WF_REQUIRE(e && variable && out, "null argument");
  return guard([&] { *out = new wf_expr{derivative(e->expr, variable)}; });
}

void wf_expr_free(wf_expr* e) { delete e; }

wf_status wf_field_from_expr(const wf_expr* e, const char* grid_json, wf_field** out) {
  WF_REQUIRE(e && grid_json && out, "null argument");
  return guard([&] {
    const Grid g = grid_from_json(parse_config_text(grid_json));
    *out = new wf_field{"scalar", {eval_on_grid(e->expr, g)}};
  });
}

wf_status wf_field_read(const char* path, wf_field** out) {
  WF_REQUIRE(path && out, "null argument");
  return guard([&] {
    StoredField s = read_field(path);
    *out = new wf_field{std::move(s.kind), std::move(s.components)};
  });
}

wf_status wf_field_write(const wf_field* f, const char* path) {
  WF_REQUIRE(f && path, "null argument");
  return guard([&] {
    if (f->kind == "scalar")
      write_field(path, f->components.front());
    else
      write_field(path, VectorField(f->components));
  });
}

size_t wf_field_components(const wf_field* f) { return f ? f->components.size() : 0; }
size_t wf_field_size(const wf_field* f) { return f && !f->components.empty() ? f->components.front().size() : 0; }

const double* wf_field_data(const wf_field* f, size_t component) {
  if (!f || component >= f->components.size()) return nullptr;
  return f->components[component].values().data();
}

void wf_field_free(wf_field* f) { delete f; }

}  // extern "C"
