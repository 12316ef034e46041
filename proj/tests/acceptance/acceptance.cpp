// Acceptance suite: one line per criterion. Thresholds are pinned here, not
// taken from the scenario files, so editing a config cannot relax them.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "weakform/config.hpp"
#include "weakform/scenario.hpp"

using namespace weakform;

namespace {

struct Verdict {
  bool ok = true;
  std::vector<std::string> why;

  void need(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      why.push_back(what);
    }
  }
};

using Reports = std::map<std::string, VerificationReport>;

const Check* find(const Reports& r, const std::string& scenario, const std::string& check, Verdict& v) {
  const auto it = r.find(scenario);
  if (it == r.end()) {
    v.need(false, scenario + " missing");
    return nullptr;
  }
  const Check* c = it->second.find(check);
  v.need(c != nullptr, scenario + ": no check " + check);
  return c;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

void at_most(const Reports& r, const std::string& s, const std::string& check, double bound, Verdict& v) {
  if (const Check* c = find(r, s, check, v)) v.need(c->value <= bound, s + ": " + check + " " + num(c->value) + " > " + num(bound));
}

void orders_in(const Reports& r, const std::string& s, const std::string& check, double lo, double hi, Verdict& v) {
  if (const Check* c = find(r, s, check, v)) {
    v.need(!c->refinement_orders.empty(), s + ": " + check + " has no orders");
    for (double p : c->refinement_orders)
      v.need(p >= lo && p <= hi, s + ": " + check + " order " + num(p) + " outside [" + num(lo) + ", " + num(hi) + "]");
  }
}

void orders_at_least(const Reports& r, const std::string& s, const std::string& check, double lo, Verdict& v) {
  if (const Check* c = find(r, s, check, v)) {
    v.need(!c->refinement_orders.empty(), s + ": " + check + " has no orders");
    for (double p : c->refinement_orders) v.need(p >= lo, s + ": " + check + " order " + num(p) + " below " + num(lo));
  }
}

// Target point counts of every level, from the report metadata.
std::vector<std::size_t> target_points(const Reports& r, const std::string& s, std::size_t axis) {
  std::vector<std::size_t> out;
  const auto it = r.find(s);
  if (it == r.end() || !it->second.metadata.contains("levels")) return out;
  for (const auto& level : it->second.metadata["levels"]) {
    const auto& g = level.contains("target") ? level["target"] : level["grid"];
    out.push_back(g["points"][axis].get<std::size_t>());
  }
  return out;
}

std::size_t identity_points(const std::string& file) {
  for (const auto& e : embedded_scenarios())
    if (e.file == file) return parse_config_text(e.text)["identity"][0]["grid"]["points"][0].get<std::size_t>();
  return 0;
}

using Rule = std::function<void(const Reports&, Verdict&)>;

const std::map<int, Rule>& rules() {
  static const std::map<int, Rule> table{
      {1,
       [](const Reports& r, Verdict& v) {
         for (const char* s : {"continuity-linear-1d", "continuity-linear-2d"}) {
           orders_in(r, s, "continuity_order", 1.8, 2.2, v);
           v.need(target_points(r, s, 0) == std::vector<std::size_t>{64, 128, 256},
                  std::string(s) + ": levels are not N = 64, 128, 256");
         }
       }},
      {2,
       [](const Reports& r, Verdict& v) {
         const std::string s = "mixed-partials-flow";
         orders_in(r, s, "mixed_partial_defect", 1.8, 2.2, v);
         if (const Check* a = find(r, s, "antisymmetry", v)) v.need(a->value == 0.0, "antisymmetry not exact");
         const Check* good = find(r, s, "mixed_partial_defect", v);
         const Check* bad = find(r, s, "control_defect", v);
         if (good && bad && bad->lower) {
           v.need(bad->value > *bad->lower, "negative control passed its threshold");
           v.need(good->value <= *bad->lower, "flow map defect above the control threshold");
         } else {
           v.need(false, "no control threshold");
         }
       }},
      {3,
       [](const Reports& r, Verdict& v) {
         const std::string s = "divergence-identity";
         orders_at_least(r, s, "divergence_defect[0]", 1.8, v);
         orders_in(r, s, "divergence_defect[1]", 1.8, 2.2, v);
         for (const char* c : {"divergence_equal_fields[0]", "divergence_equal_fields[1]"})
           if (const Check* e = find(r, s, c, v)) v.need(e->value == 0.0, std::string(c) + " not exactly zero");
       }},
      {4,
       [](const Reports& r, Verdict& v) {
         const std::string s = "pullback-polynomial";
         at_most(r, s, "commutation_defect", 1e-4, v);
         orders_in(r, s, "commutation_defect", 1.8, 2.2, v);
         const auto pts = target_points(r, s, 0);
         v.need(!pts.empty() && pts.back() == 64, "finest target grid is not 64^3");
       }},
      {5,
       [](const Reports& r, Verdict& v) {
         const std::string s = "stokes-linear-r3";
         at_most(r, s, "stokes_defect", 1e-6, v);
         at_most(r, s, "r3_stokes_defect", 1e-6, v);
         at_most(r, s, "paths_agree", 1e-12, v);
         orders_in(r, "stokes-affine-order", "stokes_defect", 1.8, 2.2, v);
       }},
      {6,
       [](const Reports& r, Verdict& v) {
         for (const char* s : {"identity-bohm-1d", "identity-bohm-2d"}) {
           at_most(r, s, "identity_log[0]", 1e-6, v);
           orders_in(r, s, "identity_direct[0]", 1.8, 2.2, v);
         }
         v.need(identity_points("identity_bohm_1d.json") == 256, "1D identity grid is not N = 256");
         v.need(identity_points("identity_bohm_2d.json") == 128, "2D identity grid is not N = 128^2");
       }},
      {7,
       [](const Reports& r, Verdict& v) {
         at_most(r, "el-static-gaussian", "gradient_rel_err", 1e-3, v);
         at_most(r, "el-schrodinger-critical", "dS_fd", 1e-6, v);
       }},
      {8,
       [](const Reports& r, Verdict& v) {
         for (const char* s : {"schrodinger-free-packet", "schrodinger-coherent", "schrodinger-ground-state",
                               "schrodinger-mixture"})
           at_most(r, s, "norm_drift_per_1000_steps", 1e-10, v);
         at_most(r, "schrodinger-free-packet", "free_variance_error", 1e-6, v);
         at_most(r, "schrodinger-coherent", "mean_position_error", 1e-6, v);
         orders_in(r, "schrodinger-mixture", "weak_newton_residual", 1.8, 2.2, v);
         orders_in(r, "schrodinger-mixture", "quantum_potential_balance", 1.8, 2.2, v);
         at_most(r, "schrodinger-ground-state", "ground_state_U_plus_Q_spread", 1e-8, v);
       }},
      {9,
       [](const Reports& r, Verdict& v) {
         for (const char* s : {"schrodinger-ground-state", "schrodinger-free-equivalence", "schrodinger-coherent-2d"}) {
           at_most(r, s, "assembly_paths_agree", 1e-10, v);
           at_most(r, s, "assembly_paths_agree_printed_sign", 1e-10, v);
         }
       }},
  };
  return table;
}

std::string file_of(const std::string& name) {
  for (const auto& e : embedded_scenarios())
    if (parse_config_text(e.text).value("name", "") == name) return e.text;
  return {};
}

void print_line(int number, bool ok, const std::string& title, double seconds, double budget,
                const std::vector<std::string>& why) {
  char line[512];
  std::snprintf(line, sizeof line, "criterion %2d: %s  %-72s %7.2f s", number, ok ? "PASS" : "FAIL", title.c_str(),
                seconds);
  std::printf("%s", line);
  if (budget > 0) std::printf(" (budget %.0f s)", budget);
  for (const std::string& w : why) std::printf("\n    %s", w.c_str());
  std::printf("\n");
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  // argv[1]: path to the command-line tool for the suite criterion.
  const std::string cli = argc > 1 ? argv[1] : "";
  int failures = 0;

  for (const Criterion& c : acceptance_criteria()) {
    Verdict v;
    Reports reports;
    const auto start = std::chrono::steady_clock::now();
    for (const std::string& name : c.scenarios) {
      const std::string text = file_of(name);
      if (text.empty()) {
        v.need(false, name + ": not shipped");
        continue;
      }
      try {
        const auto config = parse_config_text(text);
        VerificationReport report = run_scenario(config["kind"].get<std::string>(), config);
        for (const Check& chk : report.checks)
          v.need(chk.pass(), name + ": " + chk.name + " = " + num(chk.value) + " fails its configured bound");
        reports.emplace(name, std::move(report));
      } catch (const std::exception& e) {
        v.need(false, name + ": " + e.what());
      }
    }
    rules().at(c.number)(reports, v);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0)
      v.need(seconds <= c.budget_seconds, "runtime " + num(seconds) + " s over budget " + num(c.budget_seconds) + " s");
    print_line(c.number, v.ok, c.title, seconds, c.budget_seconds, v.why);
    failures += v.ok ? 0 : 1;
  }

  {
    Verdict v;
    const double budget = 600.0;
    const auto start = std::chrono::steady_clock::now();
    if (cli.empty()) {
      v.need(false, "no command-line tool given");
    } else {
      const std::string cmd = "\"" + cli + "\" suite --all > /dev/null 2>&1";
      const int status = std::system(cmd.c_str());
      v.need(status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0,
             "suite --all exited with " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.need(seconds <= budget, "runtime " + num(seconds) + " s over budget");
    print_line(10, v.ok, "suite --all completes with exit code 0", seconds, budget, v.why);
    failures += v.ok ? 0 : 1;
  }

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
