#include "weakform/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iterator>
#include <limits>

#include "weakform/canonical_json.hpp"
#include "weakform/error.hpp"

namespace weakform {

using nlohmann::json;

bool Check::pass() const noexcept {
  if (std::isnan(value)) return false;
  if (tolerance && !(value <= *tolerance)) return false;
  if (lower && !(value >= *lower)) return false;
  return true;
}

bool VerificationReport::passed() const noexcept {
  for (const Check& c : checks)
    if (!c.pass()) return false;
  return true;
}

const Check* VerificationReport::find(const std::string& name) const noexcept {
  for (const Check& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<double> refinement_orders(const std::vector<double>& defects) {
  std::vector<double> orders;
  for (std::size_t i = 0; i + 1 < defects.size(); ++i) orders.push_back(std::log2(defects[i] / defects[i + 1]));
  return orders;
}

Check order_check(std::string name, const std::vector<double>& defects, double lo, double hi) {
  Check c;
  c.name = std::move(name);
  c.values = defects;
  c.refinement_orders = refinement_orders(defects);
  c.lower = lo;
  c.tolerance = hi;
  if (c.refinement_orders.empty()) {
    c.value = std::numeric_limits<double>::quiet_NaN();
    c.note = "needs at least two refinement levels";
    return c;
  }
  const double mid = 0.5 * (lo + hi);
  double worst = c.refinement_orders[0];
  auto badness = [&](double p) {
    if (std::isnan(p)) return std::numeric_limits<double>::infinity();
    if (p < lo) return 1.0 + (lo - p);
    if (p > hi) return 1.0 + (p - hi);
    return std::abs(p - mid) / (hi - lo);
  };
  for (double p : c.refinement_orders)
    if (badness(p) > badness(worst)) worst = p;
  c.value = worst;
  return c;
}

std::string config_hash(const json& config) {
  const std::string text = canonical_dump(config);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::optional<std::string> build_timestamp() {
  const char* env = std::getenv("SOURCE_DATE_EPOCH");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const long long secs = std::strtoll(env, &end, 10);
  if (*end != '\0' || secs < 0) return std::nullopt;
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json doubles(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number_or_null(x));
  return a;
}

double to_double(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::vector<double> to_doubles(const json& j) {
  std::vector<double> out;
  for (const json& x : j) out.push_back(to_double(x));
  return out;
}

}  // namespace

json to_json(const VerificationReport& r) {
  json checks = json::array();
  for (const Check& c : r.checks) {
    json jc{{"name", c.name}, {"value", number_or_null(c.value)}, {"pass", c.pass()}};
    jc["tolerance"] = c.tolerance ? number_or_null(*c.tolerance) : json(nullptr);
    if (c.lower) jc["lower"] = number_or_null(*c.lower);
    if (!c.values.empty()) jc["values"] = doubles(c.values);
    if (!c.refinement_orders.empty()) jc["refinement_orders"] = doubles(c.refinement_orders);
    if (!c.note.empty()) jc["note"] = c.note;
    checks.push_back(std::move(jc));
  }
  json prov{{"config_hash", r.provenance.config_hash}, {"version", r.provenance.version}};
  prov["timestamp"] = r.provenance.timestamp ? json(*r.provenance.timestamp) : json(nullptr);
  return json{{"schema", kReportSchema}, {"scenario", r.scenario},   {"command", r.command},
              {"metadata", r.metadata},  {"checks", checks},         {"warnings", r.warnings},
              {"passed", r.passed()},    {"provenance", prov}};
}

std::string to_json_text(const VerificationReport& r) { return canonical_dump(to_json(r)) + "\n"; }

std::string to_csv(const VerificationReport& r) {
  std::string out = "name,value,tolerance,pass\n";
  for (const Check& c : r.checks) {
    std::string name = c.name;
    if (name.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char ch : name) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      name = q + "\"";
    }
    out += name + "," + (std::isnan(c.value) ? std::string("nan") : format_double(c.value)) + "," +
           (c.tolerance ? format_double(*c.tolerance) : std::string()) + "," + (c.pass() ? "true" : "false") + "\n";
  }
  return out;
}

VerificationReport report_from_json(const json& j) {
  try {
    if (j.at("schema").get<int>() != kReportSchema) throw IoError("unsupported report schema " + j.at("schema").dump());
    VerificationReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.metadata = j.at("metadata");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    const json& p = j.at("provenance");
    r.provenance.config_hash = p.at("config_hash").get<std::string>();
    r.provenance.version = p.at("version").get<std::string>();
    if (!p.at("timestamp").is_null()) r.provenance.timestamp = p.at("timestamp").get<std::string>();
    for (const json& jc : j.at("checks")) {
      Check c;
      c.name = jc.at("name").get<std::string>();
      c.value = to_double(jc.at("value"));
      if (!jc.at("tolerance").is_null()) c.tolerance = jc.at("tolerance").get<double>();
      if (jc.contains("lower")) c.lower = jc.at("lower").get<double>();
      if (jc.contains("values")) c.values = to_doubles(jc.at("values"));
      if (jc.contains("refinement_orders")) c.refinement_orders = to_doubles(jc.at("refinement_orders"));
      if (jc.contains("note")) c.note = jc.at("note").get<std::string>();
      if (jc.at("pass").get<bool>() != c.pass()) throw IoError("stored pass flag of check '" + c.name + "' is inconsistent");
      r.checks.push_back(std::move(c));
    }
    if (j.at("passed").get<bool>() != r.passed()) throw IoError("stored report verdict is inconsistent");
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

void write_report(const VerificationReport& r, const std::filesystem::path& path, ReportFormat format) {
  const std::string text = format == ReportFormat::json ? to_json_text(r) : to_csv(r);
  std::ofstream os(path, std::ios::binary);
  if (!os || !os.write(text.data(), static_cast<std::streamsize>(text.size())))
    throw IoError("cannot write " + path.string());
}

VerificationReport read_report(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return report_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw IoError(std::string("report is not JSON: ") + e.what());
  }
}

}  // namespace weakform
