#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace weakform {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kReportSchema = 1;

// One named check. It passes when lower <= value <= tolerance for the bounds
// that are present; a NaN value never passes.
struct Check {
  std::string name;
  double value = 0.0;
  std::optional<double> tolerance;
  std::optional<double> lower;
  std::vector<double> values;             // per level or per time index
  std::vector<double> refinement_orders;  // only when values come from a refinement study
  std::string note;

  bool pass() const noexcept;
};

struct Provenance {
  std::string config_hash;
  std::string version = kVersion;
  std::optional<std::string> timestamp;
};

struct VerificationReport {
  std::string scenario;
  std::string command;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<Check> checks;
  std::vector<std::string> warnings;
  Provenance provenance;

  bool passed() const noexcept;
  Check& add(Check c) { return checks.emplace_back(std::move(c)); }
  const Check* find(const std::string& name) const noexcept;
};

// Measured exponents p with defect ~ h^p for successive halvings.
std::vector<double> refinement_orders(const std::vector<double>& defects);

// Check on a set of measured orders; its value is the order that is worst
// against [lo, hi], so the check passes exactly when every order lies inside.
Check order_check(std::string name, const std::vector<double>& defects, double lo, double hi);

// 64-bit FNV-1a over the canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);
// SOURCE_DATE_EPOCH as an ISO-8601 UTC string, or nothing; reports stay byte-stable.
std::optional<std::string> build_timestamp();

nlohmann::json to_json(const VerificationReport& r);
std::string to_json_text(const VerificationReport& r);
std::string to_csv(const VerificationReport& r);
// Throws IoError if a stored pass flag disagrees with its recomputed value.
VerificationReport report_from_json(const nlohmann::json& j);

enum class ReportFormat { json, csv };
void write_report(const VerificationReport& r, const std::filesystem::path& path, ReportFormat format);
VerificationReport read_report(const std::filesystem::path& path);

// Shortest decimal that reads back to the same double.
std::string format_double(double v);

}  // namespace weakform
