#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "weakform/expr.hpp"
#include "weakform/field.hpp"

namespace weakform {

// Strict reader over one JSON value. Every failure is a ConfigError carrying
// the JSON pointer of the offending value. Objects remember which keys were
// read; finish() rejects the rest.
class ConfigNode {
 public:
  ConfigNode(const nlohmann::json& value, std::string pointer);

  const std::string& pointer() const noexcept { return pointer_; }
  const nlohmann::json& raw() const noexcept { return *value_; }
  [[noreturn]] void fail(const std::string& message) const;

  bool is_object() const noexcept { return value_->is_object(); }
  bool is_array() const noexcept { return value_->is_array(); }
  bool is_string() const noexcept { return value_->is_string(); }
  bool has(const std::string& key) const;
  ConfigNode at(const std::string& key) const;
  std::optional<ConfigNode> get(const std::string& key) const;
  // Throws unless exactly one of `keys` is present; returns it.
  std::string one_of(const std::vector<std::string>& keys) const;
  void finish() const;

  std::size_t size() const;
  ConfigNode operator[](std::size_t i) const;

  double number() const;
  double positive() const;
  std::size_t count(std::size_t min = 0) const;
  bool boolean() const;
  std::string string() const;
  std::string choice(const std::vector<std::string>& allowed) const;
  Expr expr() const;
  std::vector<double> numbers() const;
  std::vector<Expr> exprs() const;
  std::vector<std::vector<double>> matrix() const;
  // [lo, hi] with lo <= hi.
  std::pair<double, double> range() const;
  // {"lo": [..], "hi": [..], "points": [..], "periodic": [..]}
  Grid grid() const;

  double number_or(const std::string& key, double fallback) const;
  std::size_t count_or(const std::string& key, std::size_t fallback, std::size_t min = 0) const;
  bool boolean_or(const std::string& key, bool fallback) const;

 private:
  const nlohmann::json* value_;
  std::string pointer_;
  std::shared_ptr<std::set<std::string>> used_;
};

// Parses text as JSON; syntax errors become ConfigError at "".
nlohmann::json parse_config_text(const std::string& text);

}  // namespace weakform
