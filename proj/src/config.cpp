#include "weakform/config.hpp"

#include <cmath>

#include "weakform/error.hpp"

namespace weakform {

namespace {

// RFC 6901 escaping of one reference token.
std::string escape(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

const char* type_name(const nlohmann::json& j) { return j.type_name(); }

}  // namespace

ConfigNode::ConfigNode(const nlohmann::json& value, std::string pointer)
    : value_(&value), pointer_(std::move(pointer)), used_(std::make_shared<std::set<std::string>>()) {}

void ConfigNode::fail(const std::string& message) const { throw ConfigError(pointer_, message); }

bool ConfigNode::has(const std::string& key) const {
  if (!value_->is_object()) fail(std::string("expected an object, found ") + type_name(*value_));
  return value_->contains(key);
}

ConfigNode ConfigNode::at(const std::string& key) const {
  if (!has(key)) fail("missing required key \"" + key + "\"");
  used_->insert(key);
  return ConfigNode((*value_)[key], pointer_ + "/" + escape(key));
}

std::optional<ConfigNode> ConfigNode::get(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return at(key);
}

std::string ConfigNode::one_of(const std::vector<std::string>& keys) const {
  std::string found;
  for (const std::string& k : keys) {
    if (!has(k)) continue;
    if (!found.empty()) fail("\"" + found + "\" and \"" + k + "\" are mutually exclusive");
    found = k;
  }
  if (found.empty()) {
    std::string list;
    for (const std::string& k : keys) list += (list.empty() ? "\"" : ", \"") + k + "\"";
    fail("expected one of " + list);
  }
  return found;
}

void ConfigNode::finish() const {
  if (!value_->is_object()) return;
  for (const auto& item : value_->items())
    if (!used_->count(item.key())) throw ConfigError(pointer_ + "/" + escape(item.key()), "unknown key");
}

std::size_t ConfigNode::size() const {
  if (!value_->is_array()) fail(std::string("expected an array, found ") + type_name(*value_));
  return value_->size();
}

ConfigNode ConfigNode::operator[](std::size_t i) const {
  if (i >= size()) fail("index " + std::to_string(i) + " out of range");
  return ConfigNode((*value_)[i], pointer_ + "/" + std::to_string(i));
}

double ConfigNode::number() const {
  if (!value_->is_number()) fail(std::string("expected a number, found ") + type_name(*value_));
  const double v = value_->get<double>();
  if (!std::isfinite(v)) fail("expected a finite number");
  return v;
}

double ConfigNode::positive() const {
  const double v = number();
  if (!(v > 0.0)) fail("expected a positive number");
  return v;
}

std::size_t ConfigNode::count(std::size_t min) const {
  if (!value_->is_number_integer()) fail(std::string("expected an integer, found ") + type_name(*value_));
  const auto v = value_->get<long long>();
  if (v < 0 || static_cast<std::size_t>(v) < min) fail("expected an integer >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

bool ConfigNode::boolean() const {
  if (!value_->is_boolean()) fail(std::string("expected a boolean, found ") + type_name(*value_));
  return value_->get<bool>();
}

std::string ConfigNode::string() const {
  if (!value_->is_string()) fail(std::string("expected a string, found ") + type_name(*value_));
  return value_->get<std::string>();
}

std::string ConfigNode::choice(const std::vector<std::string>& allowed) const {
  const std::string s = string();
  for (const std::string& a : allowed)
    if (a == s) return s;
  std::string list;
  for (const std::string& a : allowed) list += (list.empty() ? "" : ", ") + a;
  fail("\"" + s + "\" is not one of: " + list);
}

Expr ConfigNode::expr() const {
  const std::string s = string();
  try {
    return parse(s);
  } catch (const SyntaxError& e) {
    fail(std::string("expression: ") + e.what());
  } catch (const UnknownFunction& e) {
    fail(std::string("expression: ") + e.what());
  }
}

std::vector<double> ConfigNode::numbers() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].number());
  return out;
}

std::vector<Expr> ConfigNode::exprs() const {
  std::vector<Expr> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].expr());
  return out;
}

std::vector<std::vector<double>> ConfigNode::matrix() const {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < size(); ++i) {
    out.push_back((*this)[i].numbers());
    if (out.back().size() != out.front().size()) (*this)[i].fail("rows must have equal length");
  }
  if (out.empty() || out.front().empty()) fail("expected a non-empty matrix");
  return out;
}

std::pair<double, double> ConfigNode::range() const {
  if (size() != 2) fail("expected [lo, hi]");
  const double lo = (*this)[0].number(), hi = (*this)[1].number();
  if (lo > hi) fail("expected lo <= hi");
  return {lo, hi};
}

Grid ConfigNode::grid() const {
  const ConfigNode lo = at("lo"), hi = at("hi"), points = at("points");
  const std::size_t n = lo.size();
  if (n == 0) lo.fail("a grid needs at least one axis");
  if (hi.size() != n) hi.fail("expected " + std::to_string(n) + " entries");
  if (points.size() != n) points.fail("expected " + std::to_string(n) + " entries");
  std::vector<bool> periodic(n, false);
  if (auto p = get("periodic")) {
    if (p->size() != n) p->fail("expected " + std::to_string(n) + " entries");
    for (std::size_t a = 0; a < n; ++a) periodic[a] = (*p)[a].boolean();
  }
  finish();
  std::vector<Axis> axes;
  for (std::size_t a = 0; a < n; ++a) {
    const double l = lo[a].number(), h = hi[a].number();
    if (!(l < h)) hi[a].fail("expected hi > lo");
    axes.push_back(Axis{l, h, points[a].count(4), periodic[a]});
  }
  return Grid(std::move(axes));
}

double ConfigNode::number_or(const std::string& key, double fallback) const {
  auto n = get(key);
  return n ? n->number() : fallback;
}

std::size_t ConfigNode::count_or(const std::string& key, std::size_t fallback, std::size_t min) const {
  auto n = get(key);
  return n ? n->count(min) : fallback;
}

bool ConfigNode::boolean_or(const std::string& key, bool fallback) const {
  auto n = get(key);
  return n ? n->boolean() : fallback;
}

nlohmann::json parse_config_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace weakform
