#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "weakform/field.hpp"

namespace weakform {

// One JSON header line (sorted keys, no whitespace), a newline, then the
// little-endian f64 payload with components concatenated.
struct StoredField {
  std::string kind;  // "scalar" or "vector"
  std::vector<ScalarField> components;

  ScalarField scalar() &&;
  VectorField vector() &&;
};

void write_field(const std::filesystem::path& path, const ScalarField& f);
void write_field(const std::filesystem::path& path, const VectorField& v);
StoredField read_field(const std::filesystem::path& path);

std::string encode_field(const std::string& kind, std::span<const ScalarField* const> comps);
StoredField decode_field(const std::string& bytes);

}  // namespace weakform
