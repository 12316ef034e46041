#pragma once

#include <string>

#include <json.hpp>

namespace weakform {

// Sorted keys, no whitespace, doubles as shortest round-trip decimals,
// non-finite doubles as null.
std::string canonical_dump(const nlohmann::json& j);

}  // namespace weakform
