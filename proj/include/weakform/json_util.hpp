#pragma once

#include <json.hpp>

#include "weakform/field.hpp"

namespace weakform {

// {"lo":[..],"hi":[..],"points":[..],"periodic":[..]}
nlohmann::json grid_to_json(const Grid& g);
Grid grid_from_json(const nlohmann::json& j);

}  // namespace weakform
