#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace stagelens {

// Supports the subset the published schemas use: type, properties, required,
// additionalProperties (bool), items, enum, minimum, maximum, minItems, $ref
// into "definitions".
bool validate_schema(const nlohmann::json& schema, const nlohmann::json& value, std::string* error = nullptr);

// Published response schemas by route name; throws std::out_of_range.
const nlohmann::json& route_schema(std::string_view name);
std::vector<std::string> schema_names();

}  // namespace stagelens
