#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "udi/store/schema.hpp"

namespace udi::store {

inline constexpr double kPoundsToKilograms = 0.45359237;
inline constexpr double kInchesToMillimetres = 25.4;

struct FieldMap {
  std::string source_field;
  std::string canonical_field;
  /// Multiplicative unit conversion.
  std::optional<double> factor;
  /// Named conversion: "lb_to_kg", "in_to_mm", "number", "string".
  std::optional<std::string> conversion;
};

/// Wrapper-layer description of one source's record shape.
struct MappingSpec {
  std::string source_name;
  Section section = Section::technical_focus;
  std::vector<FieldMap> field_maps;
  /// Canonical names that must be present after mapping.
  std::vector<std::string> required_fields;
};

/// Throws InvalidMapping: unknown canonical field, unknown conversion,
/// duplicate source or canonical field, required field not produced.
void validate(const MappingSpec& spec);

/// Every field of the section mapped to itself.
MappingSpec identity_mapping(Section section, std::string source_name = "identity");

nlohmann::json to_json(const MappingSpec& spec);
/// Throws InvalidMapping.
MappingSpec mapping_from_json(const nlohmann::json& j);

/// Renames, converts and checks a flat source record.
/// Throws UnknownField, MissingRequiredField, UnitConversionError.
nlohmann::json harmonize(const nlohmann::json& raw, const MappingSpec& spec);

}  // namespace udi::store
