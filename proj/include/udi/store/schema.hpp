#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "udi/access/model.hpp"
#include "udi/clock.hpp"

namespace udi::store {

using access::Section;

enum class ObjectKind { patient, surgery, implant };

std::string_view to_string(ObjectKind k) noexcept;
ObjectKind kind_from_string(std::string_view s);

/// Section written when an object changes without any section payload.
Section primary_section(ObjectKind k) noexcept;

/// Closed field list of a section.
const std::vector<std::string>& section_fields(Section s);
std::optional<Section> section_of_field(std::string_view field);
/// Vital names accepted in the social vitals series.
const std::vector<std::string>& vital_names();

/// Throws UnknownField for a field outside the section's list, InvalidInput
/// if the payload is not an object.
void validate_section(Section s, const nlohmann::json& payload);

/// Cumulative digital object: a patient, a surgery or an implant.
struct DigitalObject {
  std::string object_id;
  ObjectKind kind = ObjectKind::patient;
  std::map<std::string, std::string> metadata;
  std::map<Section, nlohmann::json> sections;
  std::uint64_t version = 0;
  std::string last_writer;
  Timestamp updated_at{};
  bool deleted = false;

  bool operator==(const DigitalObject&) const = default;
};

nlohmann::json to_json(const DigitalObject& o);
/// Throws InvalidInput.
DigitalObject object_from_json(const nlohmann::json& j);

/// Total order used for last-writer-wins: version, then timestamp, then
/// writer id, then canonical content as a final deterministic tie-break.
bool lww_less(const DigitalObject& a, const DigitalObject& b);

}  // namespace udi::store
