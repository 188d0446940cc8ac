#include "udi/store/schema.hpp"

#include <algorithm>
#include <tuple>

#include "udi/error.hpp"

namespace udi::store {

std::string_view to_string(ObjectKind k) noexcept {
  switch (k) {
    case ObjectKind::patient:
      return "patient";
    case ObjectKind::surgery:
      return "surgery";
    case ObjectKind::implant:
      return "implant";
  }
  return "unknown";
}

ObjectKind kind_from_string(std::string_view s) {
  if (s == "patient") return ObjectKind::patient;
  if (s == "surgery") return ObjectKind::surgery;
  if (s == "implant") return ObjectKind::implant;
  fail(ErrorCode::InvalidInput, "unknown object kind '" + std::string(s) + "'");
}

Section primary_section(ObjectKind k) noexcept {
  return k == ObjectKind::implant ? Section::technical_focus : Section::medical_focus;
}

const std::vector<std::string>& section_fields(Section s) {
  static const std::vector<std::string> technical{"udi",
                                                  "manufacturer",
                                                  "device_name",
                                                  "material_lot",
                                                  "static_process_parameters",
                                                  "in_process_parameters",
                                                  "post_treatment",
                                                  "ndt_results",
                                                  "surface_roughness_um",
                                                  "revision_instruments",
                                                  "compatible_components",
                                                  "process_summary",
                                                  "marking_pharmacode"};
  static const std::vector<std::string> medical{"demographics", "weight_kg",   "surgeries",
                                                "procedure",    "surgery_date", "imaging_references",
                                                "follow_ups",   "rehabilitation_measures", "notes",
                                                "author"};
  static const std::vector<std::string> social{"vitals", "steps", "sleep", "nutrition"};
  switch (s) {
    case Section::technical_focus:
      return technical;
    case Section::medical_focus:
      return medical;
    case Section::social_focus:
      return social;
  }
  return social;
}

std::optional<Section> section_of_field(std::string_view field) {
  for (Section s : access::kAllSections) {
    const auto& f = section_fields(s);
    if (std::find(f.begin(), f.end(), field) != f.end()) return s;
  }
  return std::nullopt;
}

const std::vector<std::string>& vital_names() {
  static const std::vector<std::string> names{"heart_rate", "SpO2", "systolic", "diastolic"};
  return names;
}

void validate_section(Section s, const nlohmann::json& payload) {
  if (!payload.is_object()) fail(ErrorCode::InvalidInput, std::string(access::to_string(s)) + " payload must be an object");
  const auto& fields = section_fields(s);
  for (const auto& [key, _] : payload.items()) {
    if (std::find(fields.begin(), fields.end(), key) == fields.end()) {
      fail(ErrorCode::UnknownField, "field '" + key + "' does not belong to " + std::string(access::to_string(s)));
    }
  }
}

nlohmann::json to_json(const DigitalObject& o) {
  nlohmann::json sections = nlohmann::json::object();
  for (const auto& [s, payload] : o.sections) sections[std::string(access::to_string(s))] = payload;
  return {{"object_id", o.object_id},
          {"kind", to_string(o.kind)},
          {"metadata", o.metadata},
          {"sections", sections},
          {"version", o.version},
          {"last_writer", o.last_writer},
          {"updated_at", to_unix(o.updated_at)},
          {"deleted", o.deleted}};
}

DigitalObject object_from_json(const nlohmann::json& j) {
  try {
    DigitalObject o;
    o.object_id = j.at("object_id").get<std::string>();
    o.kind = kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("metadata")) o.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    if (j.contains("sections")) {
      for (const auto& [name, payload] : j.at("sections").items()) {
        const Section s = access::section_from_string(name);
        validate_section(s, payload);
        o.sections[s] = payload;
      }
    }
    o.version = j.value("version", std::uint64_t{0});
    o.last_writer = j.value("last_writer", "");
    o.updated_at = from_unix(j.value("updated_at", std::int64_t{0}));
    o.deleted = j.value("deleted", false);
    return o;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed digital object: ") + e.what());
  }
}

bool lww_less(const DigitalObject& a, const DigitalObject& b) {
  const auto key = [](const DigitalObject& o) { return std::tie(o.version, o.updated_at, o.last_writer); };
  if (key(a) != key(b)) return key(a) < key(b);
  return to_json(a).dump() < to_json(b).dump();
}

}  // namespace udi::store
