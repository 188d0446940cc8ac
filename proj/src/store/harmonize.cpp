#include "udi/store/harmonize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "udi/error.hpp"

namespace udi::store {

namespace {

const std::set<std::string, std::less<>> kConversions{"lb_to_kg", "in_to_mm", "number", "string"};

double as_number(const nlohmann::json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string& s = v.get_ref<const std::string&>();
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out)) return out;
  }
  fail(ErrorCode::UnitConversionError, "field '" + field + "' is not numeric: " + v.dump());
}

nlohmann::json convert(const nlohmann::json& v, const FieldMap& m) {
  double factor = m.factor.value_or(1.0);
  if (m.conversion) {
    if (*m.conversion == "string") {
      if (m.factor) fail(ErrorCode::UnitConversionError, "string conversion cannot scale");
      return v.is_string() ? v : nlohmann::json(v.dump());
    }
    if (*m.conversion == "lb_to_kg") factor *= kPoundsToKilograms;
    if (*m.conversion == "in_to_mm") factor *= kInchesToMillimetres;
  } else if (!m.factor) {
    return v;
  }
  return as_number(v, m.source_field) * factor;
}

}  // namespace

void validate(const MappingSpec& spec) {
  if (spec.source_name.empty()) fail(ErrorCode::InvalidMapping, "mapping without source name");
  const auto& fields = section_fields(spec.section);
  std::set<std::string> sources;
  std::set<std::string> targets;
  for (const auto& m : spec.field_maps) {
    if (std::find(fields.begin(), fields.end(), m.canonical_field) == fields.end()) {
      fail(ErrorCode::InvalidMapping, "canonical field '" + m.canonical_field + "' is not in " +
                                          std::string(access::to_string(spec.section)));
    }
    if (m.conversion && !kConversions.contains(*m.conversion)) {
      fail(ErrorCode::InvalidMapping, "unknown conversion '" + *m.conversion + "'");
    }
    if (m.factor && !(std::isfinite(*m.factor) && *m.factor != 0.0)) {
      fail(ErrorCode::InvalidMapping, "conversion factor must be finite and non-zero");
    }
    if (!sources.insert(m.source_field).second) fail(ErrorCode::InvalidMapping, "source field mapped twice: " + m.source_field);
    if (!targets.insert(m.canonical_field).second) {
      fail(ErrorCode::InvalidMapping, "canonical field produced twice: " + m.canonical_field);
    }
  }
  for (const auto& r : spec.required_fields) {
    if (!targets.contains(r)) fail(ErrorCode::InvalidMapping, "required field '" + r + "' is never produced");
  }
}

MappingSpec identity_mapping(Section section, std::string source_name) {
  MappingSpec spec{std::move(source_name), section, {}, {}};
  for (const auto& f : section_fields(section)) spec.field_maps.push_back({f, f, std::nullopt, std::nullopt});
  return spec;
}

nlohmann::json to_json(const MappingSpec& spec) {
  nlohmann::json maps = nlohmann::json::array();
  for (const auto& m : spec.field_maps) {
    nlohmann::json j{{"source", m.source_field}, {"canonical", m.canonical_field}};
    if (m.factor) j["factor"] = *m.factor;
    if (m.conversion) j["conversion"] = *m.conversion;
    maps.push_back(j);
  }
  return {{"source_name", spec.source_name},
          {"section", access::to_string(spec.section)},
          {"field_maps", maps},
          {"required_fields", spec.required_fields}};
}

MappingSpec mapping_from_json(const nlohmann::json& j) {
  try {
    MappingSpec spec;
    spec.source_name = j.at("source_name").get<std::string>();
    spec.section = access::section_from_string(j.at("section").get<std::string>());
    for (const auto& m : j.at("field_maps")) {
      FieldMap fm{m.at("source").get<std::string>(), m.at("canonical").get<std::string>(), std::nullopt, std::nullopt};
      if (m.contains("factor")) fm.factor = m.at("factor").get<double>();
      if (m.contains("conversion")) fm.conversion = m.at("conversion").get<std::string>();
      spec.field_maps.push_back(std::move(fm));
    }
    spec.required_fields = j.value("required_fields", std::vector<std::string>{});
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidMapping, std::string("malformed mapping spec: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidMapping) throw;
    fail(ErrorCode::InvalidMapping, e.what());
  }
}

nlohmann::json harmonize(const nlohmann::json& raw, const MappingSpec& spec) {
  if (!raw.is_object()) fail(ErrorCode::InvalidInput, "source record must be an object");
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, value] : raw.items()) {
    const auto it = std::find_if(spec.field_maps.begin(), spec.field_maps.end(),
                                 [&](const FieldMap& m) { return m.source_field == key; });
    if (it == spec.field_maps.end()) {
      fail(ErrorCode::UnknownField, "source '" + spec.source_name + "' has no mapping for field '" + key + "'");
    }
    out[it->canonical_field] = convert(value, *it);
  }
  for (const auto& r : spec.required_fields) {
    if (!out.contains(r) || out.at(r).is_null()) {
      fail(ErrorCode::MissingRequiredField, "record lacks required field '" + r + "'");
    }
  }
  validate_section(spec.section, out);
  return out;
}

}  // namespace udi::store
