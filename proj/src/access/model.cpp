#include "udi/access/model.hpp"

#include "udi/error.hpp"

namespace udi::access {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<E, std::string_view> (&table)[N], const char* what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  fail(ErrorCode::InvalidInput, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(E e, const std::pair<E, std::string_view> (&table)[N]) noexcept {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return "unknown";
}

constexpr std::pair<Role, std::string_view> kRoles[] = {{Role::user, "user"},
                                                        {Role::medical_staff, "medical_staff"},
                                                        {Role::producer, "producer"},
                                                        {Role::first_responder, "first_responder"}};
constexpr std::pair<Section, std::string_view> kSections[] = {{Section::social_focus, "social_focus"},
                                                              {Section::medical_focus, "medical_focus"},
                                                              {Section::technical_focus, "technical_focus"}};
constexpr std::pair<Action, std::string_view> kActions[] = {{Action::read, "read"}, {Action::write, "write"}};
constexpr std::pair<AuditAction, std::string_view> kAuditActions[] = {
    {AuditAction::read, "read"},   {AuditAction::write, "write"},          {AuditAction::link, "link"},
    {AuditAction::export_data, "export"}, {AuditAction::grant, "grant"}, {AuditAction::authenticate, "authenticate"}};
constexpr std::pair<Comparator, std::string_view> kComparators[] = {{Comparator::less, "<"},
                                                                    {Comparator::less_equal, "<="},
                                                                    {Comparator::greater, ">"},
                                                                    {Comparator::greater_equal, ">="}};

}  // namespace

std::string_view to_string(Role r) noexcept { return name_of(r, kRoles); }
std::string_view to_string(Section s) noexcept { return name_of(s, kSections); }
std::string_view to_string(Action a) noexcept { return name_of(a, kActions); }
std::string_view to_string(AuditAction a) noexcept { return name_of(a, kAuditActions); }
Role role_from_string(std::string_view s) { return parse_enum(s, kRoles, "role"); }
Section section_from_string(std::string_view s) { return parse_enum(s, kSections, "section"); }
Action action_from_string(std::string_view s) { return parse_enum(s, kActions, "action"); }
AuditAction audit_action_from_string(std::string_view s) { return parse_enum(s, kAuditActions, "audit action"); }

std::string session_signing_payload(const Session& s) {
  nlohmann::json j = to_json(s);
  j.erase("integrity_tag");
  return j.dump();
}

nlohmann::json to_json(const Session& s) {
  nlohmann::json j{{"subject_id", s.subject_id},
                   {"role", to_string(s.role)},
                   {"scope", s.scope},
                   {"issued_at", to_unix(s.issued_at)},
                   {"expires_at", to_unix(s.expires_at)},
                   {"integrity_tag", s.integrity_tag}};
  if (s.device_id) j["device_id"] = *s.device_id;
  return j;
}

Session session_from_json(const nlohmann::json& j) {
  try {
    Session s;
    s.subject_id = j.at("subject_id").get<std::string>();
    s.role = role_from_string(j.at("role").get<std::string>());
    s.scope = j.at("scope").get<std::string>();
    if (j.contains("device_id")) s.device_id = j.at("device_id").get<std::string>();
    s.issued_at = from_unix(j.at("issued_at").get<std::int64_t>());
    s.expires_at = from_unix(j.at("expires_at").get<std::int64_t>());
    s.integrity_tag = j.at("integrity_tag").get<std::string>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidSession, std::string("malformed session: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::InvalidSession, e.what());
  }
}

bool EmergencyCondition::matches(const VitalObservation& o) const noexcept {
  if (o.vital != vital) return false;
  switch (comparator) {
    case Comparator::less:
      return o.value < threshold;
    case Comparator::less_equal:
      return o.value <= threshold;
    case Comparator::greater:
      return o.value > threshold;
    case Comparator::greater_equal:
      return o.value >= threshold;
  }
  return false;
}

void validate(const EmergencyPolicy& p) {
  if (p.required_simultaneous < 2) fail(ErrorCode::InvalidInput, "emergency policy needs at least 2 simultaneous factors");
  if (p.required_simultaneous > static_cast<int>(p.conditions.size())) {
    fail(ErrorCode::InvalidInput, "required_simultaneous exceeds the number of conditions");
  }
  if (p.simultaneity_window.count() <= 0 || p.grant_ttl.count() <= 0) {
    fail(ErrorCode::InvalidInput, "window and TTL must be positive");
  }
}

nlohmann::json to_json(const EmergencyPolicy& p) {
  nlohmann::json conditions = nlohmann::json::array();
  for (const auto& c : p.conditions) {
    conditions.push_back({{"vital", c.vital}, {"comparator", name_of(c.comparator, kComparators)}, {"threshold", c.threshold}});
  }
  return {{"conditions", conditions},
          {"required_simultaneous", p.required_simultaneous},
          {"simultaneity_window_s", p.simultaneity_window.count()},
          {"grant_ttl_s", p.grant_ttl.count()}};
}

EmergencyPolicy emergency_policy_from_json(const nlohmann::json& j) {
  try {
    EmergencyPolicy p;
    for (const auto& c : j.at("conditions")) {
      p.conditions.push_back({c.at("vital").get<std::string>(),
                              parse_enum(c.at("comparator").get<std::string>(), kComparators, "comparator"),
                              c.at("threshold").get<double>()});
    }
    p.required_simultaneous = j.value("required_simultaneous", 2);
    p.simultaneity_window = Seconds{j.value("simultaneity_window_s", 60)};
    p.grant_ttl = Seconds{j.value("grant_ttl_s", 3600)};
    validate(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed emergency policy: ") + e.what());
  }
}

EmergencyPolicy default_emergency_policy() {
  EmergencyPolicy p;
  p.conditions = {{"SpO2", Comparator::less, 90.0}, {"systolic", Comparator::less, 80.0}};
  return p;
}

nlohmann::json to_json(const EmergencyGrant& g) {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : g.triggering_observations) {
    obs.push_back({{"ts", to_unix(o.at)}, {"vital", o.vital}, {"value", o.value}});
  }
  return {{"responder_id", g.responder_id},
          {"patient_id", g.patient_id},
          {"granted_at", to_unix(g.granted_at)},
          {"expires_at", to_unix(g.expires_at)},
          {"triggering_observations", obs}};
}

}  // namespace udi::access
