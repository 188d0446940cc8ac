#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "udi/clock.hpp"

namespace udi::access {

enum class Role { user, medical_staff, producer, first_responder };
inline constexpr Role kAllRoles[] = {Role::user, Role::medical_staff, Role::producer, Role::first_responder};

enum class Section { social_focus, medical_focus, technical_focus };
inline constexpr Section kAllSections[] = {Section::social_focus, Section::medical_focus, Section::technical_focus};

enum class Action { read, write };
inline constexpr Action kAllActions[] = {Action::read, Action::write};

/// What an audit entry records; decide() only ever produces read or write.
enum class AuditAction { read, write, link, export_data, grant, authenticate };

std::string_view to_string(Role r) noexcept;
std::string_view to_string(Section s) noexcept;
std::string_view to_string(Action a) noexcept;
std::string_view to_string(AuditAction a) noexcept;
/// Throw InvalidInput on unknown names.
Role role_from_string(std::string_view s);
Section section_from_string(std::string_view s);
Action action_from_string(std::string_view s);
AuditAction audit_action_from_string(std::string_view s);

/// Login bound to contextual attributes. `scope` is the patient id of a user
/// or the manufacturer of a producer. A session with `device_id` is a
/// wearable upload capability restricted to the owner's social focus data.
struct Session {
  std::string subject_id;
  Role role = Role::user;
  std::string scope;
  std::optional<std::string> device_id;
  Timestamp issued_at{};
  Timestamp expires_at{};
  std::string integrity_tag;

  bool operator==(const Session&) const = default;
};

/// Canonical byte string covered by the integrity tag.
std::string session_signing_payload(const Session& s);
nlohmann::json to_json(const Session& s);
/// Throws InvalidSession on a structurally bad document.
Session session_from_json(const nlohmann::json& j);

/// A section of one digital object, with the attributes that decide
/// ownership.
struct Resource {
  Section section = Section::social_focus;
  /// Patient owning the data: the patient for social/medical sections, the
  /// implant recipient (if linked) for technical sections.
  std::string patient_id;
  /// Manufacturer of the device, for technical sections.
  std::string manufacturer;
  /// Fields touched by a write; empty means the section as a whole.
  std::vector<std::string> fields;
  /// Free-form object reference for the audit record.
  std::string object_ref;
};

struct Decision {
  bool allowed = false;
  std::string reason;
  std::uint64_t audit_seq = 0;
};

struct VitalObservation {
  Timestamp at{};
  std::string vital;
  double value = 0.0;

  bool operator==(const VitalObservation&) const = default;
};

enum class Comparator { less, less_equal, greater, greater_equal };

struct EmergencyCondition {
  std::string vital;
  Comparator comparator = Comparator::less;
  double threshold = 0.0;

  bool matches(const VitalObservation& o) const noexcept;
};

struct EmergencyPolicy {
  std::vector<EmergencyCondition> conditions;
  int required_simultaneous = 2;
  Seconds simultaneity_window{60};
  Seconds grant_ttl{3600};
};

/// Throws InvalidInput (k < 2, k > #conditions, non-positive durations).
void validate(const EmergencyPolicy& policy);
nlohmann::json to_json(const EmergencyPolicy& p);
EmergencyPolicy emergency_policy_from_json(const nlohmann::json& j);
/// SpO2 < 90 and systolic < 80, k = 2, window 60 s, TTL 3600 s.
EmergencyPolicy default_emergency_policy();

/// Read-only, patient-scoped, time-limited access for a first responder.
struct EmergencyGrant {
  std::string responder_id;
  std::string patient_id;
  Timestamp granted_at{};
  Timestamp expires_at{};
  std::vector<VitalObservation> triggering_observations;

  bool operator==(const EmergencyGrant&) const = default;
  bool active_at(Timestamp t) const noexcept { return t >= granted_at && t < expires_at; }
};

nlohmann::json to_json(const EmergencyGrant& g);

using Principal = std::variant<Session, EmergencyGrant>;

}  // namespace udi::access
