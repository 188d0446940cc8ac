#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "udi/access/audit.hpp"
#include "udi/access/directory.hpp"
#include "udi/access/model.hpp"
#include "udi/clock.hpp"

namespace udi::access {

/// How one (role, action, section) cell is decided.
enum class Rule {
  deny,
  allow,
  /// Only the patient's own data.
  allow_own,
  /// Own data, and only fields in the dedicated patient-entered subsection.
  allow_own_dedicated,
  /// Technical data of devices the producer manufactures.
  allow_own_devices,
  /// Only with an active emergency grant for that patient, read-only.
  allow_with_grant,
};

std::string_view to_string(Rule r) noexcept;
Rule rule_from_string(std::string_view s);

class AccessMatrix {
 public:
  /// Every cell deny.
  AccessMatrix() = default;
  /// The shell model: users own their data, staff read everything and author
  /// medical entries, producers see only their devices, responders need a grant.
  static AccessMatrix normative();

  Rule rule(Role role, Action action, Section section) const noexcept;
  void set(Role role, Action action, Section section, Rule rule) noexcept;

  nlohmann::json to_json() const;
  /// Applies `{"role": {"action": {"section": "rule"}}}` overrides on top of `base`.
  static AccessMatrix from_json(const nlohmann::json& j, const AccessMatrix& base = normative());

  bool operator==(const AccessMatrix&) const = default;

 private:
  std::array<Rule, 4 * 2 * 3> cells_{};
};

struct AccessConfig {
  Seconds session_ttl{3600};
  /// Social fields a patient (or their wearable) may write.
  std::set<std::string, std::less<>> dedicated_social_fields{"vitals", "steps", "sleep", "nutrition"};
  /// Fields a device capability may write.
  std::set<std::string, std::less<>> device_fields{"vitals", "steps", "sleep"};
};

/// Pure evaluation of one request, without audit. `grants` are the
/// registered emergency grants; `now` decides their activity.
Decision evaluate(const AccessMatrix& matrix, const AccessConfig& config, const Principal& principal, Action action,
                  const Resource& resource, Timestamp now, const std::vector<EmergencyGrant>& grants);

/// Latest window end <= now at which at least k distinct conditions are each
/// met by an observation inside [end - window, end]. Pure.
std::optional<EmergencyGrant> find_emergency(const std::vector<VitalObservation>& observations,
                                             const EmergencyPolicy& policy, Timestamp now,
                                             const std::string& responder_id, const std::string& patient_id);

/// Decision point: verifies sessions, evaluates, audits every outcome.
class AccessController {
 public:
  AccessController(const Clock& clock, std::string server_key, AuditLog& audit,
                   AccessMatrix matrix = AccessMatrix::normative(), AccessConfig config = {});

  /// Only denied attempts are audited. Throws UnknownSubject, BadSecret.
  Session authenticate(const CredentialDirectory& directory, std::string_view subject_id, std::string_view secret);
  /// Signs a session for an already authenticated subject.
  Session issue_session(std::string subject_id, Role role, std::string scope,
                        std::optional<std::string> device_id = std::nullopt);
  /// Wearable upload token scoped to the owner's social data; one audited decision.
  /// Throws AccessDenied.
  Session issue_device_capability(const Session& owner, std::string device_id);
  bool verify(const Session& session) const;

  /// Throws InvalidSession (tampered tag or unregistered grant) and
  /// ExpiredSession; both are audited before throwing.
  Decision decide(const Principal& principal, Action action, const Resource& resource);

  /// Registers and audits a new grant; an identical existing grant is returned
  /// without a second issuance.
  std::optional<EmergencyGrant> evaluate_emergency(const std::string& responder_id, const std::string& patient_id,
                                                   const std::vector<VitalObservation>& observations,
                                                   const EmergencyPolicy& policy);

  /// Audits an operation decided outside the matrix (link, export).
  Decision record(const Session& actor, AuditAction action, std::string resource, bool allowed, std::string reason);

  std::vector<EmergencyGrant> grants() const;
  AuditLog& audit() noexcept { return audit_; }
  const Clock& clock() const noexcept { return clock_; }
  const AccessMatrix& matrix() const noexcept { return matrix_; }
  const AccessConfig& config() const noexcept { return config_; }

 private:
  std::string sign(const Session& s) const;

  const Clock& clock_;
  std::string key_;
  AuditLog& audit_;
  AccessMatrix matrix_;
  AccessConfig config_;
  mutable std::mutex mutex_;
  std::vector<EmergencyGrant> grants_;
};

/// Procurement gate over an implant's technical section.
struct ProcurementStatus {
  bool cleared = false;
  std::vector<std::string> missing;
};

/// Mandatory: udi, manufacturer, device_name, process_summary and a
/// non-empty revision_instruments list.
ProcurementStatus procurement_status(const nlohmann::json& technical_section);

}  // namespace udi::access
