#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "udi/access/audit.hpp"
#include "udi/access/directory.hpp"
#include "udi/access/policy.hpp"
#include "udi/clock.hpp"
#include "udi/store/harmonize.hpp"
#include "udi/store/object_store.hpp"

namespace udi::federation {

using access::Principal;
using access::Session;

enum class SourceKind { producer_feed, vitals_stream, his_query };
std::string_view to_string(SourceKind k) noexcept;
SourceKind source_kind_from_string(std::string_view s);

struct SourceAdapter {
  std::string source_name;
  SourceKind kind = SourceKind::producer_feed;
  store::MappingSpec mapping;
  bool enabled = true;
};

nlohmann::json to_json(const SourceAdapter& a);
SourceAdapter source_from_json(const nlohmann::json& j);

struct EcosystemConfig {
  std::string server_key = "udi-ecosystem-dev-key";
  std::string admin_secret = "udi-admin";
  std::optional<std::filesystem::path> store_dir;
  std::optional<std::filesystem::path> directory_file;
  std::string host = "127.0.0.1";
  int port = 8080;
  Seconds session_ttl{3600};
  access::EmergencyPolicy emergency_policy = access::default_emergency_policy();
  access::AccessMatrix matrix = access::AccessMatrix::normative();
  std::set<access::Role> export_roles{access::Role::medical_staff};
  int age_bucket_years = 5;

  /// Unknown keys are rejected. Throws InvalidInput.
  static EcosystemConfig from_json(const nlohmann::json& j);
  static EcosystemConfig load(const std::filesystem::path& file);
  /// UDI_PORT, UDI_HOST, UDI_STORE_DIR, UDI_SERVER_KEY, UDI_ADMIN_SECRET and
  /// UDI_EMERGENCY_POLICY (inline JSON or a file path).
  void apply_environment();
};

struct RecordResult {
  std::size_t index = 0;
  bool ok = false;
  std::string object_id;
  std::string error;
  std::string message;
  std::optional<std::uint64_t> audit_seq;
  std::optional<bool> procurement_cleared;
};

struct IngestReport {
  std::vector<RecordResult> results;
  std::size_t applied() const;
  std::size_t failed() const;
  nlohmann::json to_json() const;
};

struct RowError {
  std::size_t line = 0;
  std::string reason;
};

struct VitalsReport {
  std::size_t accepted = 0;
  std::vector<RowError> errors;
  std::uint64_t audit_seq = 0;
  nlohmann::json to_json() const;
};

struct LinkResult {
  std::string surgery_id;
  std::uint64_t audit_seq = 0;
};

/// Cross-domain join around a UDI or a patient id.
struct FederatedView {
  std::string key;
  nlohmann::json patient;  // null when absent or unreadable
  std::vector<nlohmann::json> implants;
  std::vector<nlohmann::json> surgeries;
  nlohmann::json vitals_summary;  // null when unreadable
  Timestamp assembled_at{};

  nlohmann::json to_json() const;
};

/// Per vital: count, min, max, latest {ts, value}. Object keyed by vital name.
nlohmann::json summarize_vitals(const nlohmann::json& series);

struct SurgeonReport {
  nlohmann::json document;
  std::string text;
};

/// Renders the plain-text form of a report document.
std::string render_report(const nlohmann::json& document);

std::string patient_object_id(std::string_view patient_id);
std::string implant_object_id(std::string_view device_identifier, std::string_view serial);

/// Service facade binding the access controller, store and adapters.
class Ecosystem {
 public:
  Ecosystem(const Clock& clock, EcosystemConfig config, access::CredentialDirectory directory);

  Session authenticate(std::string_view subject_id, std::string_view secret);
  Session device_capability(const Session& owner, std::string device_id);

  /// Idempotent for an identical adapter. Throws AccessDenied (bad admin
  /// secret), DuplicateSource, InvalidMapping.
  void register_source(SourceAdapter adapter, std::string_view admin_secret);
  std::vector<SourceAdapter> sources() const;

  /// Creates or updates a patient object with medical data (staff) or social data (owner).
  std::uint64_t put_patient(std::string_view patient_id, const nlohmann::json& sections, const Session& writer);

  /// Each record is harmonized and merged into its implant's technical data;
  /// failures are collected per record.
  IngestReport ingest_producer_feed(std::string_view source, const nlohmann::json& records, const Session& producer);
  /// `timestamp,vital_name,value` rows. Throws NotFound, AccessDenied.
  VitalsReport ingest_vitals(std::string_view patient_id, std::string_view csv, const Session& session);

  /// Staff only; requires a cleared procurement gate. Throws AccessDenied,
  /// NotFound, DuplicateLink, ProcurementIncomplete.
  LinkResult link_implant(std::string_view udi, std::string_view patient_id, const nlohmann::json& surgery,
                          const Session& staff);

  /// UDI of the implant carrying this in-body marking. Throws NotFound.
  std::string resolve_marking(std::int32_t marking, const Principal& reader);

  /// Throws NotFound, AccessDenied.
  FederatedView federated_view(std::string_view key, const Principal& reader);
  /// Staff only. Blocked procurement yields warnings, not errors.
  SurgeonReport surgeon_report(std::string_view key, const Session& staff);

  /// Evaluates the patient's stored vitals for a responder.
  std::optional<access::EmergencyGrant> evaluate_emergency(std::string_view patient_id, const Session& responder);

  store::ExportResult export_anonymized(const store::MetadataFilter& filter, std::string_view pseudonym_key,
                                        const Session& caller);

  access::ChainVerification verify_audit() const { return audit_->verify(); }

  const Clock& clock() const noexcept { return clock_; }
  const EcosystemConfig& config() const noexcept { return config_; }
  access::AuditLog& audit() noexcept { return *audit_; }
  access::AccessController& access() noexcept { return *access_; }
  store::ObjectStore& store() noexcept { return *store_; }
  const access::CredentialDirectory& directory() const noexcept { return directory_; }

 private:
  /// Rejects unusable sessions with an audited denial.
  void require_session(const Session& s, access::AuditAction action, const std::string& ref);
  void require_role(const Session& s, access::Role role, access::AuditAction action, const std::string& ref);
  std::string resolve_home(std::string_view key) const;

  const Clock& clock_;
  EcosystemConfig config_;
  access::CredentialDirectory directory_;
  std::unique_ptr<access::AuditLog> audit_;
  std::unique_ptr<access::AccessController> access_;
  std::unique_ptr<store::ObjectStore> store_;
  mutable std::mutex sources_mutex_;
  std::map<std::string, SourceAdapter> sources_;
  /// Serializes read-modify-write operations on stored objects.
  std::mutex rmw_mutex_;
};

}  // namespace udi::federation
