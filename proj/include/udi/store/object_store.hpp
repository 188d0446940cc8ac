#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "udi/access/directory.hpp"
#include "udi/access/policy.hpp"
#include "udi/store/schema.hpp"

namespace udi::store {

using MetadataFilter = std::map<std::string, std::string>;

struct StoreConfig {
  std::set<access::Role> export_roles{access::Role::medical_staff};
  int age_bucket_years = 5;
};

struct ExportResult {
  std::vector<nlohmann::json> records;
  std::uint64_t audit_seq = 0;

  /// One record per line, sorted keys.
  std::string to_jsonl() const;
};

/// Fills kind-derived metadata: `kind`; for implants `udi`, `di`, `lot`,
/// `serial`, `manufacturer` and `marking` from the technical section.
/// Throws InvalidInput (patient without patient_id) and UDI parse errors.
void derive_metadata(DigitalObject& object);

/// Ownership attributes used for an access decision on one section.
access::Resource resource_for(const DigitalObject& object, Section section, std::vector<std::string> fields = {});

/// Keyed-hash pseudonym of an identifier.
std::string pseudonym(std::string_view key, std::string_view identifier);

/// Versioned object storage with last-writer-wins merge and a JSON Lines
/// journal replayed on construction. Writes are serialized; reads copy out a
/// consistent snapshot.
class ObjectStore {
 public:
  ObjectStore(access::AccessController& access, std::optional<std::filesystem::path> journal = std::nullopt,
              StoreConfig config = {});

  /// Authorizes every changed section, stamps writer/author/timestamp and a
  /// version (0 means next), then merges. Throws AccessDenied, StaleWrite.
  std::uint64_t put_object(DigitalObject object, const access::Session& writer);
  /// Writes a tombstone. Throws NotFound, AccessDenied.
  std::uint64_t delete_object(const std::string& object_id, const access::Session& writer);

  /// Section-filtered view. Throws NotFound, AccessDenied.
  DigitalObject get_object(const std::string& object_id, const access::Principal& reader);
  /// Readable objects matching every clause, ordered by object id.
  std::vector<DigitalObject> query_metadata(const MetadataFilter& filter, const access::Principal& reader);

  /// Anonymized dataset of matching objects. Audited once as an export.
  /// Throws AccessDenied, InvalidSession, ExpiredSession.
  ExportResult export_anonymized(const MetadataFilter& filter, std::string_view pseudonym_key,
                                 const access::Session& caller, const access::CredentialDirectory& directory);

  /// Unchecked merge for trusted internal paths and replication. Returns
  /// whether the object won and was journaled under `op`.
  bool commit(const DigitalObject& object, std::string_view op);

  std::optional<DigitalObject> peek(const std::string& object_id) const;
  /// Every object including tombstones, ordered by id.
  std::vector<DigitalObject> snapshot() const;
  std::string journal_text() const;
  access::AccessController& access() noexcept { return access_; }
  const StoreConfig& config() const noexcept { return config_; }

 private:
  bool merge_locked(const DigitalObject& object);
  DigitalObject view_of(const DigitalObject& stored, const access::Principal& reader, bool throw_if_empty);

  access::AccessController& access_;
  std::optional<std::filesystem::path> journal_path_;
  StoreConfig config_;
  mutable std::mutex mutex_;
  std::map<std::string, DigitalObject> objects_;
  std::string journal_;
};

/// Merges `incoming` into `state` by last-writer-wins; true if it won.
bool lww_apply(std::map<std::string, DigitalObject>& state, const DigitalObject& incoming);

}  // namespace udi::store
