#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "udi/access/model.hpp"
#include "udi/clock.hpp"

namespace udi::access {

inline const std::string kGenesisHash(64, '0');

struct AuditEntry {
  std::uint64_t seq = 0;
  Timestamp timestamp{};
  std::string subject_id;
  std::string role;
  AuditAction action = AuditAction::read;
  std::string resource;
  bool allowed = false;
  std::string reason;
  std::string prev_hash;
  std::string entry_hash;

  bool operator==(const AuditEntry&) const = default;
};

/// The fields a caller supplies; seq, timestamp and hashes are assigned on append.
struct AuditRecord {
  std::string subject_id;
  std::string role;
  AuditAction action = AuditAction::read;
  std::string resource;
  bool allowed = false;
  std::string reason;
};

nlohmann::json to_json(const AuditEntry& e);
/// Persisted form: sorted keys, compact, no trailing newline.
std::string canonical_line(const AuditEntry& e);
/// Digest over every field except entry_hash.
std::string compute_entry_hash(const AuditEntry& e);

struct ChainVerification {
  bool ok = true;
  std::size_t entries = 0;
  std::optional<std::uint64_t> broken_seq;
  std::string reason;
};

/// Recomputes every link of a persisted JSON Lines log.
ChainVerification verify_audit_chain(std::string_view persisted);

/// Append-only hash-chained log. Appends are serialized; an optional file
/// receives each line as it is written.
class AuditLog {
 public:
  AuditLog(const Clock& clock, std::optional<std::filesystem::path> file = std::nullopt);

  AuditEntry append(const AuditRecord& record);

  std::vector<AuditEntry> entries() const;
  std::size_t size() const;
  std::string head_hash() const;
  /// The exact bytes that are (or would be) persisted.
  std::string serialize() const;
  /// Verifies the persisted file if there is one, else the in-memory form.
  ChainVerification verify() const;
  const std::optional<std::filesystem::path>& file() const noexcept { return file_; }

 private:
  const Clock& clock_;
  std::optional<std::filesystem::path> file_;
  mutable std::mutex mutex_;
  std::vector<AuditEntry> entries_;
};

}  // namespace udi::access
