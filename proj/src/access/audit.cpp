#include "udi/access/audit.hpp"

#include <fstream>
#include <sstream>

#include "udi/access/crypto.hpp"
#include "udi/error.hpp"

namespace udi::access {

namespace {

nlohmann::json body_json(const AuditEntry& e) {
  return {{"seq", e.seq},
          {"timestamp", to_unix(e.timestamp)},
          {"subject_id", e.subject_id},
          {"role", e.role},
          {"action", to_string(e.action)},
          {"resource", e.resource},
          {"decision", e.allowed ? "allow" : "deny"},
          {"reason", e.reason},
          {"prev_hash", e.prev_hash}};
}

AuditEntry entry_from_json(const nlohmann::json& j) {
  AuditEntry e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.timestamp = from_unix(j.at("timestamp").get<std::int64_t>());
  e.subject_id = j.at("subject_id").get<std::string>();
  e.role = j.at("role").get<std::string>();
  e.action = audit_action_from_string(j.at("action").get<std::string>());
  e.resource = j.at("resource").get<std::string>();
  const auto decision = j.at("decision").get<std::string>();
  if (decision != "allow" && decision != "deny") fail(ErrorCode::InvalidInput, "bad decision");
  e.allowed = decision == "allow";
  e.reason = j.at("reason").get<std::string>();
  e.prev_hash = j.at("prev_hash").get<std::string>();
  e.entry_hash = j.at("entry_hash").get<std::string>();
  if (j.size() != 10) fail(ErrorCode::InvalidInput, "unexpected fields");
  return e;
}

}  // namespace

nlohmann::json to_json(const AuditEntry& e) {
  nlohmann::json j = body_json(e);
  j["entry_hash"] = e.entry_hash;
  return j;
}

std::string canonical_line(const AuditEntry& e) { return to_json(e).dump(); }

std::string compute_entry_hash(const AuditEntry& e) { return sha256_hex(body_json(e).dump()); }

ChainVerification verify_audit_chain(std::string_view persisted) {
  ChainVerification result;
  std::string prev = kGenesisHash;
  std::uint64_t expected_seq = 1;
  std::size_t pos = 0;
  const auto broken = [&](std::string reason) {
    result.ok = false;
    result.broken_seq = expected_seq;
    result.reason = std::move(reason);
    return result;
  };
  while (pos < persisted.size()) {
    const std::size_t nl = persisted.find('\n', pos);
    if (nl == std::string_view::npos) return broken("unterminated final line");
    const std::string_view line = persisted.substr(pos, nl - pos);
    pos = nl + 1;

    AuditEntry e;
    try {
      e = entry_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& ex) {
      return broken(std::string("unparseable entry: ") + ex.what());
    }
    if (canonical_line(e) != line) return broken("entry is not in canonical form");
    if (e.seq != expected_seq) return broken("sequence gap");
    if (e.prev_hash != prev) return broken("prev_hash does not match the preceding entry");
    if (!digest_equal(e.entry_hash, compute_entry_hash(e))) return broken("entry_hash mismatch");
    prev = e.entry_hash;
    ++expected_seq;
    ++result.entries;
  }
  return result;
}

AuditLog::AuditLog(const Clock& clock, std::optional<std::filesystem::path> file)
    : clock_(clock), file_(std::move(file)) {
  if (!file_ || !std::filesystem::exists(*file_)) return;
  std::ifstream in(*file_, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const ChainVerification v = verify_audit_chain(text);
  if (!v.ok) {
    throw Error(ErrorCode::ChainBroken, "audit log " + file_->string() + " broken at seq " +
                                            std::to_string(*v.broken_seq) + ": " + v.reason);
  }
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) entries_.push_back(entry_from_json(nlohmann::json::parse(line)));
}

AuditEntry AuditLog::append(const AuditRecord& r) {
  std::lock_guard lock(mutex_);
  AuditEntry e;
  e.seq = entries_.size() + 1;
  e.timestamp = clock_.now();
  e.subject_id = r.subject_id;
  e.role = r.role;
  e.action = r.action;
  e.resource = r.resource;
  e.allowed = r.allowed;
  e.reason = r.reason;
  e.prev_hash = entries_.empty() ? kGenesisHash : entries_.back().entry_hash;
  e.entry_hash = compute_entry_hash(e);
  if (file_) {
    std::ofstream out(*file_, std::ios::binary | std::ios::app);
    out << canonical_line(e) << '\n';
    out.flush();
    if (!out) fail(ErrorCode::InvalidInput, "cannot append to audit log " + file_->string());
  }
  entries_.push_back(e);
  return e;
}

std::vector<AuditEntry> AuditLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::string AuditLog::head_hash() const {
  std::lock_guard lock(mutex_);
  return entries_.empty() ? kGenesisHash : entries_.back().entry_hash;
}

std::string AuditLog::serialize() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& e : entries_) {
    out += canonical_line(e);
    out += '\n';
  }
  return out;
}

ChainVerification AuditLog::verify() const {
  if (file_ && std::filesystem::exists(*file_)) {
    std::lock_guard lock(mutex_);
    std::ifstream in(*file_, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return verify_audit_chain(buf.str());
  }
  return verify_audit_chain(serialize());
}

}  // namespace udi::access
