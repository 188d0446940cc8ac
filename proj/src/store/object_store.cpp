#include "udi/store/object_store.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "udi/access/crypto.hpp"
#include "udi/core/udi.hpp"
#include "udi/error.hpp"

namespace udi::store {

using access::Action;
using access::Role;

namespace {

const std::vector<std::string> kDerivedKeys{"kind", "udi", "di", "lot", "serial", "manufacturer", "marking"};

std::vector<std::string> changed_fields(const nlohmann::json* before, const nlohmann::json* after) {
  std::set<std::string> keys;
  if (before) {
    for (const auto& [k, _] : before->items()) keys.insert(k);
  }
  if (after) {
    for (const auto& [k, _] : after->items()) keys.insert(k);
  }
  std::vector<std::string> out;
  for (const auto& k : keys) {
    const bool in_before = before && before->contains(k);
    const bool in_after = after && after->contains(k);
    if (in_before != in_after || (in_before && before->at(k) != after->at(k))) out.push_back(k);
  }
  return out;
}

const nlohmann::json* section_ptr(const DigitalObject& o, Section s) {
  const auto it = o.sections.find(s);
  return it == o.sections.end() ? nullptr : &it->second;
}

bool matches(const DigitalObject& o, const MetadataFilter& filter) {
  return std::all_of(filter.begin(), filter.end(), [&](const auto& clause) {
    const auto it = o.metadata.find(clause.first);
    return it != o.metadata.end() && it->second == clause.second;
  });
}

void drop_keys(nlohmann::json& j, const std::set<std::string>& keys) {
  if (j.is_object()) {
    for (const auto& k : keys) j.erase(k);
    for (auto& [_, v] : j.items()) drop_keys(v, keys);
  } else if (j.is_array()) {
    for (auto& v : j) drop_keys(v, keys);
  }
}

void scrub(nlohmann::json& j, const std::vector<std::string>& identifiers) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    for (const auto& id : identifiers) {
      if (s.find(id) != std::string::npos) {
        j = "[redacted]";
        return;
      }
    }
  } else if (j.is_object() || j.is_array()) {
    for (auto& v : j) scrub(v, identifiers);
  }
}

std::optional<int> age_years(const std::string& birthdate, Timestamp now) {
  if (birthdate.empty()) return std::nullopt;
  try {
    const auto born = core::parse_iso_date(birthdate);
    const std::chrono::year_month_day today{std::chrono::floor<std::chrono::days>(now)};
    int age = static_cast<int>(today.year()) - static_cast<int>(born.year());
    if (std::chrono::month_day{today.month(), today.day()} < std::chrono::month_day{born.month(), born.day()}) --age;
    return age;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::string ExportResult::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

void derive_metadata(DigitalObject& o) {
  for (const auto& k : kDerivedKeys) o.metadata.erase(k);
  o.metadata["kind"] = std::string(to_string(o.kind));
  if (o.kind == ObjectKind::patient && !o.metadata.contains("patient_id")) {
    fail(ErrorCode::InvalidInput, "patient object '" + o.object_id + "' lacks a patient_id");
  }
  if (o.kind != ObjectKind::implant) return;
  const nlohmann::json* t = section_ptr(o, Section::technical_focus);
  if (!t) return;
  if (t->contains("udi")) {
    const core::UdiRecord udi = core::parse_udi(t->at("udi").get<std::string>());
    o.metadata["udi"] = core::format_udi(udi);
    o.metadata["di"] = udi.device_identifier;
    o.metadata["lot"] = udi.lot;
    o.metadata["serial"] = udi.serial;
  }
  if (t->contains("manufacturer") && t->at("manufacturer").is_string()) {
    o.metadata["manufacturer"] = t->at("manufacturer").get<std::string>();
  }
  if (t->contains("marking_pharmacode") && t->at("marking_pharmacode").is_number_integer()) {
    o.metadata["marking"] = std::to_string(t->at("marking_pharmacode").get<std::int64_t>());
  }
}

access::Resource resource_for(const DigitalObject& o, Section section, std::vector<std::string> fields) {
  access::Resource r;
  r.section = section;
  if (const auto it = o.metadata.find("patient_id"); it != o.metadata.end()) r.patient_id = it->second;
  if (const auto it = o.metadata.find("manufacturer"); it != o.metadata.end()) r.manufacturer = it->second;
  r.fields = std::move(fields);
  r.object_ref = o.object_id;
  return r;
}

std::string pseudonym(std::string_view key, std::string_view identifier) {
  return "psn-" + access::hmac_sha256_hex(key, identifier).substr(0, 32);
}

bool lww_apply(std::map<std::string, DigitalObject>& state, const DigitalObject& incoming) {
  const auto it = state.find(incoming.object_id);
  if (it != state.end() && !lww_less(it->second, incoming)) return false;
  state[incoming.object_id] = incoming;
  return true;
}

ObjectStore::ObjectStore(access::AccessController& access, std::optional<std::filesystem::path> journal,
                         StoreConfig config)
    : access_(access), journal_path_(std::move(journal)), config_(std::move(config)) {
  if (!journal_path_ || !std::filesystem::exists(*journal_path_)) return;
  std::ifstream in(*journal_path_, std::ios::binary);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      lww_apply(objects_, object_from_json(j.at("object")));
    } catch (const std::exception& e) {
      fail(ErrorCode::InvalidInput, "journal line " + std::to_string(line_no) + ": " + e.what());
    }
    journal_ += line;
    journal_ += '\n';
  }
}

bool ObjectStore::merge_locked(const DigitalObject& o) { return lww_apply(objects_, o); }

bool ObjectStore::commit(const DigitalObject& object, std::string_view op) {
  std::lock_guard lock(mutex_);
  if (!merge_locked(object)) return false;
  const nlohmann::json line{{"op", op},
                            {"object", to_json(object)},
                            {"version", object.version},
                            {"writer", object.last_writer},
                            {"ts", to_unix(object.updated_at)}};
  const std::string text = line.dump() + "\n";
  if (journal_path_) {
    std::ofstream out(*journal_path_, std::ios::binary | std::ios::app);
    out << text;
    out.flush();
    if (!out) fail(ErrorCode::InvalidInput, "cannot append to journal " + journal_path_->string());
  }
  journal_ += text;
  return true;
}

std::uint64_t ObjectStore::put_object(DigitalObject obj, const access::Session& writer) {
  for (const auto& [s, payload] : obj.sections) validate_section(s, payload);
  derive_metadata(obj);

  const std::optional<DigitalObject> stored = peek(obj.object_id);
  if (stored && stored->kind != obj.kind) {
    fail(ErrorCode::InvalidInput, "object '" + obj.object_id + "' changes kind");
  }

  // Ownership comes from the stored object so a write cannot re-home it.
  DigitalObject owner = stored && !stored->deleted ? *stored : obj;
  if (stored && !stored->deleted) {
    for (const char* key : {"patient_id", "surgery_id"}) {
      if (const auto it = stored->metadata.find(key); it != stored->metadata.end()) obj.metadata[key] = it->second;
      else obj.metadata.erase(key);
    }
    const auto before = stored->metadata.find("manufacturer");
    const auto after = obj.metadata.find("manufacturer");
    if (before != stored->metadata.end() && (after == obj.metadata.end() || after->second != before->second)) {
      fail(ErrorCode::InvalidInput, "object '" + obj.object_id + "' cannot change manufacturer");
    }
  }

  std::vector<std::pair<Section, std::vector<std::string>>> writes;
  for (Section s : access::kAllSections) {
    const nlohmann::json* before = stored ? section_ptr(*stored, s) : nullptr;
    auto fields = changed_fields(before, section_ptr(obj, s));
    if (!fields.empty()) writes.emplace_back(s, std::move(fields));
  }
  if (writes.empty()) writes.emplace_back(primary_section(obj.kind), std::vector<std::string>{});
  for (const auto& [s, fields] : writes) {
    const access::Decision d = access_.decide(writer, Action::write, resource_for(owner, s, fields));
    if (!d.allowed) {
      throw Error(ErrorCode::AccessDenied, "write to " + std::string(access::to_string(s)) + " of '" + obj.object_id +
                                               "' denied: " + d.reason,
                  d.audit_seq);
    }
  }

  if (obj.sections.contains(Section::medical_focus)) {
    const bool medical_written = std::any_of(writes.begin(), writes.end(),
                                             [](const auto& w) { return w.first == Section::medical_focus; });
    if (medical_written) obj.sections[Section::medical_focus]["author"] = writer.subject_id;
  }
  if (obj.version == 0) obj.version = stored ? stored->version + 1 : 1;
  if (obj.updated_at == Timestamp{}) obj.updated_at = access_.clock().now();
  obj.last_writer = writer.subject_id;
  obj.deleted = false;

  if (!commit(obj, "put")) {
    if (const auto now = peek(obj.object_id); now && *now == obj) return obj.version;
    fail(ErrorCode::StaleWrite, "write of '" + obj.object_id + "' version " + std::to_string(obj.version) +
                                    " lost to the stored version");
  }
  return obj.version;
}

std::uint64_t ObjectStore::delete_object(const std::string& object_id, const access::Session& writer) {
  const std::optional<DigitalObject> stored = peek(object_id);
  if (!stored || stored->deleted) fail(ErrorCode::NotFound, "no object '" + object_id + "'");
  const access::Decision d =
      access_.decide(writer, Action::write, resource_for(*stored, primary_section(stored->kind)));
  if (!d.allowed) throw Error(ErrorCode::AccessDenied, "delete of '" + object_id + "' denied: " + d.reason, d.audit_seq);

  DigitalObject tomb = *stored;
  tomb.sections.clear();
  tomb.deleted = true;
  tomb.version = stored->version + 1;
  tomb.updated_at = access_.clock().now();
  tomb.last_writer = writer.subject_id;
  if (!commit(tomb, "delete")) fail(ErrorCode::StaleWrite, "concurrent write to '" + object_id + "'");
  return tomb.version;
}

DigitalObject ObjectStore::view_of(const DigitalObject& stored, const access::Principal& reader, bool throw_if_empty) {
  DigitalObject view = stored;
  view.sections.clear();
  std::vector<Section> present;
  for (const auto& [s, _] : stored.sections) present.push_back(s);
  if (present.empty()) present.push_back(primary_section(stored.kind));

  std::optional<access::Decision> last_denial;
  bool any = false;
  for (Section s : present) {
    const access::Decision d = access_.decide(reader, Action::read, resource_for(stored, s));
    if (d.allowed) {
      any = true;
      if (const auto it = stored.sections.find(s); it != stored.sections.end()) view.sections[s] = it->second;
    } else {
      last_denial = d;
    }
  }
  if (!any && throw_if_empty) {
    throw Error(ErrorCode::AccessDenied, "no readable section in '" + stored.object_id + "': " + last_denial->reason,
                last_denial->audit_seq);
  }
  if (!any) view.object_id.clear();
  return view;
}

DigitalObject ObjectStore::get_object(const std::string& object_id, const access::Principal& reader) {
  const std::optional<DigitalObject> stored = peek(object_id);
  if (!stored || stored->deleted) fail(ErrorCode::NotFound, "no object '" + object_id + "'");
  return view_of(*stored, reader, true);
}

std::vector<DigitalObject> ObjectStore::query_metadata(const MetadataFilter& filter, const access::Principal& reader) {
  std::vector<DigitalObject> out;
  for (const auto& o : snapshot()) {
    if (o.deleted || !matches(o, filter)) continue;
    DigitalObject v = view_of(o, reader, false);
    if (!v.object_id.empty()) out.push_back(std::move(v));
  }
  return out;
}

ExportResult ObjectStore::export_anonymized(const MetadataFilter& filter, std::string_view key,
                                            const access::Session& caller,
                                            const access::CredentialDirectory& directory) {
  if (key.empty()) fail(ErrorCode::InvalidInput, "pseudonym key must not be empty");
  const Timestamp now = access_.clock().now();
  const std::string ref = "export:" + nlohmann::json(filter).dump();
  if (!access_.verify(caller)) {
    const auto d = access_.record(caller, access::AuditAction::export_data, ref, false, "invalid session");
    throw Error(ErrorCode::InvalidSession, "session integrity check failed", d.audit_seq);
  }
  if (now >= caller.expires_at) {
    const auto d = access_.record(caller, access::AuditAction::export_data, ref, false, "session expired");
    throw Error(ErrorCode::ExpiredSession, "session expired", d.audit_seq);
  }
  if (caller.device_id || !config_.export_roles.contains(caller.role)) {
    const auto d = access_.record(caller, access::AuditAction::export_data, ref, false, "role lacks export capability");
    throw Error(ErrorCode::AccessDenied, "export requires an export-capable role", d.audit_seq);
  }

  std::vector<std::string> identifiers;
  for (auto& id : directory.direct_identifiers()) {
    if (id.size() >= 3) identifiers.push_back(std::move(id));
  }

  ExportResult result;
  for (const auto& o : snapshot()) {
    if (o.deleted || !matches(o, filter)) continue;
    nlohmann::json rec{{"record_id", pseudonym(key, "object:" + o.object_id)}, {"kind", to_string(o.kind)}};
    std::string birthdate;
    if (const auto it = o.metadata.find("patient_id"); it != o.metadata.end()) {
      rec["patient"] = pseudonym(key, "patient:" + it->second);
      if (const auto* c = directory.find_patient(it->second)) birthdate = c->birthdate;
    }
    nlohmann::json sections = nlohmann::json::object();
    for (const auto& [s, payload] : o.sections) {
      nlohmann::json copy = payload;
      if (s == Section::medical_focus) {
        if (birthdate.empty() && copy.contains("demographics") && copy["demographics"].is_object()) {
          birthdate = copy["demographics"].value("birthdate", "");
        }
        drop_keys(copy, {"demographics", "author"});
      }
      if (s == Section::technical_focus && copy.contains("udi")) {
        // The serial number is a direct device identifier; keep only the model.
        try {
          copy["device_identifier"] = core::parse_udi(copy["udi"].get<std::string>()).device_identifier;
        } catch (const std::exception&) {
        }
        copy.erase("udi");
      }
      sections[std::string(access::to_string(s))] = std::move(copy);
    }
    rec["sections"] = std::move(sections);
    if (const auto age = age_years(birthdate, now)) {
      const int lo = (*age / config_.age_bucket_years) * config_.age_bucket_years;
      rec["age_bucket"] = std::to_string(lo) + "-" + std::to_string(lo + config_.age_bucket_years - 1);
    }
    scrub(rec, identifiers);
    if (const auto it = o.metadata.find("serial"); it != o.metadata.end() && it->second.size() >= 3) {
      scrub(rec, {it->second});
    }
    result.records.push_back(std::move(rec));
  }
  result.audit_seq = access_.record(caller, access::AuditAction::export_data, ref, true,
                                    std::to_string(result.records.size()) + " records")
                         .audit_seq;
  return result;
}

std::optional<DigitalObject> ObjectStore::peek(const std::string& object_id) const {
  std::lock_guard lock(mutex_);
  const auto it = objects_.find(object_id);
  if (it == objects_.end()) return std::nullopt;
  return it->second;
}

std::vector<DigitalObject> ObjectStore::snapshot() const {
  std::lock_guard lock(mutex_);
  std::vector<DigitalObject> out;
  out.reserve(objects_.size());
  for (const auto& [_, o] : objects_) out.push_back(o);
  return out;
}

std::string ObjectStore::journal_text() const {
  std::lock_guard lock(mutex_);
  return journal_;
}

}  // namespace udi::store
