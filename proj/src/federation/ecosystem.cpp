#include "udi/federation/ecosystem.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "udi/access/crypto.hpp"
#include "udi/core/udi.hpp"
#include "udi/error.hpp"

namespace udi::federation {

using access::Action;
using access::AuditAction;
using access::Role;
using access::Section;
using store::DigitalObject;
using store::ObjectKind;

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

nlohmann::json section_or_null(const DigitalObject& o, Section s) {
  const auto it = o.sections.find(s);
  return it == o.sections.end() ? nlohmann::json(nullptr) : it->second;
}

std::string meta(const DigitalObject& o, const std::string& key) {
  const auto it = o.metadata.find(key);
  return it == o.metadata.end() ? std::string() : it->second;
}

}  // namespace

std::string_view to_string(SourceKind k) noexcept {
  switch (k) {
    case SourceKind::producer_feed:
      return "producer_feed";
    case SourceKind::vitals_stream:
      return "vitals_stream";
    case SourceKind::his_query:
      return "his_query";
  }
  return "unknown";
}

SourceKind source_kind_from_string(std::string_view s) {
  if (s == "producer_feed") return SourceKind::producer_feed;
  if (s == "vitals_stream") return SourceKind::vitals_stream;
  if (s == "his_query") return SourceKind::his_query;
  fail(ErrorCode::InvalidInput, "unknown source kind '" + std::string(s) + "'");
}

nlohmann::json to_json(const SourceAdapter& a) {
  return {{"source_name", a.source_name},
          {"kind", to_string(a.kind)},
          {"mapping", store::to_json(a.mapping)},
          {"enabled", a.enabled}};
}

SourceAdapter source_from_json(const nlohmann::json& j) {
  try {
    SourceAdapter a;
    a.source_name = j.at("source_name").get<std::string>();
    a.kind = source_kind_from_string(j.at("kind").get<std::string>());
    a.mapping = store::mapping_from_json(j.at("mapping"));
    a.enabled = j.value("enabled", true);
    return a;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidMapping, std::string("malformed source adapter: ") + e.what());
  }
}

EcosystemConfig EcosystemConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"server_key",    "admin_secret",     "store_dir",     "directory_file",
                                           "host",          "port",             "session_ttl_s", "emergency_policy",
                                           "access_matrix", "export_roles",     "age_bucket_years"};
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "config must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!known.contains(k)) fail(ErrorCode::InvalidInput, "unknown config key '" + k + "'");
  }
  EcosystemConfig c;
  try {
    c.server_key = j.value("server_key", c.server_key);
    c.admin_secret = j.value("admin_secret", c.admin_secret);
    if (j.contains("store_dir")) c.store_dir = j.at("store_dir").get<std::string>();
    if (j.contains("directory_file")) c.directory_file = j.at("directory_file").get<std::string>();
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.session_ttl = Seconds{j.value("session_ttl_s", c.session_ttl.count())};
    if (j.contains("emergency_policy")) c.emergency_policy = access::emergency_policy_from_json(j.at("emergency_policy"));
    if (j.contains("access_matrix")) c.matrix = access::AccessMatrix::from_json(j.at("access_matrix"));
    if (j.contains("export_roles")) {
      c.export_roles.clear();
      for (const auto& r : j.at("export_roles")) c.export_roles.insert(access::role_from_string(r.get<std::string>()));
    }
    c.age_bucket_years = j.value("age_bucket_years", c.age_bucket_years);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("malformed config: ") + e.what());
  }
  if (c.port < 0 || c.port > 65535) fail(ErrorCode::InvalidInput, "port out of range");
  if (c.session_ttl.count() <= 0) fail(ErrorCode::InvalidInput, "session_ttl_s must be positive");
  if (c.age_bucket_years < 1) fail(ErrorCode::InvalidInput, "age_bucket_years must be positive");
  if (c.server_key.empty()) fail(ErrorCode::InvalidInput, "server_key must not be empty");
  return c;
}

EcosystemConfig EcosystemConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::InvalidInput, "cannot open config " + file.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::InvalidInput, std::string("config is not JSON: ") + e.what());
  }
}

void EcosystemConfig::apply_environment() {
  const auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("UDI_PORT")) {
    const auto p = parse_number<int>(*v);
    if (!p || *p < 0 || *p > 65535) fail(ErrorCode::InvalidInput, "UDI_PORT is not a port number");
    port = *p;
  }
  if (auto v = env("UDI_HOST")) host = *v;
  if (auto v = env("UDI_STORE_DIR")) store_dir = *v;
  if (auto v = env("UDI_SERVER_KEY")) server_key = *v;
  if (auto v = env("UDI_ADMIN_SECRET")) admin_secret = *v;
  if (auto v = env("UDI_EMERGENCY_POLICY")) {
    std::string text = *v;
    if (!text.empty() && text.front() != '{') {
      std::ifstream in(text);
      if (!in) fail(ErrorCode::InvalidInput, "cannot open emergency policy " + text);
      text.assign(std::istreambuf_iterator<char>(in), {});
    }
    try {
      emergency_policy = access::emergency_policy_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::InvalidInput, std::string("UDI_EMERGENCY_POLICY is not JSON: ") + e.what());
    }
  }
}

std::size_t IngestReport::applied() const {
  return static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [](const auto& r) { return r.ok; }));
}
std::size_t IngestReport::failed() const { return results.size() - applied(); }

nlohmann::json IngestReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json j{{"index", r.index}, {"ok", r.ok}, {"object_id", r.object_id}};
    if (!r.ok) {
      j["error"] = r.error;
      j["message"] = r.message;
    }
    if (r.audit_seq) j["audit_seq"] = *r.audit_seq;
    if (r.procurement_cleared) j["procurement"] = *r.procurement_cleared ? "cleared" : "blocked";
    arr.push_back(std::move(j));
  }
  return {{"applied", applied()}, {"failed", failed()}, {"results", arr}};
}

nlohmann::json VitalsReport::to_json() const {
  nlohmann::json errs = nlohmann::json::array();
  for (const auto& e : errors) errs.push_back({{"line", e.line}, {"reason", e.reason}});
  return {{"accepted", accepted}, {"errors", errs}, {"audit_seq", audit_seq}};
}

nlohmann::json FederatedView::to_json() const {
  return {{"key", key},
          {"patient", patient},
          {"implants", implants},
          {"surgeries", surgeries},
          {"vitals_summary", vitals_summary},
          {"assembled_at", to_unix(assembled_at)}};
}

nlohmann::json summarize_vitals(const nlohmann::json& series) {
  nlohmann::json out = nlohmann::json::object();
  if (!series.is_array()) return out;
  for (const auto& obs : series) {
    const std::string name = obs.at("vital").get<std::string>();
    const double value = obs.at("value").get<double>();
    const std::int64_t ts = obs.at("ts").get<std::int64_t>();
    auto& s = out[name];
    if (s.is_null()) {
      s = {{"count", 0}, {"min", value}, {"max", value}, {"latest", {{"ts", ts}, {"value", value}}}};
    }
    s["count"] = s["count"].get<int>() + 1;
    s["min"] = std::min(s["min"].get<double>(), value);
    s["max"] = std::max(s["max"].get<double>(), value);
    if (ts >= s["latest"]["ts"].get<std::int64_t>()) s["latest"] = {{"ts", ts}, {"value", value}};
  }
  return out;
}

std::string patient_object_id(std::string_view patient_id) { return "patient:" + std::string(patient_id); }

std::string implant_object_id(std::string_view di, std::string_view serial) {
  return "implant:" + std::string(di) + ":" + std::string(serial);
}

Ecosystem::Ecosystem(const Clock& clock, EcosystemConfig config, access::CredentialDirectory directory)
    : clock_(clock), config_(std::move(config)), directory_(std::move(directory)) {
  std::optional<std::filesystem::path> audit_file;
  std::optional<std::filesystem::path> journal_file;
  if (config_.store_dir) {
    std::filesystem::create_directories(*config_.store_dir);
    audit_file = *config_.store_dir / "audit.jsonl";
    journal_file = *config_.store_dir / "journal.jsonl";
  }
  audit_ = std::make_unique<access::AuditLog>(clock_, audit_file);
  access::AccessConfig ac;
  ac.session_ttl = config_.session_ttl;
  access_ = std::make_unique<access::AccessController>(clock_, config_.server_key, *audit_, config_.matrix, ac);
  store::StoreConfig sc;
  sc.export_roles = config_.export_roles;
  sc.age_bucket_years = config_.age_bucket_years;
  store_ = std::make_unique<store::ObjectStore>(*access_, journal_file, sc);
}

Session Ecosystem::authenticate(std::string_view subject_id, std::string_view secret) {
  return access_->authenticate(directory_, subject_id, secret);
}

Session Ecosystem::device_capability(const Session& owner, std::string device_id) {
  return access_->issue_device_capability(owner, std::move(device_id));
}

void Ecosystem::require_session(const Session& s, AuditAction action, const std::string& ref) {
  if (!access_->verify(s)) {
    const auto d = access_->record(s, action, ref, false, "invalid session");
    throw Error(ErrorCode::InvalidSession, "session integrity check failed", d.audit_seq);
  }
  if (clock_.now() >= s.expires_at) {
    const auto d = access_->record(s, action, ref, false, "session expired");
    throw Error(ErrorCode::ExpiredSession, "session expired", d.audit_seq);
  }
}

void Ecosystem::require_role(const Session& s, Role role, AuditAction action, const std::string& ref) {
  require_session(s, action, ref);
  if (s.role != role || s.device_id) {
    const auto d = access_->record(s, action, ref, false, "requires role " + std::string(access::to_string(role)));
    throw Error(ErrorCode::AccessDenied, "operation requires role " + std::string(access::to_string(role)), d.audit_seq);
  }
}

void Ecosystem::register_source(SourceAdapter adapter, std::string_view admin_secret) {
  if (!access::digest_equal(access::sha256_hex(admin_secret), access::sha256_hex(config_.admin_secret))) {
    fail(ErrorCode::AccessDenied, "admin credential rejected");
  }
  store::validate(adapter.mapping);
  if (adapter.kind == SourceKind::producer_feed && adapter.mapping.section != Section::technical_focus) {
    fail(ErrorCode::InvalidMapping, "producer feeds map into technical_focus");
  }
  if (adapter.kind == SourceKind::vitals_stream && adapter.mapping.section != Section::social_focus) {
    fail(ErrorCode::InvalidMapping, "vitals streams map into social_focus");
  }
  std::lock_guard lock(sources_mutex_);
  if (const auto it = sources_.find(adapter.source_name); it != sources_.end()) {
    if (to_json(it->second) == to_json(adapter)) return;
    fail(ErrorCode::DuplicateSource, "source '" + adapter.source_name + "' is already registered");
  }
  sources_.emplace(adapter.source_name, std::move(adapter));
}

std::vector<SourceAdapter> Ecosystem::sources() const {
  std::lock_guard lock(sources_mutex_);
  std::vector<SourceAdapter> out;
  for (const auto& [_, a] : sources_) out.push_back(a);
  return out;
}

std::uint64_t Ecosystem::put_patient(std::string_view patient_id, const nlohmann::json& sections, const Session& writer) {
  if (patient_id.empty()) fail(ErrorCode::InvalidInput, "empty patient id");
  if (!sections.is_object()) fail(ErrorCode::InvalidInput, "sections must be an object");
  std::lock_guard lock(rmw_mutex_);
  const std::string id = patient_object_id(patient_id);
  DigitalObject obj;
  if (auto stored = store_->peek(id); stored && !stored->deleted) obj = std::move(*stored);
  obj.object_id = id;
  obj.kind = ObjectKind::patient;
  obj.metadata["patient_id"] = std::string(patient_id);
  for (const auto& [name, payload] : sections.items()) {
    const Section s = access::section_from_string(name);
    if (!payload.is_object()) fail(ErrorCode::InvalidInput, name + " must be an object");
    auto& target = obj.sections[s];
    if (!target.is_object()) target = nlohmann::json::object();
    for (const auto& [k, v] : payload.items()) target[k] = v;
  }
  obj.version = 0;
  obj.updated_at = {};
  return store_->put_object(std::move(obj), writer);
}

IngestReport Ecosystem::ingest_producer_feed(std::string_view source, const nlohmann::json& records,
                                             const Session& producer) {
  std::optional<SourceAdapter> adapter;
  {
    std::lock_guard lock(sources_mutex_);
    if (const auto it = sources_.find(std::string(source)); it != sources_.end()) adapter = it->second;
  }
  if (!adapter) fail(ErrorCode::NotFound, "no source '" + std::string(source) + "'");
  if (adapter->kind != SourceKind::producer_feed || !adapter->enabled) {
    fail(ErrorCode::InvalidInput, "source '" + std::string(source) + "' is not an enabled producer feed");
  }
  if (!records.is_array()) fail(ErrorCode::InvalidInput, "producer feed must be a JSON array");
  require_role(producer, Role::producer, AuditAction::write, "source:" + adapter->source_name);

  IngestReport report;
  std::lock_guard lock(rmw_mutex_);
  for (std::size_t i = 0; i < records.size(); ++i) {
    RecordResult r;
    r.index = i;
    try {
      const nlohmann::json technical = store::harmonize(records[i], adapter->mapping);
      if (!technical.contains("udi") || !technical.at("udi").is_string()) {
        fail(ErrorCode::MissingRequiredField, "record lacks a udi");
      }
      const core::UdiRecord udi = core::parse_udi(technical.at("udi").get<std::string>());
      r.object_id = implant_object_id(udi.device_identifier, udi.serial);

      DigitalObject obj;
      if (auto stored = store_->peek(r.object_id); stored && !stored->deleted) obj = std::move(*stored);
      obj.object_id = r.object_id;
      obj.kind = ObjectKind::implant;
      auto& t = obj.sections[Section::technical_focus];
      if (!t.is_object()) t = nlohmann::json::object();
      for (const auto& [k, v] : technical.items()) t[k] = v;
      obj.version = 0;
      obj.updated_at = {};
      store_->put_object(obj, producer);
      r.ok = true;
      r.procurement_cleared = access::procurement_status(t).cleared;
    } catch (const Error& e) {
      r.ok = false;
      r.error = std::string(to_string(e.code()));
      r.message = e.what();
      r.audit_seq = e.audit_seq();
    } catch (const nlohmann::json::exception& e) {
      r.ok = false;
      r.error = std::string(to_string(ErrorCode::InvalidInput));
      r.message = e.what();
    }
    report.results.push_back(std::move(r));
  }
  return report;
}

VitalsReport Ecosystem::ingest_vitals(std::string_view patient_id, std::string_view csv, const Session& session) {
  std::lock_guard lock(rmw_mutex_);
  const std::string id = patient_object_id(patient_id);
  auto stored = store_->peek(id);
  if (!stored || stored->deleted) fail(ErrorCode::NotFound, "no patient '" + std::string(patient_id) + "'");

  const access::Decision d =
      access_->decide(session, Action::write, store::resource_for(*stored, Section::social_focus, {"vitals"}));
  if (!d.allowed) throw Error(ErrorCode::AccessDenied, "vitals upload denied: " + d.reason, d.audit_seq);

  VitalsReport report;
  report.audit_seq = d.audit_seq;
  const auto& names = store::vital_names();
  nlohmann::json rows = nlohmann::json::array();
  std::size_t line_no = 0;
  for (std::string_view raw : split(csv, '\n')) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line_no == 1 && (line == "timestamp,vital_name,value" || line == "ts,name,value")) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 3) {
      report.errors.push_back({line_no, "expected 3 columns"});
      continue;
    }
    const auto ts = parse_number<std::int64_t>(trim(cols[0]));
    const std::string name(trim(cols[1]));
    const auto value = parse_number<double>(trim(cols[2]));
    if (!ts) {
      report.errors.push_back({line_no, "timestamp is not an integer"});
    } else if (std::find(names.begin(), names.end(), name) == names.end()) {
      report.errors.push_back({line_no, "unknown vital '" + name + "'"});
    } else if (!value || !std::isfinite(*value)) {
      report.errors.push_back({line_no, "value is not a finite number"});
    } else {
      rows.push_back({{"ts", *ts}, {"vital", name}, {"value", *value}});
    }
  }
  report.accepted = rows.size();
  if (rows.empty()) return report;

  DigitalObject obj = std::move(*stored);
  auto& social = obj.sections[Section::social_focus];
  if (!social.is_object()) social = nlohmann::json::object();
  auto& series = social["vitals"];
  if (!series.is_array()) series = nlohmann::json::array();
  for (auto& r : rows) series.push_back(std::move(r));
  std::stable_sort(series.begin(), series.end(),
                   [](const nlohmann::json& a, const nlohmann::json& b) { return a.at("ts") < b.at("ts"); });
  obj.version += 1;
  obj.updated_at = clock_.now();
  obj.last_writer = session.subject_id;
  if (!store_->commit(obj, "put")) fail(ErrorCode::StaleWrite, "concurrent write to '" + id + "'");
  return report;
}

LinkResult Ecosystem::link_implant(std::string_view udi_text, std::string_view patient_id, const nlohmann::json& surgery,
                                   const Session& staff) {
  std::lock_guard lock(rmw_mutex_);
  const std::string pid(patient_id);
  std::string ref = "link:" + std::string(udi_text) + "->" + pid;
  require_role(staff, Role::medical_staff, AuditAction::link, ref);

  const auto denied = [&](ErrorCode code, const std::string& reason) {
    const auto d = access_->record(staff, AuditAction::link, ref, false, reason);
    throw Error(code, reason, d.audit_seq);
  };

  std::optional<core::UdiRecord> udi;
  try {
    udi = core::parse_udi(udi_text);
  } catch (const Error& e) {
    denied(e.code(), e.what());
  }
  const std::string implant_id = implant_object_id(udi->device_identifier, udi->serial);
  ref = "link:" + implant_id + "->" + patient_object_id(pid);
  auto implant = store_->peek(implant_id);
  if (!implant || implant->deleted) denied(ErrorCode::NotFound, "no implant " + implant_id);
  auto patient = store_->peek(patient_object_id(pid));
  if (!patient || patient->deleted) denied(ErrorCode::NotFound, "no patient " + pid);
  if (implant->metadata.contains("patient_id")) {
    denied(ErrorCode::DuplicateLink, "serial " + udi->serial + " is already linked to a patient");
  }
  const auto gate = access::procurement_status(section_or_null(*implant, Section::technical_focus));
  if (!gate.cleared) {
    std::string missing;
    for (const auto& m : gate.missing) missing += (missing.empty() ? "" : ",") + m;
    denied(ErrorCode::ProcurementIncomplete, "procurement blocked, missing " + missing);
  }
  if (!surgery.is_null() && !surgery.is_object()) denied(ErrorCode::InvalidInput, "surgery must be an object");

  const auto seq = access_->record(staff, AuditAction::link, ref, true, "procurement cleared").audit_seq;
  const Timestamp now = clock_.now();

  std::size_t existing = 0;
  for (const auto& o : store_->snapshot()) {
    if (o.kind == ObjectKind::surgery && meta(o, "patient_id") == pid) ++existing;
  }
  const std::string surgery_id = "surgery:" + pid + ":" + std::to_string(existing + 1);
  nlohmann::json medical = surgery.is_object() ? surgery : nlohmann::json::object();
  store::validate_section(Section::medical_focus, medical);
  medical["author"] = staff.subject_id;

  DigitalObject s;
  s.object_id = surgery_id;
  s.kind = ObjectKind::surgery;
  s.metadata = {{"kind", "surgery"}, {"patient_id", pid}, {"udi", core::format_udi(*udi)}};
  s.sections[Section::medical_focus] = medical;
  s.version = 1;
  s.last_writer = staff.subject_id;
  s.updated_at = now;
  store_->commit(s, "link");

  implant->metadata["patient_id"] = pid;
  implant->metadata["surgery_id"] = surgery_id;
  implant->version += 1;
  implant->last_writer = staff.subject_id;
  implant->updated_at = now;
  store_->commit(*implant, "link");

  auto& pm = patient->sections[Section::medical_focus];
  if (!pm.is_object()) pm = nlohmann::json::object();
  auto& list = pm["surgeries"];
  if (!list.is_array()) list = nlohmann::json::array();
  nlohmann::json entry{{"surgery_id", surgery_id}, {"udi", core::format_udi(*udi)}, {"author", staff.subject_id}};
  for (const char* k : {"procedure", "surgery_date"}) {
    if (medical.contains(k)) entry[k] = medical[k];
  }
  list.push_back(std::move(entry));
  pm["author"] = staff.subject_id;
  patient->version += 1;
  patient->last_writer = staff.subject_id;
  patient->updated_at = now;
  store_->commit(*patient, "link");

  return {surgery_id, seq};
}

std::string Ecosystem::resolve_marking(std::int32_t marking, const Principal& reader) {
  const auto hits = store_->query_metadata({{"kind", "implant"}, {"marking", std::to_string(marking)}}, reader);
  if (hits.empty()) fail(ErrorCode::NotFound, "no readable implant carries marking " + std::to_string(marking));
  if (hits.size() > 1) fail(ErrorCode::InvalidInput, "marking " + std::to_string(marking) + " is ambiguous");
  return meta(hits.front(), "udi");
}

std::string Ecosystem::resolve_home(std::string_view key) const {
  if (key.starts_with("patient:") || key.starts_with("implant:")) return std::string(key);
  if (const auto p = store_->peek(patient_object_id(key)); p && !p->deleted) return p->object_id;
  try {
    const core::UdiRecord udi = core::parse_udi(key);
    return implant_object_id(udi.device_identifier, udi.serial);
  } catch (const Error&) {
    fail(ErrorCode::NotFound, "key '" + std::string(key) + "' is neither a patient nor a UDI");
  }
}

FederatedView Ecosystem::federated_view(std::string_view key, const Principal& reader) {
  const DigitalObject home = store_->get_object(resolve_home(key), reader);
  FederatedView view;
  view.key = std::string(key);
  view.patient = nullptr;
  view.vitals_summary = nullptr;
  view.assembled_at = clock_.now();

  const auto implant_json = [](const DigitalObject& o) {
    return nlohmann::json{{"object_id", o.object_id},
                          {"udi", meta(o, "udi")},
                          {"patient_id", meta(o, "patient_id")},
                          {"technical", section_or_null(o, Section::technical_focus)}};
  };

  const std::string pid = meta(home, "patient_id");
  std::optional<DigitalObject> patient;
  if (home.kind == ObjectKind::patient) {
    patient = home;
  } else if (!pid.empty()) {
    try {
      patient = store_->get_object(patient_object_id(pid), reader);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AccessDenied && e.code() != ErrorCode::NotFound) throw;
    }
  }
  if (patient) {
    view.patient = {{"patient_id", meta(*patient, "patient_id")},
                    {"medical", section_or_null(*patient, Section::medical_focus)},
                    {"social", section_or_null(*patient, Section::social_focus)}};
    const auto social = patient->sections.find(Section::social_focus);
    if (social != patient->sections.end()) view.vitals_summary = summarize_vitals(social->second.value("vitals", nlohmann::json()));
  }

  if (pid.empty()) {
    if (home.kind == ObjectKind::implant) view.implants.push_back(implant_json(home));
    return view;
  }
  for (const auto& o : store_->query_metadata({{"kind", "implant"}, {"patient_id", pid}}, reader)) {
    view.implants.push_back(implant_json(o));
  }
  for (const auto& o : store_->query_metadata({{"kind", "surgery"}, {"patient_id", pid}}, reader)) {
    view.surgeries.push_back({{"object_id", o.object_id}, {"medical", section_or_null(o, Section::medical_focus)}});
  }
  return view;
}

SurgeonReport Ecosystem::surgeon_report(std::string_view key, const Session& staff) {
  require_role(staff, Role::medical_staff, AuditAction::read, "report:" + std::string(key));
  const FederatedView view = federated_view(key, staff);

  nlohmann::json implants = nlohmann::json::array();
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& i : view.implants) {
    const nlohmann::json& t = i.at("technical");
    const auto gate = access::procurement_status(t);
    const auto field = [&](const char* k) { return t.is_object() && t.contains(k) ? t.at(k) : nlohmann::json(nullptr); };
    implants.push_back({{"udi", i.at("udi")},
                        {"device_name", field("device_name")},
                        {"manufacturer", field("manufacturer")},
                        {"material_lot", field("material_lot")},
                        {"compatible_components", field("compatible_components")},
                        {"revision_instruments", field("revision_instruments")},
                        {"process_summary", field("process_summary")},
                        {"surface_roughness_um", field("surface_roughness_um")},
                        {"procurement", gate.cleared ? "cleared" : "blocked"}});
    if (!gate.cleared) {
      std::string missing;
      for (const auto& m : gate.missing) missing += (missing.empty() ? "" : ", ") + m;
      warnings.push_back("procurement incomplete for " + i.at("udi").get<std::string>() + ": missing " + missing);
    }
  }
  nlohmann::json surgeries = nlohmann::json::array();
  for (const auto& s : view.surgeries) {
    const nlohmann::json& m = s.at("medical");
    const auto field = [&](const char* k) { return m.is_object() && m.contains(k) ? m.at(k) : nlohmann::json(nullptr); };
    surgeries.push_back({{"surgery_id", s.at("object_id")},
                         {"procedure", field("procedure")},
                         {"surgery_date", field("surgery_date")},
                         {"author", field("author")}});
  }
  nlohmann::json doc{{"report", "revision_preparation"},
                     {"key", view.key},
                     {"patient_id", view.patient.is_null() ? nlohmann::json(nullptr) : view.patient.at("patient_id")},
                     {"implants", implants},
                     {"prior_surgeries", surgeries},
                     {"vitals_summary", view.vitals_summary},
                     {"warnings", warnings},
                     {"generated_at", to_unix(view.assembled_at)}};
  return {doc, render_report(doc)};
}

std::string render_report(const nlohmann::json& doc) {
  std::ostringstream out;
  const auto str = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  out << "Revision preparation report for " << str(doc.at("key")) << "\n";
  out << "Patient: " << (doc.at("patient_id").is_null() ? "(not visible)" : str(doc.at("patient_id"))) << "\n";
  for (const auto& w : doc.at("warnings")) out << "WARNING: " << str(w) << "\n";
  out << "Implants:\n";
  for (const auto& i : doc.at("implants")) {
    out << "  - " << str(i.at("udi")) << " " << str(i.at("device_name")) << " by " << str(i.at("manufacturer"))
        << " [" << str(i.at("procurement")) << "]\n";
    out << "    material lot: " << str(i.at("material_lot")) << "\n";
    out << "    process: " << str(i.at("process_summary")) << "\n";
    out << "    components:";
    if (i.at("compatible_components").is_array()) {
      for (const auto& c : i.at("compatible_components")) out << " " << str(c) << ";";
    }
    out << "\n    revision instruments:";
    if (i.at("revision_instruments").is_array()) {
      for (const auto& c : i.at("revision_instruments")) out << " " << str(c) << ";";
    }
    out << "\n";
  }
  out << "Prior surgeries:\n";
  for (const auto& s : doc.at("prior_surgeries")) {
    out << "  - " << str(s.at("surgery_id")) << " " << str(s.at("surgery_date")) << " " << str(s.at("procedure"))
        << " (" << str(s.at("author")) << ")\n";
  }
  out << "Latest vitals:\n";
  if (doc.at("vitals_summary").is_object()) {
    for (const auto& [name, s] : doc.at("vitals_summary").items()) {
      out << "  " << name << ": " << str(s.at("latest").at("value")) << " at " << str(s.at("latest").at("ts")) << " (n="
          << str(s.at("count")) << ")\n";
    }
  }
  return out.str();
}

std::optional<access::EmergencyGrant> Ecosystem::evaluate_emergency(std::string_view patient_id,
                                                                    const Session& responder) {
  const std::string ref = "patient:" + std::string(patient_id);
  require_role(responder, Role::first_responder, AuditAction::grant, ref);
  const auto patient = store_->peek(patient_object_id(patient_id));
  if (!patient || patient->deleted) fail(ErrorCode::NotFound, "no patient '" + std::string(patient_id) + "'");

  std::vector<access::VitalObservation> obs;
  if (const auto it = patient->sections.find(Section::social_focus); it != patient->sections.end()) {
    for (const auto& o : it->second.value("vitals", nlohmann::json::array())) {
      obs.push_back({from_unix(o.at("ts").get<std::int64_t>()), o.at("vital").get<std::string>(),
                     o.at("value").get<double>()});
    }
  }
  return access_->evaluate_emergency(responder.subject_id, std::string(patient_id), obs, config_.emergency_policy);
}

store::ExportResult Ecosystem::export_anonymized(const store::MetadataFilter& filter, std::string_view key,
                                                 const Session& caller) {
  return store_->export_anonymized(filter, key, caller, directory_);
}

}  // namespace udi::federation
