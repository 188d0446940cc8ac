#include "udi/access/policy.hpp"

#include <algorithm>

#include "udi/access/crypto.hpp"
#include "udi/error.hpp"

namespace udi::access {

namespace {

constexpr std::size_t cell_index(Role r, Action a, Section s) noexcept {
  return (static_cast<std::size_t>(r) * 2 + static_cast<std::size_t>(a)) * 3 + static_cast<std::size_t>(s);
}

constexpr std::pair<Rule, std::string_view> kRules[] = {{Rule::deny, "deny"},
                                                        {Rule::allow, "allow"},
                                                        {Rule::allow_own, "allow_own"},
                                                        {Rule::allow_own_dedicated, "allow_own_dedicated"},
                                                        {Rule::allow_own_devices, "allow_own_devices"},
                                                        {Rule::allow_with_grant, "allow_with_grant"}};

Decision allow(std::string reason) { return {true, std::move(reason), 0}; }
Decision deny(std::string reason) { return {false, std::move(reason), 0}; }

std::string resource_ref(const Resource& r) {
  return (r.object_ref.empty() ? std::string("-") : r.object_ref) + "#" + std::string(to_string(r.section));
}

bool fields_within(const std::vector<std::string>& fields, const std::set<std::string, std::less<>>& allowed) {
  return !fields.empty() &&
         std::all_of(fields.begin(), fields.end(), [&](const std::string& f) { return allowed.contains(f); });
}

Decision evaluate_grant(const AccessMatrix& m, const EmergencyGrant& g, Action action, const Resource& r,
                        Timestamp now) {
  if (m.rule(Role::first_responder, action, r.section) != Rule::allow_with_grant) return deny("not covered by emergency grants");
  if (action != Action::read) return deny("emergency grants are read-only");
  if (g.patient_id != r.patient_id) return deny("grant is for another patient");
  if (!g.active_at(now)) return deny("grant expired");
  return allow("active emergency grant");
}

}  // namespace

std::string_view to_string(Rule r) noexcept {
  for (const auto& [rule, name] : kRules) {
    if (rule == r) return name;
  }
  return "deny";
}

Rule rule_from_string(std::string_view s) {
  for (const auto& [rule, name] : kRules) {
    if (name == s) return rule;
  }
  fail(ErrorCode::InvalidInput, "unknown access rule '" + std::string(s) + "'");
}

AccessMatrix AccessMatrix::normative() {
  AccessMatrix m;
  using enum Section;
  m.set(Role::user, Action::read, social_focus, Rule::allow_own);
  m.set(Role::user, Action::write, social_focus, Rule::allow_own_dedicated);
  m.set(Role::user, Action::read, medical_focus, Rule::allow_own);
  m.set(Role::user, Action::read, technical_focus, Rule::allow_own);

  m.set(Role::medical_staff, Action::read, social_focus, Rule::allow);
  m.set(Role::medical_staff, Action::read, medical_focus, Rule::allow);
  m.set(Role::medical_staff, Action::write, medical_focus, Rule::allow);
  m.set(Role::medical_staff, Action::read, technical_focus, Rule::allow);

  m.set(Role::producer, Action::read, technical_focus, Rule::allow_own_devices);
  m.set(Role::producer, Action::write, technical_focus, Rule::allow_own_devices);

  m.set(Role::first_responder, Action::read, social_focus, Rule::allow_with_grant);
  m.set(Role::first_responder, Action::read, medical_focus, Rule::allow_with_grant);
  return m;
}

Rule AccessMatrix::rule(Role role, Action action, Section section) const noexcept {
  return cells_[cell_index(role, action, section)];
}

void AccessMatrix::set(Role role, Action action, Section section, Rule rule) noexcept {
  cells_[cell_index(role, action, section)] = rule;
}

nlohmann::json AccessMatrix::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (Role r : kAllRoles) {
    for (Action a : kAllActions) {
      for (Section s : kAllSections) j[std::string(to_string(r))][std::string(to_string(a))][std::string(to_string(s))] = to_string(rule(r, a, s));
    }
  }
  return j;
}

AccessMatrix AccessMatrix::from_json(const nlohmann::json& j, const AccessMatrix& base) {
  AccessMatrix m = base;
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "access matrix must be an object");
  for (const auto& [role, actions] : j.items()) {
    if (!actions.is_object()) fail(ErrorCode::InvalidInput, "access matrix row must be an object");
    for (const auto& [action, sections] : actions.items()) {
      if (!sections.is_object()) fail(ErrorCode::InvalidInput, "access matrix cell group must be an object");
      for (const auto& [section, rule] : sections.items()) {
        if (!rule.is_string()) fail(ErrorCode::InvalidInput, "access rule must be a string");
        m.set(role_from_string(role), action_from_string(action), section_from_string(section),
              rule_from_string(rule.get<std::string>()));
      }
    }
  }
  return m;
}

Decision evaluate(const AccessMatrix& m, const AccessConfig& config, const Principal& principal, Action action,
                  const Resource& r, Timestamp now, const std::vector<EmergencyGrant>& grants) {
  if (const auto* g = std::get_if<EmergencyGrant>(&principal)) return evaluate_grant(m, *g, action, r, now);

  const Session& s = std::get<Session>(principal);
  if (s.device_id) {
    if (action == Action::write && r.section == Section::social_focus && !s.scope.empty() && r.patient_id == s.scope &&
        fields_within(r.fields, config.device_fields)) {
      if (m.rule(s.role, action, r.section) == Rule::deny) return deny("matrix denies the device owner");
      return allow("device upload to owner's social data");
    }
    return deny("device capability only uploads the owner's social data");
  }

  const bool own_patient = !s.scope.empty() && r.patient_id == s.scope;
  switch (m.rule(s.role, action, r.section)) {
    case Rule::deny:
      return deny("denied by access matrix");
    case Rule::allow:
      return allow("allowed by access matrix");
    case Rule::allow_own:
      return own_patient ? allow("owner access") : deny("not the owner");
    case Rule::allow_own_dedicated:
      if (!own_patient) return deny("not the owner");
      return fields_within(r.fields, config.dedicated_social_fields) ? allow("owner entry in dedicated subsection")
                                                                     : deny("outside the dedicated subsection");
    case Rule::allow_own_devices:
      return !s.scope.empty() && r.manufacturer == s.scope ? allow("own device data")
                                                           : deny("device of another manufacturer");
    case Rule::allow_with_grant: {
      if (action != Action::read) return deny("emergency grants are read-only");
      const bool granted = std::any_of(grants.begin(), grants.end(), [&](const EmergencyGrant& g) {
        return g.responder_id == s.subject_id && g.patient_id == r.patient_id && g.active_at(now);
      });
      return granted ? allow("active emergency grant") : deny("no active emergency grant");
    }
  }
  return deny("denied by default");
}

std::optional<EmergencyGrant> find_emergency(const std::vector<VitalObservation>& observations,
                                             const EmergencyPolicy& policy, Timestamp now,
                                             const std::string& responder_id, const std::string& patient_id) {
  validate(policy);
  std::vector<VitalObservation> obs;
  for (const auto& o : observations) {
    if (o.at > now) continue;
    if (std::any_of(policy.conditions.begin(), policy.conditions.end(), [&](const auto& c) { return c.matches(o); })) {
      obs.push_back(o);
    }
  }
  std::stable_sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.at < b.at; });

  for (auto end_it = obs.rbegin(); end_it != obs.rend(); ++end_it) {
    const Timestamp end = end_it->at;
    if (end_it != obs.rbegin() && std::prev(end_it)->at == end) continue;
    const Timestamp start = end - policy.simultaneity_window;

    std::vector<VitalObservation> triggering;
    for (const auto& c : policy.conditions) {
      const VitalObservation* latest = nullptr;
      for (const auto& o : obs) {
        if (o.at >= start && o.at <= end && c.matches(o)) latest = &o;
      }
      if (latest) triggering.push_back(*latest);
    }
    if (static_cast<int>(triggering.size()) >= policy.required_simultaneous) {
      std::stable_sort(triggering.begin(), triggering.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
      triggering.erase(std::unique(triggering.begin(), triggering.end()), triggering.end());
      return EmergencyGrant{responder_id, patient_id, end, end + policy.grant_ttl, std::move(triggering)};
    }
  }
  return std::nullopt;
}

AccessController::AccessController(const Clock& clock, std::string server_key, AuditLog& audit, AccessMatrix matrix,
                                   AccessConfig config)
    : clock_(clock), key_(std::move(server_key)), audit_(audit), matrix_(matrix), config_(std::move(config)) {
  if (key_.empty()) fail(ErrorCode::InvalidInput, "server key must not be empty");
  if (config_.session_ttl.count() <= 0) fail(ErrorCode::InvalidInput, "session TTL must be positive");
}

std::string AccessController::sign(const Session& s) const { return hmac_sha256_hex(key_, session_signing_payload(s)); }

Session AccessController::authenticate(const CredentialDirectory& directory, std::string_view subject_id,
                                       std::string_view secret) {
  const Credential* c = directory.find(subject_id);
  if (!c) {
    const auto e = audit_.append({std::string(subject_id), "unknown", AuditAction::authenticate, "directory", false,
                                  "unknown subject"});
    throw Error(ErrorCode::UnknownSubject, "subject '" + std::string(subject_id) + "' is not registered", e.seq);
  }
  if (!digest_equal(hash_secret(secret, c->salt), c->secret_hash)) {
    const auto e = audit_.append({c->subject_id, std::string(to_string(c->role)), AuditAction::authenticate,
                                  "directory", false, "bad secret"});
    throw Error(ErrorCode::BadSecret, "secret rejected for '" + c->subject_id + "'", e.seq);
  }
  return issue_session(c->subject_id, c->role, c->scope);
}

Session AccessController::issue_session(std::string subject_id, Role role, std::string scope,
                                        std::optional<std::string> device_id) {
  Session s;
  s.subject_id = std::move(subject_id);
  s.role = role;
  s.scope = std::move(scope);
  s.device_id = std::move(device_id);
  s.issued_at = clock_.now();
  s.expires_at = s.issued_at + config_.session_ttl;
  s.integrity_tag = sign(s);
  return s;
}

Session AccessController::issue_device_capability(const Session& owner, std::string device_id) {
  const std::string ref = "patient:" + owner.scope;
  if (owner.device_id) {
    const auto d = record(owner, AuditAction::write, ref + "#social_focus", false, "device capabilities cannot delegate");
    throw Error(ErrorCode::AccessDenied, "a device capability cannot issue another", d.audit_seq);
  }
  Resource r{Section::social_focus, owner.scope, "", {config_.device_fields.begin(), config_.device_fields.end()}, ref};
  const Decision d = decide(owner, Action::write, r);
  if (!d.allowed) throw Error(ErrorCode::AccessDenied, "device capability refused: " + d.reason, d.audit_seq);
  return issue_session(owner.subject_id, owner.role, owner.scope, std::move(device_id));
}

bool AccessController::verify(const Session& s) const {
  return s.expires_at > s.issued_at && digest_equal(s.integrity_tag, sign(s));
}

Decision AccessController::decide(const Principal& principal, Action action, const Resource& resource) {
  const Timestamp now = clock_.now();
  const std::string ref = resource_ref(resource);
  const AuditAction audit_action = action == Action::read ? AuditAction::read : AuditAction::write;

  std::string subject;
  std::string role;
  if (const auto* s = std::get_if<Session>(&principal)) {
    subject = s->subject_id;
    role = std::string(to_string(s->role));
    if (!verify(*s)) {
      const auto e = audit_.append({subject, role, audit_action, ref, false, "invalid session"});
      throw Error(ErrorCode::InvalidSession, "session integrity check failed", e.seq);
    }
    if (now >= s->expires_at) {
      const auto e = audit_.append({subject, role, audit_action, ref, false, "session expired"});
      throw Error(ErrorCode::ExpiredSession, "session expired", e.seq);
    }
  } else {
    const auto& g = std::get<EmergencyGrant>(principal);
    subject = g.responder_id;
    role = std::string(to_string(Role::first_responder));
    const auto registered = grants();
    if (std::find(registered.begin(), registered.end(), g) == registered.end()) {
      const auto e = audit_.append({subject, role, audit_action, ref, false, "unregistered grant"});
      throw Error(ErrorCode::InvalidSession, "emergency grant was not issued by this server", e.seq);
    }
  }

  Decision d = evaluate(matrix_, config_, principal, action, resource, now, grants());
  d.audit_seq = audit_.append({subject, role, audit_action, ref, d.allowed, d.reason}).seq;
  return d;
}

std::optional<EmergencyGrant> AccessController::evaluate_emergency(const std::string& responder_id,
                                                                   const std::string& patient_id,
                                                                   const std::vector<VitalObservation>& observations,
                                                                   const EmergencyPolicy& policy) {
  auto grant = find_emergency(observations, policy, clock_.now(), responder_id, patient_id);
  if (!grant) return std::nullopt;
  {
    std::lock_guard lock(mutex_);
    if (std::find(grants_.begin(), grants_.end(), *grant) != grants_.end()) return grant;
    grants_.push_back(*grant);
  }
  audit_.append({responder_id, std::string(to_string(Role::first_responder)), AuditAction::grant,
                 "patient:" + patient_id, true,
                 std::to_string(grant->triggering_observations.size()) + " conditions within window"});
  return grant;
}

Decision AccessController::record(const Session& actor, AuditAction action, std::string resource, bool allowed,
                                  std::string reason) {
  const auto e = audit_.append({actor.subject_id, std::string(to_string(actor.role)), action, std::move(resource),
                                allowed, reason});
  return {allowed, std::move(reason), e.seq};
}

std::vector<EmergencyGrant> AccessController::grants() const {
  std::lock_guard lock(mutex_);
  return grants_;
}

ProcurementStatus procurement_status(const nlohmann::json& t) {
  ProcurementStatus st;
  const auto present = [&](const char* key) {
    if (!t.is_object() || !t.contains(key)) return false;
    const auto& v = t.at(key);
    if (v.is_null()) return false;
    if (v.is_string() || v.is_array() || v.is_object()) return !v.empty();
    return true;
  };
  for (const char* key : {"udi", "manufacturer", "device_name", "revision_instruments", "process_summary"}) {
    if (!present(key)) st.missing.emplace_back(key);
  }
  if (present("revision_instruments") && !t.at("revision_instruments").is_array()) {
    st.missing.emplace_back("revision_instruments");
  }
  st.cleared = st.missing.empty();
  return st;
}

}  // namespace udi::access
