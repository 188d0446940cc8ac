// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "test_support.hpp"
#include "udi/access/audit.hpp"
#include "udi/access/policy.hpp"
#include "udi/readout/pipeline.hpp"
#include "udi/readout/signal.hpp"
#include "udi/scenario/scenario.hpp"
#include "udi/store/object_store.hpp"
#include "udi/symbology/code128.hpp"
#include "udi/symbology/datamatrix.hpp"
#include "udi/symbology/pharmacode.hpp"

using namespace udi;
using access::Action;
using access::Role;
using access::Section;
using access::Session;
using nlohmann::json;
using udi::testing::kT0;

namespace {

// Criterion 1
constexpr int kCode128Payloads = 1000;
constexpr int kDataMatrixPayloadsPerSize = 500;
// Criterion 2
constexpr int kRsPayloads = 100;
constexpr int kRsHighErrorTrials = 40;  // per payload and error count 3, 4, 5
// Criterion 3
constexpr int kReadoutSpm = 12;
constexpr double kReadoutBlur = 0.3;
constexpr double kReadoutNoise = 0.05;
constexpr double kReadoutAttenuation = 0.3;
constexpr int kReadoutTrials = 1000;
constexpr double kReadoutMinSuccess = 0.99;
constexpr int kGridTrials = 200;
constexpr double kGridMonotoneSlack = 0.03;
const std::vector<double> kGridBlur{0.0, 0.15, 0.3};
const std::vector<double> kGridNoise{0.0, 0.05, 0.1, 0.2, 0.3};
// Criterion 4
constexpr int kMatrixFuzzRequests = 20000;
// Criterion 5
constexpr int kEmergencyRandomSets = 3000;
constexpr int kEmergencyNegativeSets = 1000;
constexpr int kTtlFlipTrials = 200;
// Criterion 6
constexpr int kAuditWorkloadOps = 500;
constexpr int kTamperTrials = 100;
// Criterion 7
constexpr int kFederationObjects = 100;
// Criterion 8
constexpr int kConvergenceSchedules = 50;
constexpr int kConvergenceWrites = 24;
constexpr int kConvergenceReplicas = 6;
// Criterion 9
constexpr int kAnonPatients = 20;
// Every criterion
constexpr double kMaxSeconds = 60.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::uint64_t draw(std::mt19937_64& rng, std::uint64_t n) { return rng() % n; }

std::string random_printable(std::mt19937_64& rng, std::size_t len) {
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += static_cast<char>(32 + draw(rng, 95));
  return s;
}

// ---------------------------------------------------------------------------

Outcome symbology_round_trips() {
  std::size_t failures = 0, total = 0;
  for (int v = symbology::pharmacode::kMinValue; v <= symbology::pharmacode::kMaxValue; ++v, ++total) {
    if (symbology::pharmacode_decode(symbology::pharmacode_encode(v)) != v) ++failures;
  }
  std::mt19937_64 rng(101);
  for (int i = 0; i < kCode128Payloads; ++i, ++total) {
    const std::string s = random_printable(rng, 1 + draw(rng, 40));
    if (symbology::code128_decode(symbology::code128_encode(s)) != s) ++failures;
  }
  for (const auto& sz : symbology::supported_symbol_sizes()) {
    for (int i = 0; i < kDataMatrixPayloadsPerSize; ++i, ++total) {
      std::string p;
      const std::size_t target = 1 + draw(rng, static_cast<std::uint64_t>(2 * sz.data_codewords));
      while (p.size() < target) {
        if (draw(rng, 2)) {
          p += static_cast<char>('0' + draw(rng, 10));
        } else {
          p += static_cast<char>(32 + draw(rng, 95));
        }
      }
      while (symbology::ascii_encode(p).size() > static_cast<std::size_t>(sz.data_codewords)) p.pop_back();
      if (p.empty()) p = "0";
      try {
        if (symbology::datamatrix_decode(symbology::datamatrix_encode(p, sz.size)) != p) ++failures;
      } catch (const Error&) {
        ++failures;
      }
    }
  }
  return {failures == 0, std::to_string(total - failures) + "/" + std::to_string(total) + " round trips exact"};
}

// ---------------------------------------------------------------------------

Outcome error_correction_bound() {
  constexpr int kSize = 10;
  const auto& sz = symbology::symbol_size(kSize);
  const int n = sz.data_codewords + sz.ecc_codewords;
  const auto map = symbology::placement_map(kSize);
  std::vector<std::vector<std::pair<std::size_t, int>>> modules(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i].kind == symbology::ModuleSource::Kind::codeword) modules[map[i].codeword].push_back({i, map[i].bit});
  }
  const auto corrupt = [&](symbology::BitMatrix m, const std::vector<int>& pos, std::mt19937_64& rng) {
    for (int p : pos) {
      const int mag = 1 + static_cast<int>(draw(rng, 255));
      for (const auto& [idx, bit] : modules[p]) {
        if (mag & (1 << bit)) m.bits[idx] ^= 1;
      }
    }
    return m;
  };

  std::mt19937_64 rng(202);
  std::size_t within = 0, within_ok = 0;
  std::size_t beyond = 0, beyond_correct = 0, beyond_refused = 0, beyond_other = 0, silent = 0;
  for (int k = 0; k < kRsPayloads; ++k) {
    std::string payload;
    do {
      payload += draw(rng, 3) ? static_cast<char>('0' + draw(rng, 10)) : static_cast<char>('A' + draw(rng, 26));
    } while (symbology::ascii_encode(payload).size() < static_cast<std::size_t>(sz.data_codewords) && draw(rng, 4));
    while (symbology::ascii_encode(payload).size() > static_cast<std::size_t>(sz.data_codewords)) payload.pop_back();
    const auto clean = symbology::datamatrix_encode(payload, kSize);

    std::vector<std::vector<int>> patterns{{}};
    for (int a = 0; a < n; ++a) {
      patterns.push_back({a});
      for (int b = a + 1; b < n; ++b) patterns.push_back({a, b});
    }
    for (const auto& pat : patterns) {
      ++within;
      try {
        if (symbology::datamatrix_decode(corrupt(clean, pat, rng)) == payload) ++within_ok;
      } catch (const Error&) {
      }
    }
    for (int errors = 3; errors <= 5; ++errors) {
      for (int t = 0; t < kRsHighErrorTrials; ++t) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(errors));
        ++beyond;
        try {
          if (symbology::datamatrix_decode(corrupt(clean, idx, rng)) == payload) {
            ++beyond_correct;
          } else {
            ++silent;
          }
        } catch (const Error& e) {
          if (e.code() == ErrorCode::TooManyErrors) {
            ++beyond_refused;
          } else {
            ++beyond_other;
          }
        }
      }
    }
  }
  std::ostringstream d;
  d << "<=2 errors corrected " << within_ok << "/" << within << "; >=3 errors: " << beyond_refused
    << " TooManyErrors, " << beyond_correct << " correct, " << beyond_other << " other detected, " << silent
    << " silently wrong";
  return {within_ok == within && silent == 0, d.str()};
}

// ---------------------------------------------------------------------------

struct ReadoutCase {
  symbology::BarPattern pattern;
  readout::Symbology1D hint;
  readout::Payload expected;
};

ReadoutCase random_readout_case(std::mt19937_64& rng, bool pharmacode) {
  if (pharmacode) {
    const auto v = static_cast<std::int32_t>(3 + draw(rng, 131068));
    return {symbology::pharmacode_encode(v), readout::Symbology1D::pharmacode, v};
  }
  const std::string s = random_printable(rng, 4 + draw(rng, 13));
  return {symbology::code128_encode(s), readout::Symbology1D::code128, s};
}

double readout_success(bool pharmacode, double blur, double noise, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int ok = 0;
  for (int i = 0; i < trials; ++i) {
    const auto c = random_readout_case(rng, pharmacode);
    readout::ReadoutParams p;
    p.samples_per_module = kReadoutSpm;
    p.blur_sigma_modules = blur;
    p.noise_sigma_fraction = noise;
    p.attenuation = kReadoutAttenuation;
    p.rng_seed = rng();
    try {
      if (readout::decode_trace(readout::synthesize_trace(c.pattern, p), c.hint) == c.expected) ++ok;
    } catch (const Error&) {
    }
  }
  return static_cast<double>(ok) / trials;
}

Outcome readout_robustness() {
  std::ostringstream d;
  bool pass = true;
  for (bool ph : {true, false}) {
    const double rate = readout_success(ph, kReadoutBlur, kReadoutNoise, kReadoutTrials, ph ? 303 : 304);
    pass = pass && rate >= kReadoutMinSuccess;
    d << (ph ? "pharmacode " : "code128 ") << rate * 100 << "% ";
  }
  d << "at blur " << kReadoutBlur << ", noise " << kReadoutNoise << "; grid ";
  int violations = 0;
  for (bool ph : {true, false}) {
    std::vector<std::vector<double>> g(kGridBlur.size(), std::vector<double>(kGridNoise.size()));
    for (std::size_t b = 0; b < kGridBlur.size(); ++b) {
      for (std::size_t n = 0; n < kGridNoise.size(); ++n) {
        g[b][n] = readout_success(ph, kGridBlur[b], kGridNoise[n], kGridTrials, 1000 + 10 * b + n);
      }
    }
    for (std::size_t b = 0; b < kGridBlur.size(); ++b) {
      for (std::size_t n = 0; n < kGridNoise.size(); ++n) {
        if (n + 1 < kGridNoise.size() && g[b][n + 1] > g[b][n] + kGridMonotoneSlack) ++violations;
        if (b + 1 < kGridBlur.size() && g[b + 1][n] > g[b][n] + kGridMonotoneSlack) ++violations;
      }
    }
    d << (ph ? "pharmacode@max " : "code128@max ") << g.back().back() * 100 << "% ";
  }
  d << "monotone violations " << violations;
  return {pass && violations == 0, d.str()};
}

// ---------------------------------------------------------------------------

/// Normative matrix, restated as data. Entries: "A" allow, "-" deny, "own",
/// "own+ded" (own, dedicated subsection), "dev" (own devices), "grant".
std::string oracle_cell(Role r, Action a, Section s) {
  static const std::map<std::string, std::array<const char*, 6>> table{
      // social R, social W, medical R, medical W, technical R, technical W
      {"user", {"own", "own+ded", "own", "-", "own", "-"}},
      {"medical_staff", {"A", "-", "A", "A", "A", "-"}},
      {"producer", {"-", "-", "-", "-", "dev", "dev"}},
      {"first_responder", {"grant", "-", "grant", "-", "-", "-"}},
  };
  const int col = (s == Section::social_focus ? 0 : s == Section::medical_focus ? 2 : 4) + (a == Action::write ? 1 : 0);
  return table.at(std::string(access::to_string(r)))[static_cast<std::size_t>(col)];
}

const std::set<std::string> kDedicated{"vitals", "steps", "sleep", "nutrition"};

struct MatrixRequest {
  Session session;
  Action action;
  access::Resource resource;
  std::vector<access::EmergencyGrant> grants;
  Timestamp now;
};

bool oracle_allows(const MatrixRequest& q) {
  const auto& s = q.session;
  const auto& r = q.resource;
  const std::string cell = oracle_cell(s.role, q.action, r.section);
  if (s.device_id) {
    if (q.action != Action::write || r.section != Section::social_focus || s.role != Role::user) return false;
    if (s.scope.empty() || s.scope != r.patient_id || r.fields.empty()) return false;
    for (const auto& f : r.fields) {
      if (f != "vitals" && f != "steps" && f != "sleep") return false;
    }
    return true;
  }
  const bool own = !s.scope.empty() && s.scope == r.patient_id;
  if (cell == "A") return true;
  if (cell == "own") return own;
  if (cell == "own+ded") {
    if (!own || r.fields.empty()) return false;
    for (const auto& f : r.fields) {
      if (!kDedicated.contains(f)) return false;
    }
    return true;
  }
  if (cell == "dev") return !s.scope.empty() && s.scope == r.manufacturer;
  if (cell == "grant") {
    if (q.action != Action::read) return false;
    for (const auto& g : q.grants) {
      if (g.responder_id == s.subject_id && g.patient_id == r.patient_id && q.now >= g.granted_at && q.now < g.expires_at)
        return true;
    }
    return false;
  }
  return false;
}

Outcome access_matrix() {
  const auto normative = access::AccessMatrix::normative();
  const access::AccessConfig cfg;
  const Timestamp now = from_unix(kT0);
  std::size_t cases = 0, mismatches = 0;

  // Exhaustive: role x action x section x ownership x manufacturer x fields x grant state.
  const std::vector<std::vector<std::string>> field_sets{{}, {"vitals"}, {"steps", "nutrition"}, {"notes"}};
  for (Role role : access::kAllRoles) {
    for (Action action : access::kAllActions) {
      for (Section section : access::kAllSections) {
        for (bool own : {true, false}) {
          for (bool maker : {true, false}) {
            for (const auto& fields : field_sets) {
              for (int grant_state = 0; grant_state < 4; ++grant_state) {
                MatrixRequest q;
                q.session.subject_id = "subject";
                q.session.role = role;
                q.session.scope = role == Role::producer ? "Maker" : role == Role::user ? "P-1" : "";
                q.action = action;
                q.resource = {section, own ? "P-1" : "P-2", maker ? "Maker" : "Other", fields, "obj"};
                q.now = now;
                if (grant_state == 1) q.grants.push_back({"subject", "P-1", now - Seconds{10}, now + Seconds{10}, {}});
                if (grant_state == 2) q.grants.push_back({"subject", "P-1", now - Seconds{20}, now, {}});
                if (grant_state == 3) q.grants.push_back({"someone", "P-1", now - Seconds{10}, now + Seconds{10}, {}});
                ++cases;
                const bool got = access::evaluate(normative, cfg, q.session, action, q.resource, now, q.grants).allowed;
                if (got != oracle_allows(q)) ++mismatches;
              }
            }
          }
        }
      }
    }
  }

  // Fuzz: random attributes, against both the normative and the all-deny matrix.
  std::mt19937_64 rng(404);
  const access::AccessMatrix deny_all;
  std::size_t deny_all_allowed = 0;
  const std::vector<std::string> pool{"vitals", "steps", "sleep", "nutrition", "notes", "udi", "", "x"};
  for (int i = 0; i < kMatrixFuzzRequests; ++i) {
    MatrixRequest q;
    q.session.subject_id = "s" + std::to_string(draw(rng, 3));
    q.session.role = access::kAllRoles[draw(rng, 4)];
    const std::vector<std::string> scopes{"", "P-1", "P-2", "Maker", "Other"};
    q.session.scope = scopes[draw(rng, scopes.size())];
    if (draw(rng, 5) == 0) q.session.device_id = "dev";
    q.action = access::kAllActions[draw(rng, 2)];
    q.resource.section = access::kAllSections[draw(rng, 3)];
    q.resource.patient_id = scopes[draw(rng, scopes.size())];
    q.resource.manufacturer = scopes[draw(rng, scopes.size())];
    for (auto k = draw(rng, 4); k > 0; --k) q.resource.fields.push_back(pool[draw(rng, pool.size())]);
    q.now = from_unix(kT0 + static_cast<std::int64_t>(draw(rng, 100)));
    for (auto k = draw(rng, 3); k > 0; --k) {
      const auto start = from_unix(kT0 + static_cast<std::int64_t>(draw(rng, 100)));
      q.grants.push_back({"s" + std::to_string(draw(rng, 3)), scopes[draw(rng, 3)], start,
                          start + Seconds{1 + static_cast<std::int64_t>(draw(rng, 60))}, {}});
    }
    ++cases;
    if (access::evaluate(normative, cfg, q.session, q.action, q.resource, q.now, q.grants).allowed != oracle_allows(q))
      ++mismatches;
    if (access::evaluate(deny_all, cfg, q.session, q.action, q.resource, q.now, q.grants).allowed) ++deny_all_allowed;
  }

  // Unknown names never become a role, section or rule.
  std::size_t unknown_accepted = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::string name = random_printable(rng, 1 + draw(rng, 16));
    const auto rejects = [&](auto f) {
      try {
        f(name);
        return false;
      } catch (const Error& e) {
        return e.code() == ErrorCode::InvalidInput;
      }
    };
    const bool known_role = name == "user" || name == "medical_staff" || name == "producer" || name == "first_responder";
    if (!known_role && !rejects([](const std::string& n) { access::role_from_string(n); })) ++unknown_accepted;
    if (!rejects([](const std::string& n) { access::section_from_string(n); })) ++unknown_accepted;
  }

  std::ostringstream d;
  d << cases << " evaluations, " << mismatches << " mismatches; all-deny matrix allowed " << deny_all_allowed
    << "; unknown names accepted " << unknown_accepted;
  return {mismatches == 0 && deny_all_allowed == 0 && unknown_accepted == 0, d.str()};
}

// ---------------------------------------------------------------------------

std::optional<Timestamp> emergency_oracle(const std::vector<access::VitalObservation>& obs,
                                          const access::EmergencyPolicy& p, Timestamp now) {
  std::optional<Timestamp> best;
  for (const auto& end_obs : obs) {
    const Timestamp end = end_obs.at;
    if (end > now) continue;
    bool breach = false;
    for (const auto& c : p.conditions) breach = breach || (c.vital == end_obs.vital && c.matches(end_obs));
    if (!breach) continue;  // windows end on a breaching observation
    int met = 0;
    for (const auto& c : p.conditions) {
      bool hit = false;
      for (const auto& o : obs) {
        if (o.at <= end && o.at >= end - p.simultaneity_window && o.at <= now && o.vital == c.vital &&
            ((c.comparator == access::Comparator::less && o.value < c.threshold) ||
             (c.comparator == access::Comparator::less_equal && o.value <= c.threshold) ||
             (c.comparator == access::Comparator::greater && o.value > c.threshold) ||
             (c.comparator == access::Comparator::greater_equal && o.value >= c.threshold)))
          hit = true;
      }
      if (hit) ++met;
    }
    if (met >= p.required_simultaneous && (!best || end > *best)) best = end;
  }
  return best;
}

Outcome emergency_temporality() {
  const auto policy = access::default_emergency_policy();
  std::mt19937_64 rng(505);
  std::size_t mismatches = 0, grants = 0, negatives_granted = 0;
  const std::vector<std::string> vitals{"SpO2", "systolic", "heart_rate"};
  for (int t = 0; t < kEmergencyRandomSets; ++t) {
    std::vector<access::VitalObservation> obs;
    for (auto k = 1 + draw(rng, 6); k > 0; --k) {
      const std::string v = vitals[draw(rng, 3)];
      const double base = v == "SpO2" ? 90 : v == "systolic" ? 80 : 60;
      obs.push_back({from_unix(kT0 + static_cast<std::int64_t>(draw(rng, 400))), v,
                     base + static_cast<double>(draw(rng, 21)) - 10});
    }
    std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
    const Timestamp now = from_unix(kT0 + static_cast<std::int64_t>(draw(rng, 450)));
    const auto expect = emergency_oracle(obs, policy, now);
    const auto got = access::find_emergency(obs, policy, now, "r", "P");
    if (expect.has_value() != got.has_value()) {
      ++mismatches;
    } else if (got) {
      ++grants;
      if (got->granted_at != *expect || got->expires_at != *expect + policy.grant_ttl) ++mismatches;
    }
  }
  for (int t = 0; t < kEmergencyNegativeSets; ++t) {
    std::vector<access::VitalObservation> obs;
    const bool single = t % 2 == 0;
    if (single) {
      for (auto k = 1 + draw(rng, 5); k > 0; --k)
        obs.push_back({from_unix(kT0 + static_cast<std::int64_t>(draw(rng, 100))), "SpO2", 80});
    } else {
      const auto gap = policy.simultaneity_window.count() + 1 + static_cast<std::int64_t>(draw(rng, 500));
      obs.push_back({from_unix(kT0), "SpO2", 80});
      obs.push_back({from_unix(kT0 + gap), "systolic", 60});
    }
    if (access::find_emergency(obs, policy, from_unix(kT0 + 2000), "r", "P")) ++negatives_granted;
  }

  // Allow -> deny flips exactly at expiry under the virtual clock.
  std::size_t flip_errors = 0;
  for (int t = 0; t < kTtlFlipTrials; ++t) {
    ManualClock clock{from_unix(kT0)};
    access::AuditLog audit(clock);
    access::AccessConfig cfg;
    cfg.session_ttl = Seconds{1000000};
    access::AccessController ac(clock, "k", audit, access::AccessMatrix::normative(), cfg);
    const auto at = static_cast<std::int64_t>(draw(rng, 300));
    clock.set(from_unix(kT0 + at + 5));
    const auto g = ac.evaluate_emergency("resp", "P-1", {{from_unix(kT0 + at), "SpO2", 85}, {from_unix(kT0 + at + 5), "systolic", 70}},
                                         policy);
    if (!g) {
      ++flip_errors;
      continue;
    }
    const Session s = ac.issue_session("resp", Role::first_responder, "");
    const access::Resource r{Section::medical_focus, "P-1", "", {}, "patient:P-1"};
    clock.set(g->expires_at - Seconds{1});
    const bool before = ac.decide(s, Action::read, r).allowed;
    clock.set(g->expires_at);
    const bool after = ac.decide(s, Action::read, r).allowed;
    if (!before || after) ++flip_errors;
  }
  std::ostringstream d;
  d << kEmergencyRandomSets << " random sets (" << grants << " granting), " << mismatches << " oracle mismatches; "
    << negatives_granted << " single/out-of-window grants; " << flip_errors << " TTL flip errors";
  return {mismatches == 0 && negatives_granted == 0 && flip_errors == 0, d.str()};
}

// ---------------------------------------------------------------------------

Outcome audit_integrity() {
  ManualClock clock{from_unix(kT0)};
  access::AuditLog audit(clock);
  access::AccessController ac(clock, "server-key", audit);
  const auto dir = udi::testing::make_directory(4);
  store::ObjectStore store(ac);
  std::mt19937_64 rng(606);

  std::size_t decisions = 0, grant_count = 0, exports = 0, auth_failures = 0;
  std::size_t seq_mismatch = 0;
  const auto check_seq = [&](std::uint64_t seq, const std::string& subject) {
    const auto es = audit.entries();
    if (seq == 0 || seq > es.size() || es[seq - 1].subject_id != subject) ++seq_mismatch;
  };
  const std::vector<std::pair<std::string, std::string>> logins{
      {"pat-1", "pw-1"}, {"pat-2", "pw-2"}, {"dr-a", "pw-dr"}, {"prod-acme", "pw-acme"}, {"resp-1", "pw-resp"}};

  for (int op = 0; op < kAuditWorkloadOps; ++op) {
    clock.advance(Seconds{static_cast<std::int64_t>(draw(rng, 400))});
    const auto& [subject, secret] = logins[draw(rng, logins.size())];
    switch (draw(rng, 6)) {
      case 0:
      case 1: {  // decision, possibly with a forged or stale session
        Session s = ac.authenticate(dir, subject, secret);
        const auto mode = draw(rng, 6);
        if (mode == 0) s.scope = "P-9";
        if (mode == 1) clock.advance(Seconds{4000});
        const access::Resource r{access::kAllSections[draw(rng, 3)], "P-" + std::to_string(1 + draw(rng, 2)), udi::testing::kAcme,
                                 {}, "obj"};
        ++decisions;
        try {
          check_seq(ac.decide(s, access::kAllActions[draw(rng, 2)], r).audit_seq, s.subject_id);
        } catch (const Error& e) {
          if (!e.audit_seq()) ++seq_mismatch;
        }
        break;
      }
      case 2: {  // emergency evaluation
        const auto before = ac.grants().size();
        const auto t = clock.now();
        std::vector<access::VitalObservation> obs{{t - Seconds{static_cast<std::int64_t>(draw(rng, 120))}, "SpO2", 85},
                                                  {t, "systolic", draw(rng, 2) ? 70.0 : 95.0}};
        ac.evaluate_emergency("resp-1", "P-" + std::to_string(1 + draw(rng, 2)), obs, access::default_emergency_policy());
        grant_count += ac.grants().size() - before;
        break;
      }
      case 3: {  // export attempt
        Session s = ac.authenticate(dir, subject, secret);
        ++exports;
        try {
          check_seq(store.export_anonymized({}, "key", s, dir).audit_seq, s.subject_id);
        } catch (const Error& e) {
          if (!e.audit_seq()) ++seq_mismatch;
        }
        break;
      }
      case 4: {  // failed authentication
        ++auth_failures;
        try {
          ac.authenticate(dir, draw(rng, 2) ? subject : "ghost", "wrong");
        } catch (const Error& e) {
          if (!e.audit_seq()) ++seq_mismatch;
        }
        break;
      }
      default: {  // link-style record decided outside the matrix
        Session s = ac.authenticate(dir, subject, secret);
        ++decisions;
        check_seq(ac.record(s, access::AuditAction::link, "implant:x", s.role == Role::medical_staff, "link").audit_seq,
                  s.subject_id);
        break;
      }
    }
  }
  const std::size_t instrumented = decisions + grant_count + exports + auth_failures;
  const bool count_ok = audit.size() == instrumented;
  const std::string persisted = audit.serialize();
  const bool clean_ok = access::verify_audit_chain(persisted).ok;

  std::size_t undetected = 0, wrong_seq = 0;
  for (int t = 0; t < kTamperTrials; ++t) {
    std::string tampered = persisted;
    const std::size_t pos = draw(rng, tampered.size());
    tampered[pos] = static_cast<char>(tampered[pos] ^ (1 << draw(rng, 8)));
    const auto v = access::verify_audit_chain(tampered);
    if (v.ok) {
      ++undetected;
      continue;
    }
    const auto line = static_cast<std::uint64_t>(std::count(persisted.begin(), persisted.begin() + static_cast<long>(pos), '\n')) + 1;
    if (!v.broken_seq || *v.broken_seq != line) ++wrong_seq;
  }
  std::ostringstream d;
  d << "audit entries " << audit.size() << " vs instrumented " << instrumented << " (" << decisions << " decisions, "
    << grant_count << " grants, " << exports << " exports, " << auth_failures << " failed logins); seq refs bad "
    << seq_mismatch << "; tamper undetected " << undetected << "/" << kTamperTrials << ", wrong seq " << wrong_seq;
  return {count_ok && clean_ok && seq_mismatch == 0 && undetected == 0 && wrong_seq == 0, d.str()};
}

// ---------------------------------------------------------------------------

std::map<std::string, store::DigitalObject> replay_journal(const std::string& text) {
  std::map<std::string, store::DigitalObject> state;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto obj = store::object_from_json(json::parse(line).at("object"));
    state[obj.object_id] = obj;  // only winning writes are journaled
  }
  return state;
}

struct JoinOracle {
  std::map<std::string, store::DigitalObject> objects;
  access::AccessMatrix matrix = access::AccessMatrix::normative();
  access::AccessConfig config;
  std::vector<access::EmergencyGrant> grants;
  Timestamp now;

  static std::string meta(const store::DigitalObject& o, const std::string& k) {
    const auto it = o.metadata.find(k);
    return it == o.metadata.end() ? "" : it->second;
  }

  bool can_read(const Session& s, const store::DigitalObject& o, Section sec) const {
    const access::Resource r{sec, meta(o, "patient_id"), meta(o, "manufacturer"), {}, o.object_id};
    return access::evaluate(matrix, config, s, Action::read, r, now, grants).allowed;
  }

  /// Readable sections, or nullopt when nothing is readable.
  std::optional<std::map<Section, json>> filtered(const Session& s, const store::DigitalObject& o) const {
    std::map<Section, json> out;
    bool any = false;
    if (o.sections.empty()) {
      any = can_read(s, o, store::primary_section(o.kind));
    }
    for (const auto& [sec, payload] : o.sections) {
      if (can_read(s, o, sec)) {
        any = true;
        out[sec] = payload;
      }
    }
    if (!any) return std::nullopt;
    return out;
  }

  static json section(const std::map<Section, json>& m, Section s) {
    const auto it = m.find(s);
    return it == m.end() ? json(nullptr) : it->second;
  }

  static json vitals_summary(const json& vitals) {
    json out = json::object();
    if (!vitals.is_array()) return out;
    for (const auto& v : vitals) {
      const std::string name = v.at("vital");
      const double x = v.at("value");
      const std::int64_t ts = v.at("ts");
      if (!out.contains(name)) {
        out[name] = {{"count", 1}, {"min", x}, {"max", x}, {"latest", {{"ts", ts}, {"value", x}}}};
        continue;
      }
      auto& e = out[name];
      e["count"] = e["count"].get<int>() + 1;
      if (x < e["min"].get<double>()) e["min"] = x;
      if (x > e["max"].get<double>()) e["max"] = x;
      if (ts >= e["latest"]["ts"].get<std::int64_t>()) e["latest"] = {{"ts", ts}, {"value", x}};
    }
    return out;
  }

  /// Returns the view JSON, or the error code name.
  std::variant<json, std::string> view(const std::string& key, const Session& s) const {
    std::string home_id;
    const auto live = [&](const std::string& id) {
      const auto it = objects.find(id);
      return it != objects.end() && !it->second.deleted ? &it->second : nullptr;
    };
    if (key.rfind("patient:", 0) == 0 || key.rfind("implant:", 0) == 0) {
      home_id = key;
    } else if (live("patient:" + key)) {
      home_id = "patient:" + key;
    } else {
      try {
        const auto u = core::parse_udi(key);
        home_id = "implant:" + u.device_identifier + ":" + u.serial;
      } catch (const Error&) {
        return std::string("NotFound");
      }
    }
    const auto* home = live(home_id);
    if (!home) return std::string("NotFound");
    const auto home_view = filtered(s, *home);
    if (!home_view) return std::string("AccessDenied");

    json patient = nullptr, vs = nullptr;
    const std::string pid = meta(*home, "patient_id");
    const store::DigitalObject* p = home->kind == store::ObjectKind::patient ? home : live("patient:" + pid);
    if (p && !pid.empty()) {
      if (const auto pv = p == home ? home_view : filtered(s, *p)) {
        patient = {{"patient_id", pid},
                   {"medical", section(*pv, Section::medical_focus)},
                   {"social", section(*pv, Section::social_focus)}};
        if (pv->contains(Section::social_focus)) {
          vs = vitals_summary(pv->at(Section::social_focus).value("vitals", json()));
        }
      }
    }
    json implants = json::array(), surgeries = json::array();
    const auto implant_json = [&](const store::DigitalObject& o, const std::map<Section, json>& v) {
      return json{{"object_id", o.object_id},
                  {"udi", meta(o, "udi")},
                  {"patient_id", meta(o, "patient_id")},
                  {"technical", section(v, Section::technical_focus)}};
    };
    if (pid.empty()) {
      if (home->kind == store::ObjectKind::implant) implants.push_back(implant_json(*home, *home_view));
    } else {
      for (const auto& [id, o] : objects) {
        if (o.deleted || meta(o, "patient_id") != pid) continue;
        const auto v = filtered(s, o);
        if (!v) continue;
        if (o.kind == store::ObjectKind::implant) implants.push_back(implant_json(o, *v));
        if (o.kind == store::ObjectKind::surgery)
          surgeries.push_back({{"object_id", o.object_id}, {"medical", section(*v, Section::medical_focus)}});
      }
    }
    return json{{"key", key},          {"patient", patient},           {"implants", implants},
                {"surgeries", surgeries}, {"vitals_summary", vs}, {"assembled_at", to_unix(now)}};
  }
};

Outcome federation_oracle() {
  udi::testing::World w(30);
  std::mt19937_64 rng(707);
  const Session staff = w.staff();
  const Session acme = w.acme();
  const Session forge = w.forge();
  std::vector<std::string> keys;
  std::vector<std::string> patients;

  int objects = 0;
  constexpr int kPatients = 25;
  for (int i = 1; i <= kPatients; ++i) {
    const std::string pid = "P-" + std::to_string(i);
    w.eco->put_patient(pid, {{"medical_focus", {{"weight_kg", 50 + static_cast<double>(draw(rng, 50))}}}}, staff);
    patients.push_back(pid);
    keys.push_back(pid);
    ++objects;
  }
  std::vector<core::UdiRecord> implants;
  while (objects < kFederationObjects) {
    const auto k = implants.size();
    const auto u = udi::testing::make_udi("04006381" + std::to_string(10000 + k), "LOT" + std::to_string(k),
                                          "SN" + std::to_string(100000 + k));
    const bool by_acme = draw(rng, 2) == 0;
    w.eco->ingest_producer_feed("feed",
                                json::array({udi::testing::technical_record(u, by_acme ? udi::testing::kAcme : udi::testing::kForge,
                                                                            draw(rng, 5) != 0, static_cast<int>(1000 + k))}),
                                by_acme ? acme : forge);
    implants.push_back(u);
    keys.push_back(core::format_udi(u));
    ++objects;
    if (objects < kFederationObjects && draw(rng, 3) != 0) {
      try {
        w.eco->link_implant(core::format_udi(u), patients[draw(rng, patients.size())],
                            {{"procedure", "THA"}, {"surgery_date", "2026-01-05"}}, staff);
        ++objects;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ProcurementIncomplete) throw;
      }
    }
  }
  // Vitals for a few patients, and an emergency on P-1.
  for (int i = 1; i <= 5; ++i) {
    const Session watch = w.eco->device_capability(w.patient(i), "watch");
    std::string csv;
    for (int r = 0; r < 6; ++r) {
      csv += std::to_string(to_unix(w.clock.now()) - 300 + r * 60) + ",heart_rate," + std::to_string(60 + draw(rng, 40)) + "\n";
    }
    if (i == 1) {
      const auto t = std::to_string(to_unix(w.clock.now()));
      csv += t + ",SpO2,84\n" + t + ",systolic,70\n";
    }
    w.eco->ingest_vitals("P-" + std::to_string(i), csv, watch);
  }
  const Session responder = w.responder();
  if (!w.eco->evaluate_emergency("P-1", responder)) return {false, "setup: expected an emergency grant for P-1"};

  const std::vector<std::pair<std::string, Session>> readers{
      {"user", w.patient(1)}, {"medical_staff", w.staff()}, {"producer", w.acme()}, {"first_responder", responder}};

  std::size_t compared = 0, mismatches = 0, non_empty = 0;
  std::string first_mismatch;
  for (const auto& [role, session] : readers) {
    for (const auto& key : keys) {
      JoinOracle oracle;
      oracle.objects = replay_journal(w.eco->store().journal_text());
      oracle.grants = w.eco->access().grants();
      oracle.now = w.clock.now();
      const auto expected = oracle.view(key, session);
      std::variant<json, std::string> got;
      try {
        got = w.eco->federated_view(key, session).to_json();
      } catch (const Error& e) {
        got = std::string(to_string(e.code()));
      }
      ++compared;
      if (std::holds_alternative<json>(got)) ++non_empty;
      if (got != expected) {
        ++mismatches;
        if (first_mismatch.empty()) first_mismatch = role + " " + key;
      }
    }
  }
  std::ostringstream d;
  d << objects << " objects; " << compared << " views over 4 roles, " << non_empty << " readable, " << mismatches
    << " mismatches";
  if (!first_mismatch.empty()) d << " (first: " << first_mismatch << ")";
  return {mismatches == 0 && objects == kFederationObjects, d.str()};
}

// ---------------------------------------------------------------------------

Outcome store_convergence() {
  std::mt19937_64 rng(808);
  std::size_t divergent = 0;
  const auto tmp = std::filesystem::temp_directory_path() / "udi_acceptance_convergence";
  for (int sched = 0; sched < kConvergenceSchedules; ++sched) {
    std::vector<store::DigitalObject> writes;
    for (int i = 0; i < kConvergenceWrites; ++i) {
      store::DigitalObject o;
      const std::string pid = "P-" + std::to_string(draw(rng, 3));
      o.object_id = "patient:" + pid;
      o.kind = store::ObjectKind::patient;
      o.metadata = {{"kind", "patient"}, {"patient_id", pid}};
      o.sections[Section::medical_focus] = {{"notes", "w" + std::to_string(draw(rng, 4))}};
      o.version = 1 + draw(rng, 3);
      o.updated_at = from_unix(kT0 + static_cast<std::int64_t>(draw(rng, 3)));
      o.last_writer = std::string(1, static_cast<char>('a' + draw(rng, 3)));
      o.deleted = draw(rng, 8) == 0;
      writes.push_back(o);
    }
    // Oracle: per object, the maximum of (version, updated_at, writer, canonical content).
    std::map<std::string, store::DigitalObject> expected;
    for (const auto& w : writes) {
      auto it = expected.find(w.object_id);
      const auto key = [](const store::DigitalObject& o) {
        return std::make_tuple(o.version, to_unix(o.updated_at), o.last_writer, store::to_json(o).dump());
      };
      if (it == expected.end() || key(it->second) < key(w)) expected[w.object_id] = w;
    }
    for (int r = 0; r < kConvergenceReplicas; ++r) {
      auto order = writes;
      std::shuffle(order.begin(), order.end(), rng);
      std::map<std::string, store::DigitalObject> state;
      for (const auto& w : order) store::lww_apply(state, w);
      if (state != expected) ++divergent;
    }
    // Concurrent commits into one journaled store, then a replay from the journal.
    std::filesystem::remove_all(tmp);
    std::filesystem::create_directories(tmp);
    ManualClock clock{from_unix(kT0)};
    access::AuditLog audit(clock);
    access::AccessController ac(clock, "k", audit);
    std::map<std::string, store::DigitalObject> live;
    {
      store::ObjectStore st(ac, tmp / "journal.jsonl");
      std::vector<std::thread> threads;
      for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
          for (std::size_t i = static_cast<std::size_t>(t); i < writes.size(); i += 4) st.commit(writes[i], "put");
        });
      }
      for (auto& th : threads) th.join();
      for (const auto& o : st.snapshot()) live[o.object_id] = o;
    }
    store::ObjectStore replayed(ac, tmp / "journal.jsonl");
    std::map<std::string, store::DigitalObject> back;
    for (const auto& o : replayed.snapshot()) back[o.object_id] = o;
    if (live != expected || back != expected) ++divergent;
  }
  std::filesystem::remove_all(tmp);
  std::ostringstream d;
  d << kConvergenceSchedules << " schedules x (" << kConvergenceReplicas
    << " shuffled replays + threaded commit + journal replay), " << divergent << " divergent";
  return {divergent == 0, d.str()};
}

// ---------------------------------------------------------------------------

void collect_strings(const json& j, std::vector<std::string>& out) {
  if (j.is_string()) {
    out.push_back(j.get<std::string>());
  } else if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      out.push_back(k);
      collect_strings(v, out);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) collect_strings(v, out);
  }
}

std::vector<json> anonymization_run(const std::string& key, access::CredentialDirectory& dir_out) {
  udi::testing::World w(kAnonPatients);
  dir_out = w.eco->directory();
  std::mt19937_64 rng(909);
  const Session staff = w.staff();
  const auto creds = w.eco->directory().all();
  for (int i = 1; i <= kAnonPatients; ++i) {
    const std::string pid = "P-" + std::to_string(i);
    const auto* c = w.eco->directory().find_patient(pid);
    // Free text that names people, as clinicians do.
    const auto& other = creds[draw(rng, creds.size())];
    w.eco->put_patient(pid,
                       {{"medical_focus",
                         {{"demographics", {{"birthdate", c->birthdate}, {"name", c->display_name}}},
                          {"notes", "Referred by " + other.display_name + ", card " + c->credential_id},
                          {"follow_ups", json::array({"call " + c->display_name, "check wound"})},
                          {"weight_kg", 60 + static_cast<double>(draw(rng, 40))}}}},
                       staff);
    const auto u = udi::testing::make_udi("04006381" + std::to_string(20000 + i), "LOT" + std::to_string(i),
                                          "SN" + std::to_string(500000 + i));
    w.eco->ingest_producer_feed("feed", json::array({udi::testing::technical_record(u, udi::testing::kAcme, true, 2000 + i)}),
                                w.acme());
    w.eco->link_implant(core::format_udi(u), pid, {{"procedure", "TKA"}, {"notes", "assisted by " + other.display_name}},
                        staff);
  }
  return w.eco->export_anonymized({}, key, staff).records;
}

Outcome anonymization() {
  access::CredentialDirectory dir;
  const auto a = anonymization_run("export-key-1", dir);
  const auto b = anonymization_run("export-key-1", dir);
  const auto c = anonymization_run("export-key-2", dir);

  std::vector<std::string> identifiers;
  for (const auto& id : dir.direct_identifiers()) {
    if (id.size() >= 3) identifiers.push_back(id);
  }
  std::size_t strings = 0, leaks = 0;
  for (const auto& rec : a) {
    std::vector<std::string> all;
    collect_strings(rec, all);
    for (const auto& s : all) {
      ++strings;
      for (const auto& id : identifiers) {
        if (s.find(id) != std::string::npos) ++leaks;
      }
    }
  }
  const auto pseudonyms = [](const std::vector<json>& recs) {
    std::set<std::string> out;
    for (const auto& r : recs) {
      out.insert(r.at("record_id").get<std::string>());
      if (r.contains("patient")) out.insert(r.at("patient").get<std::string>());
    }
    return out;
  };
  const bool stable = pseudonyms(a) == pseudonyms(b) && json(a) == json(b);
  std::set<std::string> shared;
  const auto pa = pseudonyms(a), pc = pseudonyms(c);
  std::set_intersection(pa.begin(), pa.end(), pc.begin(), pc.end(), std::inserter(shared, shared.begin()));
  std::ostringstream d;
  d << a.size() << " records, " << strings << " strings scanned against " << identifiers.size() << " identifiers, "
    << leaks << " leaks; same key stable " << (stable ? "yes" : "no") << "; pseudonyms shared across keys "
    << shared.size();
  return {leaks == 0 && stable && shared.empty() && !a.empty(), d.str()};
}

// ---------------------------------------------------------------------------

Outcome revision_scenario() {
  const auto report = scenario::run_scenario("revision", {});
  const auto& d = report.details;
  if (!d.contains("surgeon_report") || !d.contains("producer_feed_record")) {
    return {false, "exit " + std::to_string(report.exit_code) + ", failing step " + report.failing_step.value_or("-")};
  }
  const json& feed = d.at("producer_feed_record");
  bool instruments = false;
  for (const auto& i : d.at("surgeon_report").at("implants")) {
    if (i.at("udi") == feed.at("DeviceUDI")) {
      instruments = i.at("revision_instruments").dump() == feed.at("RevisionInstruments").dump();
    }
  }
  const bool decoded = d.at("decoded_marking") == d.at("marking") && d.at("marking") == feed.at("MarkingPharmacode");
  std::ostringstream s;
  s << "exit " << report.exit_code << "; decoded " << d.at("decoded_marking") << " vs marking " << d.at("marking")
    << "; instrument list byte-identical " << (instruments ? "yes" : "no");
  return {report.exit_code == 0 && decoded && instruments, s.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"symbology round trips", symbology_round_trips},
      {"error-correction bound (10x10)", error_correction_bound},
      {"readout robustness", readout_robustness},
      {"access matrix", access_matrix},
      {"emergency temporality", emergency_temporality},
      {"audit integrity", audit_integrity},
      {"federation oracle", federation_oracle},
      {"store convergence", store_convergence},
      {"anonymization", anonymization},
      {"end-to-end revision scenario", revision_scenario},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < kMaxSeconds;
    if (!pass) ++failed;
    std::printf("criterion %2zu %s %s: %s [%.1f s]\n", i + 1, pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
