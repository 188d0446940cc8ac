#include "udi/scenario/scenario.hpp"

#include <algorithm>
#include <memory>
#include <random>
#include <sstream>

#include "udi/core/udi.hpp"
#include "udi/error.hpp"
#include "udi/readout/pipeline.hpp"
#include "udi/readout/signal.hpp"
#include "udi/symbology/pharmacode.hpp"

namespace udi::scenario {

using access::Role;
using access::Section;
using federation::Ecosystem;

namespace {

constexpr const char* kPatientId = "P-0001";
constexpr const char* kManufacturer = "Orthoforge Additive GmbH";
constexpr const char* kSource = "orthoforge-feed";

struct Fixture {
  core::UdiRecord udi;
  std::int32_t marking = 0;
  nlohmann::json full_record;
  nlohmann::json partial_record;
  std::string vitals_csv;
  std::size_t vitals_rows = 0;
};

/// Seeded draws that do not depend on the standard library's distributions.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  std::uint64_t below(std::uint64_t n) { return rng_() % n; }
  std::string digits(int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += static_cast<char>('0' + below(10));
    return s;
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 rng_;
};

Fixture make_fixture(std::uint64_t seed) {
  Draw d(seed);
  Fixture f;
  const std::string body = "0" + d.digits(12);
  f.udi.device_identifier = body + std::to_string(core::gtin_check_digit(body));
  f.udi.manufacture_date = std::chrono::year{2025} / std::chrono::month{static_cast<unsigned>(1 + d.below(12))} /
                           std::chrono::day{static_cast<unsigned>(1 + d.below(28))};
  f.udi.expiry_date = std::chrono::year{2035} / f.udi.manufacture_date.month() / f.udi.manufacture_date.day();
  f.udi.lot = "SLM" + d.digits(5);
  f.udi.serial = "HC" + d.digits(8);
  f.marking = static_cast<std::int32_t>(symbology::pharmacode::kMinValue +
                                        d.below(symbology::pharmacode::kMaxValue - symbology::pharmacode::kMinValue + 1));

  const std::vector<std::string> extractors{"Cup extractor CX-52", "Cup extractor CX-54", "Cup extractor CX-56"};
  const std::vector<std::string> chisels{"Curved osteotome set OT-3", "Flexible chisel FC-12"};
  const std::vector<std::string> liners{"Liner removal tool LR-1", "Liner removal tool LR-2"};
  nlohmann::json instruments = nlohmann::json::array({d.pick(extractors), d.pick(chisels), d.pick(liners),
                                                      "Screw driver hex 3.5 mm"});
  nlohmann::json components = nlohmann::json::array({"PE liner 36 mm", "Ceramic head 36 mm", "Bone screw 6.5 x 25"});
  const double roughness = 18.0 + static_cast<double>(d.below(120)) / 10.0;

  f.partial_record = {{"DeviceUDI", core::format_udi(f.udi)},
                      {"Manufacturer", kManufacturer},
                      {"Model", "Porous acetabular cup 54 mm"},
                      {"PowderLot", "Ti6Al4V-ELI-" + d.digits(4)},
                      {"BuildParameters", {{"laser_power_w", 280}, {"scan_speed_mm_s", 1200}, {"layer_um", 30}}},
                      {"MarkingPharmacode", f.marking}};
  f.full_record = f.partial_record;
  f.full_record["MeltPoolMonitoring"] = {{"anomalies", d.below(3)}, {"layers", 1800}};
  f.full_record["PostTreatment"] = "HIP 920 C / 100 MPa / 2 h";
  f.full_record["CTInspection"] = {{"max_pore_um", 80 + d.below(60)}, {"verdict", "pass"}};
  f.full_record["RoughnessRa_um"] = roughness;
  f.full_record["RevisionInstruments"] = instruments;
  f.full_record["Components"] = components;
  f.full_record["ProcessSummary"] = "SLM build, stress relief, HIP, CT inspected, cleaned and sterilized";

  std::ostringstream csv;
  csv << "timestamp,vital_name,value\n";
  for (int i = 0; i < 12; ++i) {
    const std::int64_t t = kScenarioEpoch + 600 + i * 300;
    csv << t << ",heart_rate," << 62 + d.below(20) << "\n";
    csv << t << ",SpO2," << 95 + d.below(4) << "\n";
    f.vitals_rows += 2;
  }
  f.vitals_csv = csv.str();
  return f;
}

federation::SourceAdapter feed_adapter() {
  federation::SourceAdapter a;
  a.source_name = kSource;
  a.kind = federation::SourceKind::producer_feed;
  a.mapping.source_name = kSource;
  a.mapping.section = Section::technical_focus;
  const std::vector<std::pair<const char*, const char*>> maps{
      {"DeviceUDI", "udi"},
      {"Manufacturer", "manufacturer"},
      {"Model", "device_name"},
      {"PowderLot", "material_lot"},
      {"BuildParameters", "static_process_parameters"},
      {"MeltPoolMonitoring", "in_process_parameters"},
      {"PostTreatment", "post_treatment"},
      {"CTInspection", "ndt_results"},
      {"RevisionInstruments", "revision_instruments"},
      {"Components", "compatible_components"},
      {"ProcessSummary", "process_summary"},
      {"MarkingPharmacode", "marking_pharmacode"}};
  for (const auto& [src, dst] : maps) a.mapping.field_maps.push_back({src, dst, std::nullopt, std::nullopt});
  a.mapping.field_maps.push_back({"RoughnessRa_um", "surface_roughness_um", std::nullopt, std::string("number")});
  a.mapping.required_fields = {"udi", "manufacturer", "device_name"};
  return a;
}

access::CredentialDirectory make_directory() {
  access::CredentialDirectory dir;
  dir.enroll({"pat-anna", Role::user, "", "", "Anna Lindqvist", kPatientId, "1961-04-12", "Hafenstrasse 12, Rostock",
              "HC-7730-1182", },
             "anna-secret");
  dir.enroll({"dr-berg", Role::medical_staff, "", "", "Dr. Jonas Berg", "", "", "", "BADGE-0042"}, "berg-secret");
  dir.enroll({"prod-orthoforge", Role::producer, "", "", "Orthoforge Feed Service", kManufacturer, "", "", "PRD-19"},
             "forge-secret");
  dir.enroll({"resp-kim", Role::first_responder, "", "", "Kim Sommer", "", "", "", "EMS-311"}, "kim-secret");
  return dir;
}

class Run {
 public:
  Run(const std::string& name, const ScenarioOptions& opt)
      : clock_(from_unix(kScenarioEpoch)), opt_(opt), fixture_(make_fixture(opt.seed)) {
    report_.scenario = name;
    report_.seed = opt.seed;
    federation::EcosystemConfig cfg = opt.config;
    cfg.store_dir = opt.store_dir;
    eco_ = std::make_unique<Ecosystem>(clock_, cfg, make_directory());
  }

  ScenarioReport finish() {
    check("audit_chain_verifies", eco_->verify_audit().ok);
    bool refs_ok = true;
    const auto entries = eco_->audit().entries();
    for (const auto& s : report_.steps) {
      if (s.audit_seq && (*s.audit_seq == 0 || *s.audit_seq > entries.size())) refs_ok = false;
    }
    check("step_audit_refs_resolve", refs_ok);
    report_.details["audit_entries"] = entries.size();
    report_.details["audit_head"] = eco_->audit().head_hash();
    report_.exit_code = 0;
    for (const auto& a : report_.assertions) {
      if (!a.pass) report_.exit_code = 1;
    }
    if (report_.failing_step) report_.exit_code = 1;
    return report_;
  }

  /// Runs one step; the audit reference is the newest entry it produced.
  template <typename F>
  bool step(const std::string& actor, const std::string& action, F f) {
    if (report_.failing_step) return false;
    const std::size_t before = eco_->audit().size();
    std::string outcome;
    bool ok = true;
    try {
      outcome = f();
    } catch (const Error& e) {
      outcome = std::string("failed: ") + e.what();
      ok = false;
    }
    const std::size_t after = eco_->audit().size();
    report_.steps.push_back({actor, action, outcome, after > before ? std::optional<std::uint64_t>(after) : std::nullopt});
    if (!ok) report_.failing_step = action;
    return ok;
  }

  /// A step whose expected result is a specific error.
  template <typename F>
  void expect_error(const std::string& actor, const std::string& action, ErrorCode expected, F f) {
    step(actor, action, [&]() -> std::string {
      try {
        f();
      } catch (const Error& e) {
        if (e.code() == expected) return "rejected as expected: " + std::string(to_string(e.code()));
        throw;
      }
      throw Error(ErrorCode::ScenarioFailed, "expected " + std::string(to_string(expected)));
    });
  }

  void check(const std::string& name, bool pass) { report_.assertions.push_back({name, pass}); }

  access::Session login(const std::string& subject, const std::string& secret) {
    access::Session s;
    step(subject, "authenticate", [&] {
      s = eco_->authenticate(subject, secret);
      return "session as " + std::string(access::to_string(s.role));
    });
    return s;
  }

  void implant_flow() {
    const access::Session staff = login("dr-berg", "berg-secret");
    step("dr-berg", "enroll_patient", [&] {
      const nlohmann::json sections{
          {"medical_focus",
           {{"demographics", {{"sex", "F"}, {"birthdate", "1961-04-12"}}},
            {"weight_kg", 68.5},
            {"imaging_references", nlohmann::json::array({"HIS:DICOM:1.2.826.0.1.3680043.2.1143.7731"})}}}};
      return "version " + std::to_string(eco_->put_patient(kPatientId, sections, staff));
    });
    step("admin", "register_source", [&] {
      eco_->register_source(feed_adapter(), eco_->config().admin_secret);
      return std::string("registered ") + kSource;
    });
    const access::Session producer = login("prod-orthoforge", "forge-secret");

    bool blocked_first = false;
    step("prod-orthoforge", "ingest_partial_feed", [&] {
      const auto r = eco_->ingest_producer_feed(kSource, nlohmann::json::array({fixture_.partial_record}), producer);
      if (r.applied() != 1) throw Error(ErrorCode::ScenarioFailed, r.to_json().dump());
      blocked_first = r.results[0].procurement_cleared == false;
      return "applied, procurement " + std::string(blocked_first ? "blocked" : "cleared");
    });
    check("procurement_blocked_without_revision_instruments", blocked_first);
    expect_error("dr-berg", "link_before_procurement", ErrorCode::ProcurementIncomplete,
                 [&] { eco_->link_implant(core::format_udi(fixture_.udi), kPatientId, nullptr, staff); });

    clock_.advance(Seconds{60});
    bool cleared = false;
    step("prod-orthoforge", "ingest_full_feed", [&] {
      const auto r = eco_->ingest_producer_feed(kSource, nlohmann::json::array({fixture_.full_record}), producer);
      if (r.applied() != 1) throw Error(ErrorCode::ScenarioFailed, r.to_json().dump());
      cleared = r.results[0].procurement_cleared == true;
      return "applied, procurement " + std::string(cleared ? "cleared" : "blocked");
    });
    check("procurement_cleared_with_full_feed", cleared);

    clock_.advance(Seconds{3600});
    const access::Session staff2 = login("dr-berg", "berg-secret");
    step("dr-berg", "link_implant", [&] {
      const auto l = eco_->link_implant(core::format_udi(fixture_.udi), kPatientId,
                                        {{"procedure", "Total hip arthroplasty, left"}, {"surgery_date", "2026-01-05"}},
                                        staff2);
      surgery_id_ = l.surgery_id;
      return "linked as " + l.surgery_id;
    });
    check("implant_linked", !surgery_id_.empty());
    expect_error("dr-berg", "relink_same_serial", ErrorCode::DuplicateLink,
                 [&] { eco_->link_implant(core::format_udi(fixture_.udi), kPatientId, nullptr, staff2); });

    const access::Session patient = login("pat-anna", "anna-secret");
    access::Session watch;
    step("pat-anna", "issue_device_capability", [&] {
      watch = eco_->device_capability(patient, "watch-01");
      return std::string("capability for watch-01");
    });
    std::size_t accepted = 0;
    step("watch-01", "ingest_vitals", [&] {
      accepted = eco_->ingest_vitals(kPatientId, fixture_.vitals_csv, watch).accepted;
      return std::to_string(accepted) + " rows accepted";
    });
    check("all_vitals_accepted", accepted == fixture_.vitals_rows);

    std::size_t visible = 0;
    step("pat-anna", "read_own_record", [&] {
      visible = eco_->store().get_object(federation::patient_object_id(kPatientId), patient).sections.size();
      return std::to_string(visible) + " sections visible";
    });
    check("patient_sees_all_own_sections", visible == 2);
    const access::Session producer2 = login("prod-orthoforge", "forge-secret");
    expect_error("prod-orthoforge", "read_patient_record", ErrorCode::AccessDenied,
                 [&] { eco_->store().get_object(federation::patient_object_id(kPatientId), producer2); });
  }

  void revision_flow() {
    implant_flow();
    if (report_.failing_step) return;
    clock_.advance(Seconds{86400 * 30});

    readout::ReadoutParams p;
    p.blur_sigma_modules = opt_.blur;
    p.noise_sigma_fraction = opt_.noise;
    p.attenuation = 0.3;
    p.rng_seed = opt_.seed;
    readout::SignalTrace trace;
    step("scanner", "synthesize_marking_trace", [&] {
      trace = readout::synthesize_trace(symbology::pharmacode_encode(fixture_.marking), p);
      return std::to_string(trace.samples.size()) + " samples";
    });
    std::int32_t decoded = -1;
    step("scanner", "decode", [&] {
      decoded = std::get<std::int32_t>(readout::decode_trace(trace, readout::Symbology1D::pharmacode));
      return "pharmacode " + std::to_string(decoded);
    });
    report_.details["producer_feed_record"] = fixture_.full_record;
    report_.details["marking"] = fixture_.marking;
    report_.details["decoded_marking"] = decoded;
    report_.details["readout"] = {{"blur_sigma_modules", p.blur_sigma_modules},
                                  {"noise_sigma_fraction", p.noise_sigma_fraction},
                                  {"attenuation", p.attenuation},
                                  {"samples_per_module", p.samples_per_module}};
    if (report_.failing_step) return;
    check("decoded_marking_matches_linked_implant", decoded == fixture_.marking);

    const access::Session surgeon = login("dr-berg", "berg-secret");
    std::string udi;
    step("dr-berg", "resolve_udi", [&] {
      udi = eco_->resolve_marking(decoded, surgeon);
      return udi;
    });
    check("resolved_udi_matches", udi == core::format_udi(fixture_.udi));

    federation::SurgeonReport rep;
    step("dr-berg", "surgeon_report", [&] {
      rep = eco_->surgeon_report(udi, surgeon);
      return std::to_string(rep.document.at("implants").size()) + " implants, " +
             std::to_string(rep.document.at("warnings").size()) + " warnings";
    });
    bool instruments_match = false;
    if (rep.document.contains("implants")) {
      for (const auto& i : rep.document.at("implants")) {
        if (i.at("udi") == udi) {
          instruments_match = i.at("revision_instruments").dump() == fixture_.full_record.at("RevisionInstruments").dump();
        }
      }
    }
    check("revision_instruments_match_feed", instruments_match);
    report_.details["surgeon_report"] = rep.document;
    report_.details["surgeon_report_text"] = rep.text;
  }

  void emergency_flow() {
    implant_flow();
    if (report_.failing_step) return;
    clock_.advance(Seconds{86400});
    const Timestamp t0 = clock_.now();

    const access::Session patient = login("pat-anna", "anna-secret");
    access::Session watch;
    step("pat-anna", "issue_device_capability", [&] {
      watch = eco_->device_capability(patient, "watch-01");
      return std::string("capability for watch-01");
    });
    const access::Session responder = login("resp-kim", "kim-secret");
    expect_error("resp-kim", "read_without_grant", ErrorCode::AccessDenied,
                 [&] { eco_->store().get_object(federation::patient_object_id(kPatientId), responder); });

    Draw d(opt_.seed ^ 0x9e3779b97f4a7c15ULL);
    const std::int64_t spo2_at = to_unix(t0) + 5 + static_cast<std::int64_t>(d.below(20));
    const std::int64_t sys_at = spo2_at + 5 + static_cast<std::int64_t>(d.below(30));

    std::ostringstream first;
    first << spo2_at << ",SpO2," << 80 + d.below(8) << "\n";
    step("watch-01", "stream_single_breach", [&] {
      return std::to_string(eco_->ingest_vitals(kPatientId, first.str(), watch).accepted) + " rows accepted";
    });
    clock_.set(from_unix(spo2_at + 1));
    bool single_granted = true;
    step("resp-kim", "evaluate_single_condition", [&] {
      single_granted = eco_->evaluate_emergency(kPatientId, responder).has_value();
      return std::string(single_granted ? "granted" : "no grant");
    });
    check("single_condition_never_grants", !single_granted);

    std::ostringstream second;
    second << sys_at << ",systolic," << 65 + d.below(12) << "\n";
    step("watch-01", "stream_second_breach", [&] {
      return std::to_string(eco_->ingest_vitals(kPatientId, second.str(), watch).accepted) + " rows accepted";
    });
    clock_.set(from_unix(sys_at + 2));
    std::optional<access::EmergencyGrant> grant;
    step("resp-kim", "evaluate_emergency", [&] {
      grant = eco_->evaluate_emergency(kPatientId, responder);
      if (!grant) return std::string("no grant");
      return "granted [" + std::to_string(to_unix(grant->granted_at)) + ", " + std::to_string(to_unix(grant->expires_at)) + ")";
    });
    check("grant_issued_for_simultaneous_breaches", grant.has_value());
    if (!grant) return;
    check("grant_starts_at_latest_breach", to_unix(grant->granted_at) == sys_at);
    check("grant_ttl_matches_policy", grant->expires_at - grant->granted_at == eco_->config().emergency_policy.grant_ttl);
    report_.details["grant"] = access::to_json(*grant);

    bool read_ok = false;
    step("resp-kim", "read_with_grant", [&] {
      const auto v = eco_->store().get_object(federation::patient_object_id(kPatientId), responder);
      read_ok = v.sections.contains(Section::medical_focus);
      return std::to_string(v.sections.size()) + " sections visible";
    });
    check("responder_reads_during_grant", read_ok);
    expect_error("resp-kim", "write_with_grant", ErrorCode::AccessDenied, [&] {
      eco_->put_patient(kPatientId, {{"medical_focus", {{"notes", "responder note"}}}}, responder);
    });

    clock_.set(grant->expires_at - Seconds{1});
    const access::Session responder2 = login("resp-kim", "kim-secret");
    bool before_expiry = false;
    step("resp-kim", "read_before_expiry", [&] {
      before_expiry = !eco_->store().get_object(federation::patient_object_id(kPatientId), responder2).sections.empty();
      return std::string("allowed");
    });
    check("allowed_one_second_before_expiry", before_expiry);
    clock_.set(grant->expires_at);
    expect_error("resp-kim", "read_after_expiry", ErrorCode::AccessDenied,
                 [&] { eco_->store().get_object(federation::patient_object_id(kPatientId), responder2); });
  }

 private:
  ManualClock clock_;
  ScenarioOptions opt_;
  Fixture fixture_;
  ScenarioReport report_;
  std::unique_ptr<Ecosystem> eco_;
  std::string surgery_id_;
};

}  // namespace

nlohmann::json ScenarioReport::to_json() const {
  nlohmann::json steps_json = nlohmann::json::array();
  for (const auto& s : steps) {
    steps_json.push_back({{"actor", s.actor},
                          {"action", s.action},
                          {"outcome", s.outcome},
                          {"audit_seq", s.audit_seq ? nlohmann::json(*s.audit_seq) : nlohmann::json(nullptr)}});
  }
  nlohmann::json asserts = nlohmann::json::array();
  for (const auto& a : assertions) asserts.push_back({{"name", a.name}, {"result", a.pass ? "pass" : "fail"}});
  return {{"scenario", scenario},
          {"seed", seed},
          {"steps", steps_json},
          {"assertions", asserts},
          {"failing_step", failing_step ? nlohmann::json(*failing_step) : nlohmann::json(nullptr)},
          {"details", details},
          {"exit_code", exit_code}};
}

std::string ScenarioReport::summary() const {
  std::ostringstream out;
  out << "scenario " << scenario << " seed " << seed << "\n";
  for (const auto& s : steps) {
    out << "  [" << (s.audit_seq ? std::to_string(*s.audit_seq) : std::string("-")) << "] " << s.actor << " "
        << s.action << ": " << s.outcome << "\n";
  }
  for (const auto& a : assertions) out << "  " << (a.pass ? "PASS " : "FAIL ") << a.name << "\n";
  if (failing_step) out << "  failing step: " << *failing_step << "\n";
  out << "exit " << exit_code << "\n";
  return out.str();
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"implant", "revision", "emergency"};
  return names;
}

ScenarioReport run_scenario(const std::string& name, const ScenarioOptions& options) {
  if (std::find(scenario_names().begin(), scenario_names().end(), name) == scenario_names().end()) {
    fail(ErrorCode::InvalidInput, "unknown scenario '" + name + "'");
  }
  if (options.store_dir && std::filesystem::exists(*options.store_dir) &&
      !std::filesystem::is_empty(*options.store_dir)) {
    fail(ErrorCode::InvalidInput, "store directory " + options.store_dir->string() + " is not empty");
  }
  Run run(name, options);
  if (name == "implant") run.implant_flow();
  if (name == "revision") run.revision_flow();
  if (name == "emergency") run.emergency_flow();
  return run.finish();
}

}  // namespace udi::scenario
