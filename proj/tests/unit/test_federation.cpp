#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "test_support.hpp"
#include "udi/access/audit.hpp"
#include "udi/access/policy.hpp"
#include "udi/federation/server.hpp"

using namespace udi;
using namespace udi::federation;
using access::Session;
using udi::testing::kT0;
using udi::testing::World;

namespace {

template <typename F>
ErrorCode code_of(F f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidInput;
}

const core::UdiRecord kStem = udi::testing::make_udi("0400638133393", "SLM00001", "HC00000001");

/// Patient P-1 with one linked Acme implant and a few vitals.
struct Linked : World {
  Session staff_s, acme_s;
  std::string surgery_id;

  Linked() {
    staff_s = staff();
    acme_s = acme();
    eco->put_patient("P-1", {{"medical_focus", {{"weight_kg", 70.0}}}}, staff_s);
    const auto r = eco->ingest_producer_feed(
        "feed", nlohmann::json::array({udi::testing::technical_record(kStem, udi::testing::kAcme, true, 4711)}), acme_s);
    REQUIRE(r.applied() == 1);
    surgery_id = eco->link_implant(core::format_udi(kStem), "P-1", {{"procedure", "THA"}}, staff_s).surgery_id;
    const Session watch = eco->device_capability(patient(1), "w1");
    eco->ingest_vitals("P-1", "ts,name,value\n" + std::to_string(kT0) + ",heart_rate,71\n", watch);
  }
};

}  // namespace

TEST_CASE("config json rejects unknown keys and applies environment") {
  const auto c = EcosystemConfig::from_json({{"port", 9001}, {"session_ttl_s", 120}});
  CHECK(c.port == 9001);
  CHECK(c.session_ttl == Seconds{120});
  CHECK(code_of([] { EcosystemConfig::from_json({{"prot", 1}}); }) == ErrorCode::InvalidInput);
  EcosystemConfig e;
  setenv("UDI_PORT", "9123", 1);
  setenv("UDI_SERVER_KEY", "env-key", 1);
  e.apply_environment();
  unsetenv("UDI_PORT");
  unsetenv("UDI_SERVER_KEY");
  CHECK(e.port == 9123);
  CHECK(e.server_key == "env-key");
}

TEST_CASE("source registration needs the admin secret and is idempotent") {
  World w;
  CHECK(code_of([&] { w.eco->register_source(udi::testing::identity_source("x"), "wrong"); }) ==
        ErrorCode::AccessDenied);
  CHECK_NOTHROW(w.eco->register_source(udi::testing::identity_source("feed"), w.config.admin_secret));
  auto changed = udi::testing::identity_source("feed");
  changed.mapping.required_fields = {"udi"};
  CHECK(code_of([&] { w.eco->register_source(changed, w.config.admin_secret); }) == ErrorCode::DuplicateSource);
  auto vitals = udi::testing::identity_source("v");
  vitals.kind = SourceKind::vitals_stream;
  CHECK(code_of([&] { w.eco->register_source(vitals, w.config.admin_secret); }) == ErrorCode::InvalidMapping);
}

TEST_CASE("producer feed is per record and gates procurement") {
  World w;
  const Session acme = w.acme();
  const auto u2 = udi::testing::make_udi("0400638133393", "L2", "S2");
  nlohmann::json batch = nlohmann::json::array(
      {udi::testing::technical_record(kStem, udi::testing::kAcme, false),
       udi::testing::technical_record(u2, udi::testing::kForge, true), nlohmann::json{{"nonsense", 1}}});
  const auto r = w.eco->ingest_producer_feed("feed", batch, acme);
  REQUIRE(r.results.size() == 3);
  CHECK(r.results[0].ok);
  CHECK(r.results[0].procurement_cleared == false);
  CHECK_FALSE(r.results[1].ok);
  CHECK(r.results[1].error == "AccessDenied");
  CHECK(r.results[1].audit_seq.has_value());
  CHECK(r.results[2].error == "UnknownField");
  CHECK(r.applied() == 1);
  CHECK(code_of([&] { w.eco->ingest_producer_feed("feed", batch, w.staff()); }) == ErrorCode::AccessDenied);
  CHECK(code_of([&] { w.eco->ingest_producer_feed("nope", batch, acme); }) == ErrorCode::NotFound);

  const Session staff = w.staff();
  w.eco->put_patient("P-1", {{"medical_focus", {{"notes", "x"}}}}, staff);
  CHECK(code_of([&] { w.eco->link_implant(core::format_udi(kStem), "P-1", nullptr, staff); }) ==
        ErrorCode::ProcurementIncomplete);
}

TEST_CASE("linking is staff-only and one-to-one") {
  Linked w;
  CHECK(w.surgery_id == "surgery:P-1:1");
  const auto implant = *w.eco->store().peek(implant_object_id(kStem.device_identifier, kStem.serial));
  CHECK(implant.metadata.at("patient_id") == "P-1");
  CHECK(implant.metadata.at("surgery_id") == w.surgery_id);
  CHECK(code_of([&] { w.eco->link_implant(core::format_udi(kStem), "P-1", nullptr, w.staff_s); }) ==
        ErrorCode::DuplicateLink);
  CHECK(code_of([&] { w.eco->link_implant(core::format_udi(kStem), "P-2", nullptr, w.acme_s); }) ==
        ErrorCode::AccessDenied);
  const auto other = udi::testing::make_udi("0400638133393", "L9", "S9");
  CHECK(code_of([&] { w.eco->link_implant(core::format_udi(other), "P-1", nullptr, w.staff_s); }) ==
        ErrorCode::NotFound);
}

TEST_CASE("vitals csv rows are validated individually") {
  Linked w;
  const Session watch = w.eco->device_capability(w.patient(1), "w2");
  const std::string t = std::to_string(kT0 + 10);
  const auto r = w.eco->ingest_vitals(
      "P-1", t + ",SpO2,97\n" + t + ",mood,3\nbad\n" + t + ",systolic,abc\n" + t + ",systolic,120\n", watch);
  CHECK(r.accepted == 2);
  CHECK(r.errors.size() == 3);
  CHECK(code_of([&] { w.eco->ingest_vitals("P-404", t + ",SpO2,97\n", watch); }) == ErrorCode::NotFound);
  w.eco->put_patient("P-2", {{"medical_focus", {{"notes", "x"}}}}, w.staff_s);
  CHECK(code_of([&] { w.eco->ingest_vitals("P-2", t + ",SpO2,97\n", watch); }) == ErrorCode::AccessDenied);
}

TEST_CASE("federated view is section-filtered per role") {
  Linked w;
  const std::string key = core::format_udi(kStem);
  const auto staff_view = w.eco->federated_view(key, w.staff_s);
  CHECK(staff_view.patient.at("patient_id") == "P-1");
  CHECK(staff_view.implants.size() == 1);
  CHECK(staff_view.surgeries.size() == 1);
  CHECK(staff_view.vitals_summary.at("heart_rate").at("count") == 1);

  const auto acme_view = w.eco->federated_view(key, w.acme_s);
  CHECK(acme_view.patient.is_null());
  CHECK(acme_view.implants.size() == 1);
  CHECK(acme_view.surgeries.empty());
  CHECK(acme_view.vitals_summary.is_null());

  const auto own = w.eco->federated_view("P-1", w.patient(1));
  CHECK(own.implants.size() == 1);
  CHECK(code_of([&] { w.eco->federated_view("P-1", w.patient(2)); }) == ErrorCode::AccessDenied);
  CHECK(code_of([&] { w.eco->federated_view("P-404", w.staff_s); }) == ErrorCode::NotFound);
  CHECK(w.eco->resolve_marking(4711, w.staff_s) == key);
  CHECK(code_of([&] { w.eco->resolve_marking(4712, w.staff_s); }) == ErrorCode::NotFound);
}

TEST_CASE("surgeon report lists the feed's revision instruments") {
  Linked w;
  const auto rep = w.eco->surgeon_report(core::format_udi(kStem), w.staff_s);
  const auto& imp = rep.document.at("implants").at(0);
  CHECK(imp.at("revision_instruments") ==
        udi::testing::technical_record(kStem, udi::testing::kAcme, true).at("revision_instruments"));
  CHECK(rep.text.find("stem extractor 12/14") != std::string::npos);
  CHECK(rep.text == render_report(rep.document));
  CHECK(code_of([&] { w.eco->surgeon_report("P-1", w.acme_s); }) == ErrorCode::AccessDenied);
}

TEST_CASE("ecosystem emergency evaluation uses stored vitals") {
  Linked w;
  const Session r = w.responder();
  CHECK_FALSE(w.eco->evaluate_emergency("P-1", r));
  const Session watch = w.eco->device_capability(w.patient(1), "w3");
  w.clock.advance(Seconds{100});
  const auto t = std::to_string(to_unix(w.clock.now()));
  w.eco->ingest_vitals("P-1", t + ",SpO2,84\n" + t + ",systolic,72\n", watch);
  const auto g = w.eco->evaluate_emergency("P-1", r);
  REQUIRE(g);
  CHECK(g->granted_at == w.clock.now());
  CHECK(w.eco->store().get_object(patient_object_id("P-1"), r).sections.size() == 2);
  CHECK(code_of([&] { w.eco->evaluate_emergency("P-1", w.staff_s); }) == ErrorCode::AccessDenied);
}

TEST_CASE("export through the facade is pseudonymous") {
  Linked w;
  const auto r1 = w.eco->export_anonymized({{"kind", "implant"}}, "k", w.staff_s);
  REQUIRE(r1.records.size() == 1);
  const std::string text = r1.to_jsonl();
  CHECK(text.find(kStem.serial) == std::string::npos);
  CHECK(text.find(kStem.device_identifier) != std::string::npos);
  CHECK(w.eco->verify_audit().ok);
}

TEST_CASE("http api over loopback") {
  Linked w;
  ApiServer server(*w.eco);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread th([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);

  auto auth = cli.Post("/auth", R"({"subject_id":"dr-a","secret":"pw-dr"})", "application/json");
  REQUIRE(auth);
  CHECK(auth->status == 200);
  const std::string session = auth->body;
  httplib::Headers h{{"X-Session", session}};

  auto bad = cli.Post("/auth", R"({"subject_id":"dr-a","secret":"nope"})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 401);
  const auto err = nlohmann::json::parse(bad->body);
  CHECK(err.at("error") == "BadSecret");
  CHECK(err.at("audit_seq").is_number());

  auto rec = cli.Get("/patients/P-1/record", h);
  REQUIRE(rec);
  CHECK(rec->status == 200);
  CHECK(nlohmann::json::parse(rec->body).at("object_id") == "patient:P-1");

  const std::string udi = core::format_udi(kStem);
  auto imp = cli.Get("/implants/" + httplib::detail::encode_url(udi), h);
  REQUIRE(imp);
  CHECK(imp->status == 200);

  auto view = cli.Get("/view/P-1", h);
  REQUIRE(view);
  CHECK(nlohmann::json::parse(view->body).at("implants").size() == 1);

  auto report = cli.Get("/report/P-1", h);
  REQUIRE(report);
  CHECK(report->status == 200);

  auto noauth = cli.Get("/patients/P-1/record");
  REQUIRE(noauth);
  CHECK(noauth->status == 401);

  auto acme_auth = cli.Post("/auth", R"({"subject_id":"prod-acme","secret":"pw-acme"})", "application/json");
  httplib::Headers ha{{"X-Session", acme_auth->body}};
  auto denied = cli.Get("/patients/P-1/record", ha);
  REQUIRE(denied);
  CHECK(denied->status == 403);
  CHECK(nlohmann::json::parse(denied->body).at("audit_seq").is_number());

  nlohmann::json batch{{"source", "feed"},
                       {"records", nlohmann::json::array({udi::testing::technical_record(
                                       udi::testing::make_udi("0400638133393", "L5", "S5"), udi::testing::kAcme, true)})}};
  auto mismatch = cli.Post("/implants/" + httplib::detail::encode_url(udi) + "/technical", ha, batch.dump(),
                           "application/json");
  REQUIRE(mismatch);
  CHECK(mismatch->status == 400);
  batch["records"] = nlohmann::json::array({udi::testing::technical_record(kStem, udi::testing::kAcme, true, 4711)});
  auto ok = cli.Post("/implants/" + httplib::detail::encode_url(udi) + "/technical", ha, batch.dump(),
                     "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 200);

  auto pat = cli.Post("/auth", R"({"subject_id":"pat-1","secret":"pw-1"})", "application/json");
  httplib::Headers hp{{"X-Session", pat->body}};
  auto vit = cli.Post("/patients/P-1/vitals", hp, std::to_string(kT0 + 5) + ",steps,10\n", "text/csv");
  REQUIRE(vit);
  CHECK(vit->status == 200);
  CHECK(nlohmann::json::parse(vit->body).at("accepted") == 0);  // steps is not a vital name

  auto resp = cli.Post("/auth", R"({"subject_id":"resp-1","secret":"pw-resp"})", "application/json");
  httplib::Headers hr{{"X-Session", resp->body}};
  auto em = cli.Post("/emergency/evaluate", hr, R"({"patient_id":"P-1"})", "application/json");
  REQUIRE(em);
  CHECK(nlohmann::json::parse(em->body).at("granted") == false);

  auto verify = cli.Get("/audit/verify");
  REQUIRE(verify);
  CHECK(nlohmann::json::parse(verify->body).at("ok") == true);

  server.stop();
  th.join();
}

TEST_CASE("http status mapping") {
  CHECK(http_status(ErrorCode::AccessDenied) == 403);
  CHECK(http_status(ErrorCode::ExpiredSession) == 401);
  CHECK(http_status(ErrorCode::NotFound) == 404);
  CHECK(http_status(ErrorCode::StaleWrite) == 409);
  CHECK(http_status(ErrorCode::MalformedIdentifier) == 400);
}
