#include "udi/federation/server.hpp"

#include <httplib.h>

#include "udi/core/udi.hpp"

namespace udi::federation {

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::AccessDenied:
      return 403;
    case ErrorCode::UnknownSubject:
    case ErrorCode::BadSecret:
    case ErrorCode::InvalidSession:
    case ErrorCode::ExpiredSession:
      return 401;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::StaleWrite:
    case ErrorCode::DuplicateLink:
    case ErrorCode::DuplicateSource:
    case ErrorCode::ProcurementIncomplete:
      return 409;
    default:
      return 400;
  }
}

struct ApiServer::Impl {
  Ecosystem& eco;
  httplib::Server server;

  explicit Impl(Ecosystem& e) : eco(e) { routes(); }

  static void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static Session session_of(const httplib::Request& req) {
    if (!req.has_header("X-Session")) fail(ErrorCode::InvalidSession, "missing X-Session header");
    try {
      return access::session_from_json(nlohmann::json::parse(req.get_header_value("X-Session")));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidSession, std::string("X-Session is not JSON: ") + e.what());
    }
  }

  static nlohmann::json body_json(const httplib::Request& req) {
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidInput, std::string("request body is not JSON: ") + e.what());
    }
  }

  template <typename F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        reply(res, 200, f(req));
      } catch (const Error& e) {
        nlohmann::json body{{"error", to_string(e.code())}, {"reason", e.what()}, {"audit_seq", nullptr}};
        if (e.audit_seq()) body["audit_seq"] = *e.audit_seq();
        reply(res, http_status(e.code()), body);
      } catch (const std::exception& e) {
        reply(res, 500, {{"error", "InternalError"}, {"reason", e.what()}, {"audit_seq", nullptr}});
      }
    };
  }

  void routes() {
    server.Post("/auth", guarded([this](const httplib::Request& req) {
                  const auto j = body_json(req);
                  if (!j.contains("subject_id") || !j.contains("secret")) {
                    fail(ErrorCode::InvalidInput, "subject_id and secret are required");
                  }
                  return access::to_json(
                      eco.authenticate(j.at("subject_id").get<std::string>(), j.at("secret").get<std::string>()));
                }));

    server.Get(R"(/patients/([^/]+)/record)", guarded([this](const httplib::Request& req) {
                 return store::to_json(eco.store().get_object(patient_object_id(req.matches[1].str()), session_of(req)));
               }));

    server.Post(R"(/patients/([^/]+)/vitals)", guarded([this](const httplib::Request& req) {
                  return eco.ingest_vitals(req.matches[1].str(), req.body, session_of(req)).to_json();
                }));

    server.Post(R"(/implants/([^/]+)/technical)", guarded([this](const httplib::Request& req) {
                  const Session s = session_of(req);
                  const auto j = body_json(req);
                  if (!j.is_object() || !j.contains("source") || !j.contains("records")) {
                    fail(ErrorCode::InvalidInput, "body must be {source, records}");
                  }
                  const core::UdiRecord target = core::parse_udi(req.matches[1].str());
                  const std::string target_id = implant_object_id(target.device_identifier, target.serial);
                  const std::string source = j.at("source").get<std::string>();
                  std::optional<SourceAdapter> adapter;
                  for (auto& a : eco.sources()) {
                    if (a.source_name == source) adapter = a;
                  }
                  if (!adapter) fail(ErrorCode::NotFound, "no source '" + source + "'");
                  for (const auto& r : j.at("records")) {
                    const auto t = store::harmonize(r, adapter->mapping);
                    const core::UdiRecord u = core::parse_udi(t.value("udi", ""));
                    if (implant_object_id(u.device_identifier, u.serial) != target_id) {
                      fail(ErrorCode::InvalidInput, "record for another implant in batch for " + target_id);
                    }
                  }
                  return eco.ingest_producer_feed(source, j.at("records"), s).to_json();
                }));

    server.Get(R"(/implants/([^/]+))", guarded([this](const httplib::Request& req) {
                 const core::UdiRecord u = core::parse_udi(req.matches[1].str());
                 return store::to_json(
                     eco.store().get_object(implant_object_id(u.device_identifier, u.serial), session_of(req)));
               }));

    server.Get(R"(/view/([^/]+))", guarded([this](const httplib::Request& req) {
                 return eco.federated_view(req.matches[1].str(), session_of(req)).to_json();
               }));

    server.Get(R"(/report/([^/]+))", guarded([this](const httplib::Request& req) {
                 const auto r = eco.surgeon_report(req.matches[1].str(), session_of(req));
                 return nlohmann::json{{"document", r.document}, {"text", r.text}};
               }));

    server.Post("/emergency/evaluate", guarded([this](const httplib::Request& req) {
                  const auto j = body_json(req);
                  const auto grant = eco.evaluate_emergency(j.at("patient_id").get<std::string>(), session_of(req));
                  if (!grant) return nlohmann::json{{"granted", false}};
                  return nlohmann::json{{"granted", true}, {"grant", access::to_json(*grant)}};
                }));

    server.Get("/audit/verify", guarded([this](const httplib::Request&) {
                 const auto v = eco.verify_audit();
                 nlohmann::json j{{"ok", v.ok}, {"entries", v.entries}, {"broken_seq", nullptr}, {"reason", v.reason}};
                 if (v.broken_seq) j["broken_seq"] = *v.broken_seq;
                 return j;
               }));
  }
};

ApiServer::ApiServer(Ecosystem& ecosystem) : impl_(std::make_unique<Impl>(ecosystem)) {}
ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ApiServer::listen() { return impl_->server.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace udi::federation
