#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "udi/access/audit.hpp"
#include "udi/core/udi.hpp"
#include "udi/error.hpp"
#include "udi/federation/ecosystem.hpp"
#include "udi/readout/pipeline.hpp"
#include "udi/readout/signal.hpp"
#include "udi/scenario/scenario.hpp"
#include "udi/symbology/code128.hpp"
#include "udi/symbology/datamatrix.hpp"
#include "udi/symbology/pharmacode.hpp"
#include "udi/symbology/reed_solomon.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace udi;

namespace {

// JSON crosses the boundary as text through the stdlib json module.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& o) {
  const std::string text = py::str(py::module_::import("json").attr("dumps")(o));
  return json::parse(text);
}

access::Session session_arg(const py::handle& o) { return access::session_from_json(from_py(o)); }

access::Principal principal_arg(const py::handle& o) {
  const json j = from_py(o);
  if (j.contains("responder_id")) {
    access::EmergencyGrant g;
    g.responder_id = j.at("responder_id").get<std::string>();
    g.patient_id = j.at("patient_id").get<std::string>();
    g.granted_at = from_unix(j.at("granted_at").get<std::int64_t>());
    g.expires_at = from_unix(j.at("expires_at").get<std::int64_t>());
    return g;
  }
  return access::session_from_json(j);
}

json udi_to_json(const core::UdiRecord& r) {
  return {{"device_identifier", r.device_identifier},
          {"manufacture_date", core::format_iso_date(r.manufacture_date)},
          {"expiry_date", core::format_iso_date(r.expiry_date)},
          {"lot", r.lot},
          {"serial", r.serial}};
}

core::UdiRecord udi_from_json(const json& j) {
  core::UdiRecord r;
  r.device_identifier = j.at("device_identifier").get<std::string>();
  r.manufacture_date = core::parse_iso_date(j.at("manufacture_date").get<std::string>());
  r.expiry_date = core::parse_iso_date(j.at("expiry_date").get<std::string>());
  r.lot = j.at("lot").get<std::string>();
  r.serial = j.at("serial").get<std::string>();
  return r;
}

readout::ReadoutParams params_from(const py::dict& d) {
  readout::ReadoutParams p;
  for (auto [k, v] : d) {
    const std::string key = py::str(k);
    if (key == "samples_per_module") p.samples_per_module = v.cast<int>();
    else if (key == "blur_sigma_modules") p.blur_sigma_modules = v.cast<double>();
    else if (key == "noise_sigma_fraction") p.noise_sigma_fraction = v.cast<double>();
    else if (key == "attenuation") p.attenuation = v.cast<double>();
    else if (key == "baseline_drift_amplitude") p.baseline_drift_amplitude = v.cast<double>();
    else if (key == "rng_seed") p.rng_seed = v.cast<std::uint64_t>();
    else if (key == "quiet_zone_modules") p.quiet_zone_modules = v.cast<int>();
    else fail(ErrorCode::InvalidInput, "unknown readout parameter '" + key + "'");
  }
  return p;
}

symbology::BitMatrix matrix_from(const std::vector<std::vector<int>>& rows) {
  symbology::BitMatrix m(static_cast<int>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) fail(ErrorCode::InvalidInput, "matrix must be square");
    for (std::size_t c = 0; c < rows.size(); ++c) m.set(static_cast<int>(r), static_cast<int>(c), rows[r][c] != 0);
  }
  return m;
}

py::bytes to_bytes(const symbology::Bytes& b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

symbology::Bytes from_bytes(const py::bytes& b) {
  const std::string s = b;
  return symbology::Bytes(s.begin(), s.end());
}

class PyEcosystem {
 public:
  PyEcosystem(const py::object& config, const py::object& directory, std::optional<std::int64_t> clock_start) {
    if (clock_start) {
      manual_ = std::make_unique<ManualClock>(from_unix(*clock_start));
    } else {
      system_ = std::make_unique<SystemClock>();
    }
    const auto cfg = config.is_none() ? federation::EcosystemConfig{} : federation::EcosystemConfig::from_json(from_py(config));
    auto dir = directory.is_none() ? access::CredentialDirectory{} : access::CredentialDirectory::from_json(from_py(directory));
    eco_ = std::make_unique<federation::Ecosystem>(clock(), cfg, std::move(dir));
  }

  const Clock& clock() const { return manual_ ? static_cast<const Clock&>(*manual_) : *system_; }
  std::int64_t now() const { return to_unix(clock().now()); }

  void advance(std::int64_t seconds) {
    if (!manual_) fail(ErrorCode::InvalidInput, "clock is the system clock");
    manual_->advance(Seconds{seconds});
  }

  federation::Ecosystem& eco() { return *eco_; }

 private:
  std::unique_ptr<ManualClock> manual_;
  std::unique_ptr<SystemClock> system_;
  std::unique_ptr<federation::Ecosystem> eco_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "UDI ecosystem core";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object cls = py::module_::import("udi_ecosystem.errors").attr("UdiError");
      py::object seq = e.audit_seq() ? py::object(py::int_(*e.audit_seq())) : py::object(py::none());
      py::object inst = cls(std::string(to_string(e.code())), e.what(), seq);
      PyErr_SetObject(cls.ptr(), inst.ptr());
    } catch (const json::exception& e) {
      py::object cls = py::module_::import("udi_ecosystem.errors").attr("UdiError");
      py::object inst = cls("InvalidInput", e.what(), py::none());
      PyErr_SetObject(cls.ptr(), inst.ptr());
    }
  });

  m.def("gtin_check_digit", &core::gtin_check_digit, py::arg("digits"));
  m.def("parse_udi", [](const std::string& s) { return to_py(udi_to_json(core::parse_udi(s))); }, py::arg("text"));
  m.def("format_udi", [](const py::dict& d) { return core::format_udi(udi_from_json(from_py(d))); }, py::arg("record"));

  m.def("pharmacode_encode", [](std::int32_t v) { return symbology::to_text(symbology::pharmacode_encode(v)); },
        py::arg("value"), "Bar pattern text such as 'B1 G2 B1'.");
  m.def("pharmacode_decode",
        [](const std::string& t) { return symbology::pharmacode_decode(symbology::bar_pattern_from_text(t)); },
        py::arg("pattern"));
  m.def("code128_encode", [](const std::string& v) { return symbology::to_text(symbology::code128_encode(v)); },
        py::arg("text"));
  m.def("code128_decode",
        [](const std::string& t) { return symbology::code128_decode(symbology::bar_pattern_from_text(t)); },
        py::arg("pattern"));
  m.def(
      "datamatrix_encode",
      [](const std::string& payload, std::optional<int> size) {
        const auto mat = symbology::datamatrix_encode(payload, size);
        std::vector<std::vector<int>> rows(mat.size, std::vector<int>(mat.size));
        for (int r = 0; r < mat.size; ++r)
          for (int c = 0; c < mat.size; ++c) rows[r][c] = mat.at(r, c) ? 1 : 0;
        return rows;
      },
      py::arg("payload"), py::arg("size") = py::none());
  m.def(
      "datamatrix_decode",
      [](const std::vector<std::vector<int>>& rows) { return symbology::datamatrix_decode(matrix_from(rows)); },
      py::arg("matrix"));
  m.def(
      "rs_encode",
      [](const py::bytes& data, int ecc_len) {
        const auto d = from_bytes(data);
        return to_bytes(symbology::rs_encode(d, ecc_len).ecc);
      },
      py::arg("data"), py::arg("ecc_len"), "Returns the ECC codewords.");
  m.def(
      "rs_decode",
      [](const py::bytes& data, const py::bytes& ecc) {
        const auto r = symbology::rs_decode({from_bytes(data), from_bytes(ecc)});
        return py::make_tuple(to_bytes(r.data), r.corrected);
      },
      py::arg("data"), py::arg("ecc"), "Returns (corrected data, number of corrected symbols).");

  m.def(
      "synthesize_trace",
      [](const std::string& pattern, const py::dict& params) {
        return readout::synthesize_trace(symbology::bar_pattern_from_text(pattern), params_from(params)).samples;
      },
      py::arg("pattern"), py::arg("params") = py::dict());
  m.def(
      "decode_trace",
      [](const std::vector<double>& samples, const std::string& symbology, std::optional<int> samples_per_module,
         std::optional<int> se_len) -> py::object {
        readout::SignalTrace t;
        t.samples = samples;
        if (samples_per_module) {
          readout::ReadoutParams p;
          p.samples_per_module = *samples_per_module;
          t.meta = p;
        }
        readout::Symbology1D hint;
        if (symbology == "pharmacode") hint = readout::Symbology1D::pharmacode;
        else if (symbology == "code128") hint = readout::Symbology1D::code128;
        else fail(ErrorCode::InvalidInput, "unknown symbology '" + symbology + "'");
        const auto payload = readout::decode_trace(t, hint, se_len);
        if (const auto* v = std::get_if<std::int32_t>(&payload)) return py::int_(*v);
        return py::str(std::get<std::string>(payload));
      },
      py::arg("samples"), py::arg("symbology"), py::arg("samples_per_module") = py::none(),
      py::arg("se_len") = py::none());

  m.def(
      "verify_audit_chain",
      [](const std::string& text) {
        const auto v = access::verify_audit_chain(text);
        json j{{"ok", v.ok}, {"entries", v.entries}, {"broken_seq", nullptr}, {"reason", v.reason}};
        if (v.broken_seq) j["broken_seq"] = *v.broken_seq;
        return to_py(j);
      },
      py::arg("jsonl"));

  m.def(
      "run_scenario",
      [](const std::string& name, std::uint64_t seed, double noise, double blur) {
        scenario::ScenarioOptions o;
        o.seed = seed;
        o.noise = noise;
        o.blur = blur;
        return to_py(scenario::run_scenario(name, o).to_json());
      },
      py::arg("name"), py::arg("seed") = 7, py::arg("noise") = 0.05, py::arg("blur") = 0.3);

  py::class_<PyEcosystem>(m, "Ecosystem")
      .def(py::init<const py::object&, const py::object&, std::optional<std::int64_t>>(), py::arg("config") = py::none(),
           py::arg("directory") = py::none(), py::arg("clock_start") = py::none(),
           "With clock_start the ecosystem runs on a manual clock moved by advance().")
      .def("now", &PyEcosystem::now)
      .def("advance", &PyEcosystem::advance, py::arg("seconds"))
      .def("authenticate",
           [](PyEcosystem& s, const std::string& subject, const std::string& secret) {
             return to_py(access::to_json(s.eco().authenticate(subject, secret)));
           })
      .def("device_capability",
           [](PyEcosystem& s, const py::dict& owner, const std::string& device) {
             return to_py(access::to_json(s.eco().device_capability(session_arg(owner), device)));
           })
      .def("register_source",
           [](PyEcosystem& s, const py::dict& adapter, const std::string& admin_secret) {
             s.eco().register_source(federation::source_from_json(from_py(adapter)), admin_secret);
           })
      .def("put_patient",
           [](PyEcosystem& s, const std::string& pid, const py::dict& sections, const py::dict& writer) {
             return s.eco().put_patient(pid, from_py(sections), session_arg(writer));
           })
      .def("ingest_producer_feed",
           [](PyEcosystem& s, const std::string& source, const py::list& records, const py::dict& producer) {
             return to_py(s.eco().ingest_producer_feed(source, from_py(records), session_arg(producer)).to_json());
           })
      .def("ingest_vitals",
           [](PyEcosystem& s, const std::string& pid, const std::string& csv, const py::dict& session) {
             return to_py(s.eco().ingest_vitals(pid, csv, session_arg(session)).to_json());
           })
      .def(
          "link_implant",
          [](PyEcosystem& s, const std::string& udi, const std::string& pid, const py::object& surgery,
             const py::dict& staff) {
            const auto r = s.eco().link_implant(udi, pid, surgery.is_none() ? json() : from_py(surgery), session_arg(staff));
            return to_py({{"surgery_id", r.surgery_id}, {"audit_seq", r.audit_seq}});
          },
          py::arg("udi"), py::arg("patient_id"), py::arg("surgery"), py::arg("staff"))
      .def("resolve_marking",
           [](PyEcosystem& s, std::int32_t marking, const py::dict& reader) {
             return s.eco().resolve_marking(marking, principal_arg(reader));
           })
      .def("federated_view",
           [](PyEcosystem& s, const std::string& key, const py::dict& reader) {
             return to_py(s.eco().federated_view(key, principal_arg(reader)).to_json());
           })
      .def("surgeon_report",
           [](PyEcosystem& s, const std::string& key, const py::dict& staff) {
             const auto r = s.eco().surgeon_report(key, session_arg(staff));
             return to_py({{"document", r.document}, {"text", r.text}});
           })
      .def("evaluate_emergency",
           [](PyEcosystem& s, const std::string& pid, const py::dict& responder) -> py::object {
             const auto g = s.eco().evaluate_emergency(pid, session_arg(responder));
             if (!g) return py::none();
             return to_py(access::to_json(*g));
           })
      .def("get_object",
           [](PyEcosystem& s, const std::string& object_id, const py::dict& reader) {
             return to_py(store::to_json(s.eco().store().get_object(object_id, principal_arg(reader))));
           })
      .def("export_anonymized",
           [](PyEcosystem& s, const std::map<std::string, std::string>& filter, const std::string& key,
              const py::dict& caller) {
             return to_py(json(s.eco().export_anonymized(filter, key, session_arg(caller)).records));
           })
      .def("verify_audit",
           [](PyEcosystem& s) {
             const auto v = s.eco().verify_audit();
             json j{{"ok", v.ok}, {"entries", v.entries}, {"broken_seq", nullptr}, {"reason", v.reason}};
             if (v.broken_seq) j["broken_seq"] = *v.broken_seq;
             return to_py(j);
           })
      .def("audit_log", [](PyEcosystem& s) { return s.eco().audit().serialize(); });
}
