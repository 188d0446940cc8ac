// udi_eco: scenarios, codec and trace utilities, audit verification, service launcher.
//
// Exit codes: 0 success, 1 decode or assertion failure, 2 access denied,
// 3 invalid input.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "udi/access/audit.hpp"
#include "udi/error.hpp"
#include "udi/federation/ecosystem.hpp"
#include "udi/federation/server.hpp"
#include "udi/readout/pipeline.hpp"
#include "udi/readout/signal.hpp"
#include "udi/scenario/scenario.hpp"
#include "udi/symbology/code128.hpp"
#include "udi/symbology/datamatrix.hpp"
#include "udi/symbology/pharmacode.hpp"

namespace {

using namespace udi;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitDenied = 2;
constexpr int kExitInvalid = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::AccessDenied:
    case ErrorCode::UnknownSubject:
    case ErrorCode::BadSecret:
    case ErrorCode::ExpiredSession:
    case ErrorCode::InvalidSession:
      return kExitDenied;
    case ErrorCode::BadBarWidth:
    case ErrorCode::BarCountOutOfRange:
    case ErrorCode::BadStartSymbol:
    case ErrorCode::BadStopPattern:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::UnknownSymbolPattern:
    case ErrorCode::UnsupportedEncodation:
    case ErrorCode::TooManyErrors:
    case ErrorCode::BadFinderPattern:
    case ErrorCode::ConstantSignal:
    case ErrorCode::NoRunsFound:
    case ErrorCode::AmbiguousModuleWidth:
    case ErrorCode::DecodeFailed:
    case ErrorCode::ChainBroken:
    case ErrorCode::ScenarioFailed:
      return kExitFailure;
    default:
      return kExitInvalid;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidInput, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorCode::InvalidInput, "cannot write " + path);
}

std::int32_t parse_pharmacode_value(const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidInput, "pharmacode value must be an integer");
  }
  if (used != v.size() || n < INT32_MIN || n > INT32_MAX) fail(ErrorCode::InvalidInput, "pharmacode value must be an integer");
  return static_cast<std::int32_t>(n);
}

symbology::BarPattern encode_1d(const std::string& symbology, const std::string& value) {
  if (symbology == "pharmacode") return symbology::pharmacode_encode(parse_pharmacode_value(value));
  if (symbology == "code128") return symbology::code128_encode(value);
  fail(ErrorCode::InvalidInput, "symbology '" + symbology + "' has no bar pattern");
}

readout::ReadoutParams params_from_json(const nlohmann::json& j, readout::ReadoutParams p) {
  static const std::set<std::string> known{"samples_per_module",   "blur_sigma_modules",       "noise_sigma_fraction",
                                           "attenuation",          "baseline_drift_amplitude", "rng_seed",
                                           "quiet_zone_modules"};
  if (!j.is_object()) fail(ErrorCode::InvalidInput, "readout params must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!known.contains(k)) fail(ErrorCode::InvalidInput, "unknown readout parameter '" + k + "'");
  }
  try {
    p.samples_per_module = j.value("samples_per_module", p.samples_per_module);
    p.blur_sigma_modules = j.value("blur_sigma_modules", p.blur_sigma_modules);
    p.noise_sigma_fraction = j.value("noise_sigma_fraction", p.noise_sigma_fraction);
    p.attenuation = j.value("attenuation", p.attenuation);
    p.baseline_drift_amplitude = j.value("baseline_drift_amplitude", p.baseline_drift_amplitude);
    p.rng_seed = j.value("rng_seed", p.rng_seed);
    p.quiet_zone_modules = j.value("quiet_zone_modules", p.quiet_zone_modules);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidInput, std::string("bad readout params: ") + e.what());
  }
  return p;
}

std::string payload_text(const readout::Payload& p) {
  if (const auto* v = std::get_if<std::int32_t>(&p)) return std::to_string(*v);
  return std::get<std::string>(p);
}

readout::Symbology1D symbology_1d(const std::string& s) {
  if (s == "pharmacode") return readout::Symbology1D::pharmacode;
  if (s == "code128") return readout::Symbology1D::code128;
  fail(ErrorCode::InvalidInput, "trace decoding supports pharmacode and code128, not '" + s + "'");
}

federation::ApiServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UDI-linked hospital data ecosystem tools"};
  app.require_subcommand(1);

  // scenario
  auto* scenario = app.add_subcommand("scenario", "Run a seeded end-to-end scenario");
  std::string scenario_name;
  std::uint64_t seed = 7;
  std::string config_path;
  std::string store_dir;
  bool as_json = false;
  std::optional<double> noise;
  std::optional<double> blur;
  std::string report_out;
  scenario->add_option("name", scenario_name, "implant | revision | emergency")
      ->required()
      ->check(CLI::IsMember(scenario::scenario_names()));
  scenario->add_option("--seed", seed, "Scenario seed");
  scenario->add_option("--config", config_path, "Ecosystem config JSON");
  scenario->add_option("--store-dir", store_dir, "Empty directory for the journal and audit log");
  scenario->add_flag("--json", as_json, "Print the JSON report instead of the summary");
  scenario->add_option("--noise", noise, "Readout noise for the revision marking (fraction of contrast)");
  scenario->add_option("--blur", blur, "Readout blur for the revision marking (modules)");
  scenario->add_option("--report", report_out, "Also write the JSON report to this file");

  // codec
  auto* codec = app.add_subcommand("codec", "Encode or decode a symbology");
  codec->require_subcommand(1);
  std::string symbology = "pharmacode";
  std::string value;
  std::string pattern_text;
  std::string input_path;
  std::string output_path;
  std::optional<int> dm_size;
  auto* encode = codec->add_subcommand("encode", "Value to bar pattern (or PBM for datamatrix)");
  encode->add_option("--symbology", symbology)->check(CLI::IsMember({"pharmacode", "code128", "datamatrix"}));
  encode->add_option("--value", value)->required();
  encode->add_option("--size", dm_size, "DataMatrix symbol size");
  encode->add_option("--out", output_path);
  auto* decode = codec->add_subcommand("decode", "Bar pattern (or PBM) to value");
  decode->add_option("--symbology", symbology)->check(CLI::IsMember({"pharmacode", "code128", "datamatrix"}));
  decode->add_option("--pattern", pattern_text, "Bar pattern text such as \"B1 G2 B1\"");
  decode->add_option("--input", input_path, "File with a pattern or a PBM matrix");

  // trace
  auto* trace = app.add_subcommand("trace", "Synthesize or decode readout traces");
  trace->require_subcommand(1);
  std::string params_arg;
  readout::ReadoutParams cli_params;
  std::optional<int> se_len;
  auto* synth = trace->add_subcommand("synth", "Bar pattern to CSV trace");
  synth->add_option("--symbology", symbology)->check(CLI::IsMember({"pharmacode", "code128"}));
  synth->add_option("--value", value)->required();
  synth->add_option("--params", params_arg, "Readout parameters as inline JSON or a JSON file");
  synth->add_option("--spm", cli_params.samples_per_module, "Samples per module");
  synth->add_option("--blur", cli_params.blur_sigma_modules, "Blur sigma in modules");
  synth->add_option("--noise", cli_params.noise_sigma_fraction, "Noise sigma as a fraction of contrast");
  synth->add_option("--attenuation", cli_params.attenuation);
  synth->add_option("--drift", cli_params.baseline_drift_amplitude);
  synth->add_option("--seed", cli_params.rng_seed);
  synth->add_option("--out", output_path);
  auto* tdecode = trace->add_subcommand("decode", "CSV trace to value");
  tdecode->add_option("--symbology", symbology)->check(CLI::IsMember({"pharmacode", "code128"}));
  tdecode->add_option("--input", input_path)->required();
  tdecode->add_option("--se-len", se_len, "Structuring element length (odd)");

  // audit
  auto* audit = app.add_subcommand("audit", "Audit log tools");
  audit->require_subcommand(1);
  std::string log_path;
  auto* verify = audit->add_subcommand("verify", "Verify a persisted audit log");
  verify->add_option("--log", log_path)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string directory_path;
  serve->add_option("--config", config_path);
  serve->add_option("--directory", directory_path, "Credential directory JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*scenario) {
      scenario::ScenarioOptions opt;
      opt.seed = seed;
      if (!config_path.empty()) opt.config = federation::EcosystemConfig::load(config_path);
      if (!store_dir.empty()) opt.store_dir = store_dir;
      if (noise) opt.noise = *noise;
      if (blur) opt.blur = *blur;
      const auto report = scenario::run_scenario(scenario_name, opt);
      const std::string json = report.to_json().dump(2) + "\n";
      if (!report_out.empty()) write_output(report_out, json);
      std::cout << (as_json ? json : report.summary());
      return report.exit_code;
    }

    if (*encode) {
      if (symbology == "datamatrix") {
        write_output(output_path, symbology::to_pbm(symbology::datamatrix_encode(value, dm_size)));
      } else {
        write_output(output_path, symbology::to_text(encode_1d(symbology, value)) + "\n");
      }
      return kExitOk;
    }

    if (*decode) {
      std::string text = pattern_text;
      if (!input_path.empty()) text = read_file(input_path);
      if (text.empty()) fail(ErrorCode::InvalidInput, "give --pattern or --input");
      if (symbology == "datamatrix") {
        std::cout << symbology::datamatrix_decode(symbology::bit_matrix_from_pbm(text)) << "\n";
      } else {
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
        const auto pattern = symbology::bar_pattern_from_text(text);
        if (symbology == "pharmacode") {
          std::cout << symbology::pharmacode_decode(pattern) << "\n";
        } else {
          std::cout << symbology::code128_decode(pattern) << "\n";
        }
      }
      return kExitOk;
    }

    if (*synth) {
      readout::ReadoutParams p = cli_params;
      if (!params_arg.empty()) {
        const std::string text = params_arg.front() == '{' ? params_arg : read_file(params_arg);
        try {
          p = params_from_json(nlohmann::json::parse(text), p);
        } catch (const nlohmann::json::parse_error& e) {
          fail(ErrorCode::InvalidInput, std::string("--params is not JSON: ") + e.what());
        }
      }
      write_output(output_path, readout::to_csv(readout::synthesize_trace(encode_1d(symbology, value), p)));
      return kExitOk;
    }

    if (*tdecode) {
      const auto t = readout::trace_from_csv(read_file(input_path));
      std::cout << payload_text(readout::decode_trace(t, symbology_1d(symbology), se_len)) << "\n";
      return kExitOk;
    }

    if (*verify) {
      const auto v = access::verify_audit_chain(read_file(log_path));
      if (v.ok) {
        std::cout << "ok: " << v.entries << " entries\n";
        return kExitOk;
      }
      std::cout << "broken at seq " << *v.broken_seq << ": " << v.reason << "\n";
      return kExitFailure;
    }

    if (*serve) {
      federation::EcosystemConfig cfg;
      if (!config_path.empty()) cfg = federation::EcosystemConfig::load(config_path);
      cfg.apply_environment();
      access::CredentialDirectory dir;
      if (!directory_path.empty()) {
        dir = access::CredentialDirectory::load(directory_path);
      } else if (cfg.directory_file) {
        dir = access::CredentialDirectory::load(*cfg.directory_file);
      }
      SystemClock clock;
      federation::Ecosystem eco(clock, cfg, std::move(dir));
      federation::ApiServer server(eco);
      const int port = server.bind(cfg.host, cfg.port);
      if (port < 0) fail(ErrorCode::InvalidInput, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << cfg.host << ":" << port << "\n";
      server.listen();
      g_server = nullptr;
      return kExitOk;
    }
  } catch (const readout::DecodeFailed& e) {
    std::cerr << e.what() << "\n";
    return kExitFailure;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitOk;
}
