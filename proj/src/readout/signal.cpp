#include "udi/readout/signal.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "udi/error.hpp"

namespace udi::readout {

void validate(const ReadoutParams& p) {
  if (p.samples_per_module < 4) fail(ErrorCode::InvalidInput, "samples_per_module must be at least 4");
  if (!(p.blur_sigma_modules >= 0.0) || !std::isfinite(p.blur_sigma_modules)) {
    fail(ErrorCode::InvalidInput, "blur_sigma_modules must be finite and >= 0");
  }
  if (!(p.noise_sigma_fraction >= 0.0) || !std::isfinite(p.noise_sigma_fraction)) {
    fail(ErrorCode::InvalidInput, "noise_sigma_fraction must be finite and >= 0");
  }
  if (!(p.attenuation >= 0.0 && p.attenuation < 1.0)) fail(ErrorCode::InvalidInput, "attenuation must lie in [0, 1)");
  if (!(p.baseline_drift_amplitude >= 0.0) || !std::isfinite(p.baseline_drift_amplitude)) {
    fail(ErrorCode::InvalidInput, "baseline_drift_amplitude must be finite and >= 0");
  }
  if (p.quiet_zone_modules < 1) fail(ErrorCode::InvalidInput, "quiet_zone_modules must be at least 1");
}

void validate(const SignalTrace& trace) {
  if (trace.samples.empty()) fail(ErrorCode::InvalidInput, "empty signal trace");
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    if (!std::isfinite(trace.samples[i])) fail(ErrorCode::InvalidInput, "non-finite sample at index " + std::to_string(i));
  }
}

SignalTrace synthesize_trace(const symbology::BarPattern& pattern, const ReadoutParams& params) {
  validate(params);
  symbology::validate_shape(pattern);

  // Bar extents in module coordinates, quiet zone included.
  std::vector<std::pair<double, double>> bars;
  double x = params.quiet_zone_modules;
  for (const auto& e : pattern.elements) {
    if (e.kind == symbology::ElementKind::bar) bars.emplace_back(x, x + e.width);
    x += e.width;
  }
  const double total_modules = x + params.quiet_zone_modules;
  const auto n = static_cast<std::size_t>(std::lround(total_modules * params.samples_per_module));
  const double contrast = 1.0 - params.attenuation;
  const double sigma = params.blur_sigma_modules;

  SignalTrace trace;
  trace.sample_pitch_mm = pattern.module_width_mm / params.samples_per_module;
  trace.meta = params;
  trace.samples.assign(n, 0.0);

  // Rectangular profile convolved with a Gaussian has a closed form in erf.
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = (static_cast<double>(i) + 0.5) / params.samples_per_module;
    double v = 0.0;
    for (const auto& [a, b] : bars) {
      if (sigma == 0.0) {
        v += (pos >= a && pos < b) ? 1.0 : 0.0;
      } else {
        const double s = sigma * std::numbers::sqrt2;
        v += 0.5 * (std::erf((pos - a) / s) - std::erf((pos - b) / s));
      }
    }
    trace.samples[i] = contrast * v;
  }

  std::mt19937_64 rng(params.rng_seed);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  const double phase = phase_dist(rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (params.noise_sigma_fraction > 0.0) trace.samples[i] += params.noise_sigma_fraction * contrast * noise(rng);
    if (params.baseline_drift_amplitude > 0.0) {
      trace.samples[i] += params.baseline_drift_amplitude *
                          std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n) + phase);
    }
  }
  return trace;
}

symbology::BitMatrix perturb_matrix(const symbology::BitMatrix& matrix, double flip_probability, std::uint64_t rng_seed) {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    fail(ErrorCode::InvalidInput, "flip probability must lie in [0, 1]");
  }
  symbology::BitMatrix out = matrix;
  std::mt19937_64 rng(rng_seed);
  std::bernoulli_distribution flip(flip_probability);
  for (int r = 0; r < out.size; ++r) {
    for (int c = 0; c < out.size; ++c) {
      if (symbology::is_finder_module(out.size, r, c)) continue;
      if (flip(rng)) out.set(r, c, !out.at(r, c));
    }
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidInput, "bad number for " + what + ": '" + s + "'");
  }
}

}  // namespace

std::string to_csv(const SignalTrace& trace) {
  std::string out;
  out += "# sample_pitch_mm=" + fmt_double(trace.sample_pitch_mm) + "\n";
  if (trace.meta) {
    const ReadoutParams& p = *trace.meta;
    out += "# samples_per_module=" + std::to_string(p.samples_per_module) + "\n";
    out += "# blur_sigma_modules=" + fmt_double(p.blur_sigma_modules) + "\n";
    out += "# noise_sigma_fraction=" + fmt_double(p.noise_sigma_fraction) + "\n";
    out += "# attenuation=" + fmt_double(p.attenuation) + "\n";
    out += "# baseline_drift_amplitude=" + fmt_double(p.baseline_drift_amplitude) + "\n";
    out += "# rng_seed=" + std::to_string(p.rng_seed) + "\n";
    out += "# quiet_zone_modules=" + std::to_string(p.quiet_zone_modules) + "\n";
  }
  out += "index,intensity\n";
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    out += std::to_string(i) + "," + fmt_double(trace.samples[i]) + "\n";
  }
  return out;
}

SignalTrace trace_from_csv(std::string_view text) {
  SignalTrace trace;
  std::map<std::string, std::string> meta;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header_seen = false;
  std::size_t expected_index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    if (!header_seen) {
      if (line != "index,intensity") fail(ErrorCode::InvalidInput, "expected 'index,intensity' header, got '" + line + "'");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(ErrorCode::InvalidInput, "row without comma: '" + line + "'");
    const double idx = parse_double(line.substr(0, comma), "index");
    if (idx != static_cast<double>(expected_index)) {
      fail(ErrorCode::InvalidInput, "row index " + line.substr(0, comma) + " out of sequence");
    }
    ++expected_index;
    trace.samples.push_back(parse_double(line.substr(comma + 1), "intensity"));
  }
  if (!header_seen) fail(ErrorCode::InvalidInput, "missing 'index,intensity' header");

  if (auto it = meta.find("sample_pitch_mm"); it != meta.end()) trace.sample_pitch_mm = parse_double(it->second, it->first);
  if (meta.count("samples_per_module")) {
    ReadoutParams p;
    const auto get = [&](const char* key, auto& field) {
      auto it = meta.find(key);
      if (it == meta.end()) return;
      using T = std::decay_t<decltype(field)>;
      const double v = parse_double(it->second, key);
      field = static_cast<T>(v);
    };
    get("samples_per_module", p.samples_per_module);
    get("blur_sigma_modules", p.blur_sigma_modules);
    get("noise_sigma_fraction", p.noise_sigma_fraction);
    get("attenuation", p.attenuation);
    get("baseline_drift_amplitude", p.baseline_drift_amplitude);
    get("quiet_zone_modules", p.quiet_zone_modules);
    if (auto it = meta.find("rng_seed"); it != meta.end()) p.rng_seed = std::stoull(it->second);
    trace.meta = p;
  }
  validate(trace);
  return trace;
}

}  // namespace udi::readout
