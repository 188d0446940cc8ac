#include <doctest.h>

#include <algorithm>
#include <random>

#include "udi/error.hpp"
#include "udi/readout/pipeline.hpp"
#include "udi/readout/signal.hpp"
#include "udi/symbology/code128.hpp"
#include "udi/symbology/pharmacode.hpp"

using namespace udi;
using namespace udi::readout;

namespace {

SignalTrace from(std::vector<double> s) {
  SignalTrace t;
  t.samples = std::move(s);
  return t;
}

// Between-class variance maximized over every midpoint between sorted
// distinct samples.
double otsu_oracle(const std::vector<double>& x) {
  std::vector<double> v = x;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  double best = -1, best_t = v.front();
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double t = (v[i] + v[i + 1]) / 2;
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (double s : x) {
      if (s > t) {
        ++n1;
        s1 += s;
      } else {
        ++n0;
        s0 += s;
      }
    }
    const double var = n0 * n1 * std::pow(s0 / n0 - s1 / n1, 2);
    if (var > best) {
      best = var;
      best_t = t;
    }
  }
  return best_t;
}

BinaryTrace runs(const std::vector<int>& widths_in_samples, int quiet) {
  BinaryTrace b;
  b.bits.assign(static_cast<std::size_t>(quiet), 0);
  std::uint8_t v = 1;
  for (int w : widths_in_samples) {
    b.bits.insert(b.bits.end(), static_cast<std::size_t>(w), v);
    v ^= 1;
  }
  b.bits.insert(b.bits.end(), static_cast<std::size_t>(quiet), 0);
  b.threshold = 0.5;
  return b;
}

}  // namespace

TEST_CASE("otsu labels agree with the brute-force oracle on bimodal data") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> lo(0.1, 0.03), hi(0.75, 0.03);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x;
    for (int i = 0; i < 300; ++i) x.push_back(lo(rng));
    for (int i = 0; i < 150 + trial * 10; ++i) x.push_back(hi(rng));
    std::shuffle(x.begin(), x.end(), rng);
    const double t_oracle = otsu_oracle(x);
    const BinaryTrace b = binarize(from(x));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(b.bits[i] == (x[i] > t_oracle ? 1 : 0));
  }
}

TEST_CASE("binarize rejects a constant trace") {
  try {
    binarize(from(std::vector<double>(50, 0.4)));
    FAIL("expected ConstantSignal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstantSignal);
  }
}

TEST_CASE("morphology ordering and idempotence") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int se : {1, 3, 5, 7, 11}) {
    std::vector<double> x(200);
    for (auto& v : x) v = u(rng);
    const auto t = from(x);
    const auto e = morph_filter(t, MorphOp::erode, se).samples;
    const auto d = morph_filter(t, MorphOp::dilate, se).samples;
    const auto o = morph_filter(t, MorphOp::open, se);
    const auto c = morph_filter(t, MorphOp::close, se);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(e[i] <= x[i]);
      CHECK(x[i] <= d[i]);
      CHECK(o.samples[i] <= x[i]);
      CHECK(x[i] <= c.samples[i]);
    }
    CHECK(morph_filter(o, MorphOp::open, se).samples == o.samples);
    CHECK(morph_filter(c, MorphOp::close, se).samples == c.samples);
    if (se == 1) CHECK(e == x);
  }
  for (int bad : {0, 2, -3}) {
    try {
      morph_filter(from({1, 2, 3}), MorphOp::open, bad);
      FAIL("expected BadStructuringElement");
    } catch (const Error& ex) {
      CHECK(ex.code() == ErrorCode::BadStructuringElement);
    }
  }
}

TEST_CASE("sliding minimum matches a direct window scan") {
  const std::vector<double> x{5, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5};
  const auto e = morph_filter(from(x), MorphOp::erode, 3).samples;
  for (int i = 0; i < static_cast<int>(x.size()); ++i) {
    double m = 1e9;
    for (int k = i - 1; k <= i + 1; ++k) m = std::min(m, x[std::clamp(k, 0, static_cast<int>(x.size()) - 1)]);
    CHECK(e[i] == m);
  }
}

TEST_CASE("default structuring element is odd") {
  CHECK(default_se_len(12) == 7);
  CHECK(default_se_len(10) == 5);
  CHECK(default_se_len(2) == 1);
  CHECK(default_se_len(1) == 1);
}

TEST_CASE("clean traces decode exactly") {
  ReadoutParams p;
  for (int v : {3, 4, 1000, 48287, 131070}) {
    CHECK(std::get<std::int32_t>(decode_trace(synthesize_trace(symbology::pharmacode_encode(v), p),
                                              Symbology1D::pharmacode)) == v);
  }
  CHECK(std::get<std::string>(decode_trace(synthesize_trace(symbology::code128_encode("SLM25717"), p),
                                           Symbology1D::code128)) == "SLM25717");
}

TEST_CASE("degraded pharmacode 3 decodes at blur 0.3 and noise 5%") {
  ReadoutParams p;
  p.blur_sigma_modules = 0.3;
  p.noise_sigma_fraction = 0.05;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    p.rng_seed = seed;
    CHECK(std::get<std::int32_t>(decode_trace(synthesize_trace(symbology::pharmacode_encode(3), p),
                                              Symbology1D::pharmacode)) == 3);
  }
}

TEST_CASE("synthesis is reproducible per seed") {
  ReadoutParams p;
  p.noise_sigma_fraction = 0.1;
  p.rng_seed = 99;
  const auto pat = symbology::pharmacode_encode(777);
  CHECK(synthesize_trace(pat, p).samples == synthesize_trace(pat, p).samples);
  auto q = p;
  q.rng_seed = 100;
  CHECK(synthesize_trace(pat, p).samples != synthesize_trace(pat, q).samples);
  const auto t = synthesize_trace(pat, p);
  CHECK(t.samples.size() == static_cast<std::size_t>((pat.total_modules() + 2 * p.quiet_zone_modules) * 12));
}

TEST_CASE("csv round trip keeps parameters") {
  ReadoutParams p;
  p.blur_sigma_modules = 0.25;
  p.rng_seed = 7;
  const auto t = synthesize_trace(symbology::pharmacode_encode(55), p);
  const auto back = trace_from_csv(to_csv(t));
  REQUIRE(back.meta.has_value());
  CHECK(*back.meta == p);
  REQUIRE(back.samples.size() == t.samples.size());
  for (std::size_t i = 0; i < t.samples.size(); ++i) CHECK(back.samples[i] == doctest::Approx(t.samples[i]));
  try {
    trace_from_csv("index,intensity\n0,abc\n");
    FAIL("expected InvalidInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidInput);
  }
}

TEST_CASE("exact module runs classify") {
  const auto pat = extract_pattern(runs({12, 24, 36, 24, 12}, 120), Symbology1D::pharmacode);
  CHECK(symbology::to_text(pat) == "B1 G2 B3 G2 B1");
}

TEST_CASE("a run halfway between module counts is ambiguous, not rounded") {
  try {
    extract_pattern(runs({12, 24, 36, 24, 12, 24, 30}, 120), Symbology1D::pharmacode);
    FAIL("expected AmbiguousModuleWidth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AmbiguousModuleWidth);
  }
}

TEST_CASE("decode failures carry the pipeline stage") {
  try {
    decode_trace(from(std::vector<double>(300, 0.2)), Symbology1D::pharmacode);
    FAIL("expected DecodeFailed");
  } catch (const DecodeFailed& e) {
    CHECK(e.code() == ErrorCode::DecodeFailed);
    CHECK(e.stage() == DecodeStage::binarize);
    CHECK(e.cause() == ErrorCode::ConstantSignal);
  }
  ReadoutParams p;
  try {
    decode_trace(synthesize_trace(symbology::code128_encode("AB"), p), Symbology1D::pharmacode);
    FAIL("expected DecodeFailed");
  } catch (const DecodeFailed& e) {
    CHECK(e.stage() != DecodeStage::filter);
  }
}

TEST_CASE("readout parameters are range checked") {
  ReadoutParams p;
  p.attenuation = 1.0;
  CHECK_THROWS_AS(validate(p), Error);
  p = {};
  p.samples_per_module = 0;
  CHECK_THROWS_AS(validate(p), Error);
  p = {};
  p.noise_sigma_fraction = -0.1;
  CHECK_THROWS_AS(validate(p), Error);
}
