#include "udi/readout/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "udi/symbology/code128.hpp"
#include "udi/symbology/pharmacode.hpp"

namespace udi::readout {

namespace {

template <typename Pick>
std::vector<double> sliding(const std::vector<double>& x, int se_len, Pick pick) {
  const int n = static_cast<int>(x.size());
  const int r = se_len / 2;
  std::vector<double> out(x.size());
  for (int i = 0; i < n; ++i) {
    double v = x[static_cast<std::size_t>(std::clamp(i - r, 0, n - 1))];
    for (int j = i - r + 1; j <= i + r; ++j) v = pick(v, x[static_cast<std::size_t>(std::clamp(j, 0, n - 1))]);
    out[static_cast<std::size_t>(i)] = v;
  }
  return out;
}

std::vector<double> erode(const std::vector<double>& x, int k) {
  return sliding(x, k, [](double a, double b) { return std::min(a, b); });
}
std::vector<double> dilate(const std::vector<double>& x, int k) {
  return sliding(x, k, [](double a, double b) { return std::max(a, b); });
}

struct Run {
  bool bar;
  double width;  // samples
};

/// Nearest admissible module count and its distance.
std::pair<int, double> classify(double modules, bool pharmacode_bar) {
  int k = 0;
  if (pharmacode_bar) {
    k = std::abs(modules - symbology::pharmacode::kNarrow) <= std::abs(modules - symbology::pharmacode::kWide)
            ? symbology::pharmacode::kNarrow
            : symbology::pharmacode::kWide;
  } else {
    k = std::max(1, static_cast<int>(std::lround(modules)));
  }
  return {k, std::abs(modules - k)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SignalTrace morph_filter(const SignalTrace& trace, MorphOp op, int se_len) {
  if (se_len < 1 || se_len % 2 == 0 || static_cast<std::size_t>(se_len) > trace.samples.size()) {
    fail(ErrorCode::BadStructuringElement, "structuring element length " + std::to_string(se_len) +
                                               " must be odd and within 1.." + std::to_string(trace.samples.size()));
  }
  SignalTrace out = trace;
  switch (op) {
    case MorphOp::erode:
      out.samples = erode(trace.samples, se_len);
      break;
    case MorphOp::dilate:
      out.samples = dilate(trace.samples, se_len);
      break;
    case MorphOp::open:
      out.samples = dilate(erode(trace.samples, se_len), se_len);
      break;
    case MorphOp::close:
      out.samples = erode(dilate(trace.samples, se_len), se_len);
      break;
  }
  return out;
}

BinaryTrace binarize(const SignalTrace& trace) {
  validate(trace);
  const auto [lo_it, hi_it] = std::minmax_element(trace.samples.begin(), trace.samples.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) fail(ErrorCode::ConstantSignal, "signal has a single distinct value");

  constexpr int kBins = 256;
  const double scale = kBins / (hi - lo);
  const auto bin_of = [&](double v) { return std::min(kBins - 1, static_cast<int>((v - lo) * scale)); };

  std::vector<double> count(kBins, 0.0);
  std::vector<double> sum(kBins, 0.0);
  for (double v : trace.samples) {
    const int b = bin_of(v);
    count[b] += 1.0;
    sum[b] += v;
  }
  const double total_n = static_cast<double>(trace.samples.size());
  double total_sum = 0.0;
  for (double s : sum) total_sum += s;

  // Between-class variance for the split "bins <= k" vs "bins > k".
  std::vector<double> between(kBins - 1, -1.0);
  double n0 = 0.0;
  double s0 = 0.0;
  for (int k = 0; k < kBins - 1; ++k) {
    n0 += count[k];
    s0 += sum[k];
    const double n1 = total_n - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double diff = s0 / n0 - (total_sum - s0) / n1;
    between[k] = (n0 / total_n) * (n1 / total_n) * diff * diff;
  }
  const double best = *std::max_element(between.begin(), between.end());
  // A flat optimum (perfectly separated classes) resolves to its centre.
  int first = -1;
  int last = -1;
  for (int k = 0; k < kBins - 1; ++k) {
    if (between[k] >= best * (1.0 - 1e-12)) {
      if (first < 0) first = k;
      last = k;
    }
  }
  const int split = (first + last) / 2;

  BinaryTrace out;
  out.threshold = lo + (split + 1) / scale;
  out.bits.reserve(trace.samples.size());
  for (double v : trace.samples) out.bits.push_back(bin_of(v) > split ? 1 : 0);
  return out;
}

int default_se_len(int samples_per_module) noexcept { return std::max(1, samples_per_module / 2) | 1; }

symbology::BarPattern extract_pattern(const BinaryTrace& binary, Symbology1D symbology) {
  std::vector<Run> runs;
  for (std::uint8_t b : binary.bits) {
    if (!runs.empty() && runs.back().bar == (b != 0)) {
      runs.back().width += 1.0;
    } else {
      runs.push_back({b != 0, 1.0});
    }
  }
  if (runs.size() < 2) fail(ErrorCode::NoRunsFound, "trace is a single run");
  if (!runs.front().bar) runs.erase(runs.begin());
  if (!runs.empty() && !runs.back().bar) runs.pop_back();
  if (runs.empty()) fail(ErrorCode::NoRunsFound, "no bar runs between the quiet zones");

  // Initial module width estimate.
  double unit = 0.0;
  if (symbology == Symbology1D::pharmacode) {
    std::vector<double> gaps;
    for (const auto& r : runs) {
      if (!r.bar) gaps.push_back(r.width);
    }
    unit = gaps.empty() ? runs.front().width : median(gaps) / symbology::pharmacode::kGap;
  } else {
    double total = 0.0;
    for (const auto& r : runs) total += r.width;
    const std::size_t e = runs.size();
    const std::size_t symbols =
        e > symbology::code128::kStopElements
            ? static_cast<std::size_t>(std::lround(static_cast<double>(e - symbology::code128::kStopElements) /
                                                   symbology::code128::kSymbolElements))
            : 0;
    unit = total / static_cast<double>(symbology::code128::kSymbolModules * symbols + symbology::code128::kStopModules);
  }

  const bool pharma = symbology == Symbology1D::pharmacode;
  const auto sign = [](const Run& r) { return r.bar ? 1.0 : -1.0; };

  // Thresholding widens bars and narrows gaps by a common offset. Refine it
  // and the module width by least squares on the current classification:
  //   width = k * unit + sign * offset
  double offset = 0.0;
  std::vector<int> k(runs.size(), 1);
  for (int iteration = 0; iteration < 3; ++iteration) {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      k[i] = classify((runs[i].width - sign(runs[i]) * offset) / unit, pharma && runs[i].bar).first;
    }
    if (runs.size() < 3) break;
    double skk = 0, sks = 0, sss = 0, skw = 0, ssw = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const double s = sign(runs[i]);
      skk += k[i] * k[i];
      sks += k[i] * s;
      sss += s * s;
      skw += k[i] * runs[i].width;
      ssw += s * runs[i].width;
    }
    const double det = skk * sss - sks * sks;
    if (std::abs(det) < 1e-9) break;
    const double u = (skw * sss - sks * ssw) / det;
    if (!(u > 0.0)) break;
    offset = (skk * ssw - sks * skw) / det;
    unit = u;
  }

  symbology::BarPattern pattern;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const double modules = (runs[i].width - sign(runs[i]) * offset) / unit;
    const auto [cls, distance] = classify(modules, pharma && runs[i].bar);
    if (distance > kModuleTolerance) {
      fail(ErrorCode::AmbiguousModuleWidth, std::string(runs[i].bar ? "bar" : "gap") + " run " + std::to_string(i) +
                                                " measures " + std::to_string(modules) + " modules");
    }
    pattern.elements.push_back({runs[i].bar ? symbology::ElementKind::bar : symbology::ElementKind::gap, cls});
  }
  return pattern;
}

std::string_view to_string(DecodeStage stage) noexcept {
  switch (stage) {
    case DecodeStage::filter:
      return "filter";
    case DecodeStage::binarize:
      return "binarize";
    case DecodeStage::extract:
      return "extract";
    case DecodeStage::decode:
      return "decode";
  }
  return "unknown";
}

Payload decode_trace(const SignalTrace& trace, Symbology1D hint, std::optional<int> se_len) {
  DecodeStage stage = DecodeStage::filter;
  try {
    validate(trace);
    int k = se_len.value_or(trace.meta ? default_se_len(trace.meta->samples_per_module) : 3);
    if (!se_len && static_cast<std::size_t>(k) > trace.samples.size()) {
      k = static_cast<int>(trace.samples.size()) | 1;
      if (static_cast<std::size_t>(k) > trace.samples.size()) k -= 2;
    }
    const SignalTrace filtered = morph_filter(morph_filter(trace, MorphOp::open, k), MorphOp::close, k);

    stage = DecodeStage::binarize;
    const BinaryTrace binary = binarize(filtered);

    stage = DecodeStage::extract;
    const symbology::BarPattern pattern = extract_pattern(binary, hint);

    stage = DecodeStage::decode;
    if (hint == Symbology1D::pharmacode) return symbology::pharmacode_decode(pattern);
    return symbology::code128_decode(pattern);
  } catch (const DecodeFailed&) {
    throw;
  } catch (const Error& e) {
    throw DecodeFailed(stage, e.code(), e.what());
  }
}

}  // namespace udi::readout
