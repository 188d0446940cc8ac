#include "udi/symbology/pharmacode.hpp"

#include <algorithm>

#include "udi/error.hpp"

namespace udi::symbology {

BarPattern pharmacode_encode(std::int32_t value) {
  if (value < pharmacode::kMinValue || value > pharmacode::kMaxValue) {
    fail(ErrorCode::ValueOutOfRange, "pharmacode value " + std::to_string(value) + " outside [3, 131070]");
  }
  // Peel bars off the least significant end: an odd remainder needs a narrow
  // bar (1), an even one a wide bar (2).
  std::vector<int> bars;
  for (std::int32_t v = value; v > 0;) {
    if (v % 2 == 1) {
      bars.push_back(pharmacode::kNarrow);
      v = (v - 1) / 2;
    } else {
      bars.push_back(pharmacode::kWide);
      v = (v - 2) / 2;
    }
  }
  std::reverse(bars.begin(), bars.end());

  BarPattern p;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    if (i > 0) p.elements.push_back({ElementKind::gap, pharmacode::kGap});
    p.elements.push_back({ElementKind::bar, bars[i]});
  }
  return p;
}

std::int32_t pharmacode_decode(const BarPattern& pattern) {
  const std::size_t n = pattern.bar_count();
  if (n < pharmacode::kMinBars || n > pharmacode::kMaxBars) {
    fail(ErrorCode::BarCountOutOfRange, "pharmacode needs 2-16 bars, got " + std::to_string(n));
  }
  validate_shape(pattern);
  std::int32_t value = 0;
  for (std::size_t i = 0; i < pattern.elements.size(); ++i) {
    const auto& e = pattern.elements[i];
    if (e.kind == ElementKind::gap) {
      if (e.width != pharmacode::kGap) {
        fail(ErrorCode::BadBarWidth, "gap " + std::to_string(i) + " is " + std::to_string(e.width) + " modules, expected 2");
      }
      continue;
    }
    int bit = 0;
    if (e.width == pharmacode::kNarrow) {
      bit = 1;
    } else if (e.width == pharmacode::kWide) {
      bit = 2;
    } else {
      fail(ErrorCode::BadBarWidth, "bar " + std::to_string(i) + " is " + std::to_string(e.width) + " modules, expected 1 or 3");
    }
    value = value * 2 + bit;
  }
  return value;
}

}  // namespace udi::symbology
