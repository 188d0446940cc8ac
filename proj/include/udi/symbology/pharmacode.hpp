#pragma once

#include <cstdint>

#include "udi/symbology/bar_pattern.hpp"

namespace udi::symbology {

/// One-track Pharmacode (Laetus convention): narrow bar = 1 module and
/// bit-value 1, wide bar = 3 modules and bit-value 2, gaps 2 modules.
/// The leftmost bar is the most significant:
///   value = sum_k b_k * 2^(n-1-k)
namespace pharmacode {
inline constexpr std::int32_t kMinValue = 3;
inline constexpr std::int32_t kMaxValue = 131070;
inline constexpr int kNarrow = 1;
inline constexpr int kWide = 3;
inline constexpr int kGap = 2;
inline constexpr std::size_t kMinBars = 2;
inline constexpr std::size_t kMaxBars = 16;
}  // namespace pharmacode

/// Throws ValueOutOfRange outside [3, 131070].
BarPattern pharmacode_encode(std::int32_t value);

/// Throws BarCountOutOfRange, BadBarWidth.
std::int32_t pharmacode_decode(const BarPattern& pattern);

}  // namespace udi::symbology
