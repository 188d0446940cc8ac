#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "udi/symbology/bar_pattern.hpp"

namespace udi::symbology {

namespace code128 {
inline constexpr int kStartA = 103;
inline constexpr int kStartB = 104;
inline constexpr int kStartC = 105;
inline constexpr int kStop = 106;
inline constexpr int kModulus = 103;
/// Symbols are 3 bars + 3 gaps spanning 11 modules; the stop symbol adds a
/// terminating bar (13 modules, 7 elements).
inline constexpr int kSymbolModules = 11;
inline constexpr int kStopModules = 13;
inline constexpr std::size_t kSymbolElements = 6;
inline constexpr std::size_t kStopElements = 7;

/// Element widths for symbol values 0..105 (6 widths) and the stop (7 widths).
const std::array<std::string_view, 107>& widths_table() noexcept;
}  // namespace code128

/// Symbol value sequence for a set-B payload: start B, data (ASCII-32),
/// check symbol, stop. Throws UnsupportedCharacter outside ASCII 32-127.
std::vector<int> code128_symbols(std::string_view text);

/// Renders a symbol value sequence to bars and gaps.
BarPattern code128_render(const std::vector<int>& symbols);

/// Throws UnsupportedCharacter.
BarPattern code128_encode(std::string_view text);

/// Splits a pattern back into symbol values (stop included, checksum not
/// verified). Throws BadStopPattern, UnknownSymbolPattern.
std::vector<int> code128_read_symbols(const BarPattern& pattern);

/// Throws BadStartSymbol, BadStopPattern, ChecksumMismatch,
/// UnknownSymbolPattern, UnsupportedCharacter.
std::string code128_decode(const BarPattern& pattern);

}  // namespace udi::symbology
