#include "udi/symbology/code128.hpp"

#include <map>

#include "udi/error.hpp"

namespace udi::symbology {

namespace code128 {

const std::array<std::string_view, 107>& widths_table() noexcept {
  static constexpr std::array<std::string_view, 107> kTable{
      "212222", "222122", "222221", "121223", "121322", "131222", "122213", "122312", "132212", "221213",
      "221312", "231212", "112232", "122132", "122231", "113222", "123122", "123221", "223211", "221132",
      "221231", "213212", "223112", "312131", "311222", "321122", "321221", "312212", "322112", "322211",
      "212123", "212321", "232121", "111323", "131123", "131321", "112313", "132113", "132311", "211313",
      "231113", "231311", "112133", "112331", "132131", "113123", "113321", "133121", "313121", "211331",
      "231131", "213113", "213311", "213131", "311123", "311321", "331121", "312113", "312311", "332111",
      "314111", "221411", "431111", "111224", "111422", "121124", "121421", "141122", "141221", "112214",
      "112412", "122114", "122411", "142112", "142211", "241211", "221114", "413111", "241112", "134111",
      "111242", "121142", "121241", "114212", "124112", "124211", "411212", "421112", "421211", "212141",
      "214121", "412121", "111143", "111341", "131141", "114113", "114311", "411113", "411311", "113141",
      "114131", "311141", "411131", "211412", "211214", "211232", "2331112"};
  return kTable;
}

}  // namespace code128

namespace {

const std::map<std::string, int>& reverse_table() {
  static const std::map<std::string, int> table = [] {
    std::map<std::string, int> m;
    const auto& t = code128::widths_table();
    for (int v = 0; v < code128::kStop; ++v) m.emplace(std::string(t[v]), v);
    return m;
  }();
  return table;
}

int checksum(const std::vector<int>& symbols_without_check) {
  // symbols_without_check[0] is the start symbol, weight 1 like the first data symbol.
  long sum = symbols_without_check.front();
  for (std::size_t i = 1; i < symbols_without_check.size(); ++i) {
    sum += static_cast<long>(i) * symbols_without_check[i];
  }
  return static_cast<int>(sum % code128::kModulus);
}

}  // namespace

std::vector<int> code128_symbols(std::string_view text) {
  std::vector<int> symbols{code128::kStartB};
  symbols.reserve(text.size() + 3);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 32 || c > 127) {
      fail(ErrorCode::UnsupportedCharacter,
           "character code " + std::to_string(c) + " at position " + std::to_string(i) + " is outside code set B");
    }
    symbols.push_back(c - 32);
  }
  symbols.push_back(checksum(symbols));
  symbols.push_back(code128::kStop);
  return symbols;
}

BarPattern code128_render(const std::vector<int>& symbols) {
  const auto& table = code128::widths_table();
  std::vector<int> widths;
  for (int s : symbols) {
    if (s < 0 || s > code128::kStop) fail(ErrorCode::InvalidInput, "symbol value " + std::to_string(s) + " out of range");
    for (char w : table[s]) widths.push_back(w - '0');
  }
  return from_widths(widths);
}

BarPattern code128_encode(std::string_view text) { return code128_render(code128_symbols(text)); }

std::vector<int> code128_read_symbols(const BarPattern& pattern) {
  const auto& el = pattern.elements;
  if (el.size() < code128::kStopElements || (el.size() - code128::kStopElements) % code128::kSymbolElements != 0 ||
      el.front().kind != ElementKind::bar || el.back().kind != ElementKind::bar) {
    fail(ErrorCode::BadStopPattern, "element count " + std::to_string(el.size()) + " does not end in a stop pattern");
  }
  std::string stop;
  for (std::size_t i = el.size() - code128::kStopElements; i < el.size(); ++i) stop += std::to_string(el[i].width);
  if (stop != code128::widths_table()[code128::kStop]) {
    fail(ErrorCode::BadStopPattern, "trailing elements '" + stop + "' are not the stop pattern");
  }

  std::vector<int> symbols;
  const auto& lookup = reverse_table();
  for (std::size_t i = 0; i + code128::kStopElements < el.size(); i += code128::kSymbolElements) {
    std::string key;
    for (std::size_t j = 0; j < code128::kSymbolElements; ++j) {
      const int w = el[i + j].width;
      key += (w >= 1 && w <= 9) ? static_cast<char>('0' + w) : '?';
    }
    const auto it = lookup.find(key);
    if (it == lookup.end()) {
      fail(ErrorCode::UnknownSymbolPattern, "no symbol with widths '" + key + "' at element " + std::to_string(i));
    }
    symbols.push_back(it->second);
  }
  symbols.push_back(code128::kStop);
  return symbols;
}

std::string code128_decode(const BarPattern& pattern) {
  const std::vector<int> symbols = code128_read_symbols(pattern);
  // start + check + stop at minimum
  if (symbols.size() < 3) fail(ErrorCode::BadStopPattern, "pattern too short for start and check symbols");
  if (symbols.front() != code128::kStartB) {
    fail(ErrorCode::BadStartSymbol, "symbol " + std::to_string(symbols.front()) + " is not start code B");
  }
  const std::vector<int> body(symbols.begin(), symbols.end() - 2);
  const int expected = checksum(body);
  const int got = symbols[symbols.size() - 2];
  if (expected != got) {
    fail(ErrorCode::ChecksumMismatch, "check symbol " + std::to_string(got) + ", computed " + std::to_string(expected));
  }
  std::string text;
  for (std::size_t i = 1; i < body.size(); ++i) {
    if (body[i] > 95) {
      fail(ErrorCode::UnsupportedCharacter, "symbol " + std::to_string(body[i]) + " is a control symbol outside set-B data");
    }
    text += static_cast<char>(body[i] + 32);
  }
  return text;
}

}  // namespace udi::symbology
