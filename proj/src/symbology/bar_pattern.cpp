#include "udi/symbology/bar_pattern.hpp"

#include <charconv>
#include <numeric>
#include <sstream>

#include "udi/error.hpp"

namespace udi::symbology {

int BarPattern::total_modules() const noexcept {
  return std::accumulate(elements.begin(), elements.end(), 0,
                         [](int acc, const BarElement& e) { return acc + e.width; });
}

std::size_t BarPattern::bar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : elements) n += e.kind == ElementKind::bar ? 1 : 0;
  return n;
}

std::vector<int> BarPattern::bar_widths() const {
  std::vector<int> out;
  for (const auto& e : elements) {
    if (e.kind == ElementKind::bar) out.push_back(e.width);
  }
  return out;
}

BarPattern from_widths(const std::vector<int>& widths, double module_width_mm) {
  BarPattern p;
  p.module_width_mm = module_width_mm;
  p.elements.reserve(widths.size());
  for (std::size_t i = 0; i < widths.size(); ++i) {
    p.elements.push_back({i % 2 == 0 ? ElementKind::bar : ElementKind::gap, widths[i]});
  }
  return p;
}

void validate_shape(const BarPattern& pattern) {
  const auto& el = pattern.elements;
  if (el.empty()) fail(ErrorCode::InvalidInput, "empty bar pattern");
  if (el.front().kind != ElementKind::bar || el.back().kind != ElementKind::bar) {
    fail(ErrorCode::InvalidInput, "bar pattern must start and end with a bar");
  }
  for (std::size_t i = 0; i < el.size(); ++i) {
    if (el[i].width < 1) fail(ErrorCode::InvalidInput, "element " + std::to_string(i) + " narrower than one module");
    if (i > 0 && el[i].kind == el[i - 1].kind) {
      fail(ErrorCode::InvalidInput, "elements " + std::to_string(i - 1) + " and " + std::to_string(i) + " do not alternate");
    }
  }
}

std::string to_text(const BarPattern& pattern) {
  std::string out;
  for (const auto& e : pattern.elements) {
    if (!out.empty()) out += ' ';
    out += e.kind == ElementKind::bar ? 'B' : 'G';
    out += std::to_string(e.width);
  }
  return out;
}

BarPattern bar_pattern_from_text(std::string_view text) {
  BarPattern p;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) {
    if (token.size() < 2 || (token[0] != 'B' && token[0] != 'G')) {
      fail(ErrorCode::InvalidInput, "bad bar pattern token '" + token + "'");
    }
    int width = 0;
    const auto [ptr, ec] = std::from_chars(token.data() + 1, token.data() + token.size(), width);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      fail(ErrorCode::InvalidInput, "bad width in token '" + token + "'");
    }
    p.elements.push_back({token[0] == 'B' ? ElementKind::bar : ElementKind::gap, width});
  }
  validate_shape(p);
  return p;
}

}  // namespace udi::symbology
