#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace udi::symbology {

enum class ElementKind { bar, gap };

struct BarElement {
  ElementKind kind;
  int width;  // modules

  bool operator==(const BarElement&) const = default;
};

/// A 1D marking as alternating bars and gaps, measured in modules.
/// Starts and ends with a bar.
struct BarPattern {
  std::vector<BarElement> elements;
  double module_width_mm = 0.5;

  bool operator==(const BarPattern&) const = default;

  int total_modules() const noexcept;
  std::size_t bar_count() const noexcept;
  /// Widths of the bars only, in order.
  std::vector<int> bar_widths() const;
};

/// Builds a pattern from alternating widths, first one a bar.
BarPattern from_widths(const std::vector<int>& widths, double module_width_mm = 0.5);

/// Throws InvalidInput if the pattern is empty, does not alternate, does not
/// start and end with a bar, or has a width below one module.
void validate_shape(const BarPattern& pattern);

/// Compact text form: "B1 G2 B3".
std::string to_text(const BarPattern& pattern);
/// Parses the compact text form. Throws InvalidInput.
BarPattern bar_pattern_from_text(std::string_view text);

}  // namespace udi::symbology
