#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "udi/error.hpp"
#include "udi/readout/signal.hpp"
#include "udi/symbology/bar_pattern.hpp"

namespace udi::readout {

enum class MorphOp { erode, dilate, open, close };

/// Flat structuring element of odd length, edge-replicated borders.
/// erode = sliding minimum, dilate = sliding maximum, open = dilate(erode),
/// close = erode(dilate). Throws BadStructuringElement.
SignalTrace morph_filter(const SignalTrace& trace, MorphOp op, int se_len);

struct BinaryTrace {
  std::vector<std::uint8_t> bits;  // 1 = above threshold (bar)
  double threshold = 0.0;
};

/// Otsu threshold over a 256-bin histogram spanning [min, max].
/// Throws ConstantSignal.
BinaryTrace binarize(const SignalTrace& trace);

enum class Symbology1D { pharmacode, code128 };

/// Widths further than this from the nearest admissible module count are
/// rejected instead of rounded.
inline constexpr double kModuleTolerance = 0.25;

/// Run-length encodes, drops the quiet zones, estimates the module width and
/// classifies every run to a whole number of modules.
/// Throws NoRunsFound, AmbiguousModuleWidth.
symbology::BarPattern extract_pattern(const BinaryTrace& binary, Symbology1D symbology);

/// Default structuring element: samples_per_module / 2, forced odd.
int default_se_len(int samples_per_module) noexcept;

enum class DecodeStage { filter, binarize, extract, decode };

std::string_view to_string(DecodeStage stage) noexcept;

/// Any pipeline failure, tagged with the stage and the underlying cause.
class DecodeFailed : public Error {
 public:
  DecodeFailed(DecodeStage stage, ErrorCode cause, const std::string& detail)
      : Error(ErrorCode::DecodeFailed,
              "stage " + std::string(to_string(stage)) + ": " + detail),
        stage_(stage),
        cause_(cause) {}

  DecodeStage stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  DecodeStage stage_;
  ErrorCode cause_;
};

using Payload = std::variant<std::int32_t, std::string>;

/// close(open(trace)) -> binarize -> extract_pattern -> symbology decode.
/// `se_len` defaults from the trace metadata (samples_per_module), else 3.
/// Throws DecodeFailed.
Payload decode_trace(const SignalTrace& trace, Symbology1D hint, std::optional<int> se_len = std::nullopt);

}  // namespace udi::readout
