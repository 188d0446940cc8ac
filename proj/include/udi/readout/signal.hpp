#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "udi/symbology/bar_pattern.hpp"
#include "udi/symbology/datamatrix.hpp"

namespace udi::readout {

/// Parameters of the degradation model standing in for an eddy-current,
/// ultrasound or CT scan of an implanted marking.
struct ReadoutParams {
  int samples_per_module = 12;
  double blur_sigma_modules = 0.0;
  /// Noise standard deviation as a fraction of the (attenuated) bar contrast.
  double noise_sigma_fraction = 0.0;
  /// Depth-dependent contrast loss in [0, 1).
  double attenuation = 0.0;
  /// Amplitude of one slow sinusoidal baseline cycle across the trace.
  double baseline_drift_amplitude = 0.0;
  std::uint64_t rng_seed = 0;
  /// Background on each side of the symbol, in modules.
  int quiet_zone_modules = 10;

  bool operator==(const ReadoutParams&) const = default;
};

/// Throws InvalidInput when a field is outside its documented range.
void validate(const ReadoutParams& params);

struct SignalTrace {
  std::vector<double> samples;
  double sample_pitch_mm = 0.0;
  /// Parameters that produced the trace, when synthesized.
  std::optional<ReadoutParams> meta;
};

/// Throws InvalidInput for empty or non-finite traces.
void validate(const SignalTrace& trace);

/// Bars at contrast (1 - attenuation), gaps at 0, Gaussian blur, additive
/// Gaussian noise and sinusoidal drift; reproducible per seed.
SignalTrace synthesize_trace(const symbology::BarPattern& pattern, const ReadoutParams& params);

/// Flips each non-finder module independently with the given probability.
/// Throws InvalidInput if the probability is outside [0, 1].
symbology::BitMatrix perturb_matrix(const symbology::BitMatrix& matrix, double flip_probability,
                                    std::uint64_t rng_seed);

/// CSV with header `index,intensity`. Synthesized traces carry their
/// parameters in leading `#` comment lines so decode can recover them.
std::string to_csv(const SignalTrace& trace);
/// Throws InvalidInput.
SignalTrace trace_from_csv(std::string_view text);

}  // namespace udi::readout
