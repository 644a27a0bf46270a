#pragma once

// Seeded Monte Carlo generation of coincidence histograms from the monitor
// model, for closed-loop validation of the fitter.

#include <cstdint>
#include <optional>

#include "qjump/instrument.hpp"
#include "qjump/random.hpp"

namespace qjump {

/// Phenomenological quantum-beat modulation 1 + amplitude cos(2 pi f t + phase).
struct BeatParams {
  double amplitude = 0.0;  ///< in [0, 1)
  double frequency = 0.0;  ///< Hz
  double phase = 0.0;      ///< rad
};

struct SynthConfig {
  MonitorParams monitor{4.7e-12, 7e-9};
  double dt0 = 14e-9;               ///< technical delay
  std::uint64_t n_pairs = 1'000'000;
  double background_rate = 0.0;     ///< mean accidentals per bin
  std::optional<BeatParams> beat;
  double t_min = 4e-9;
  double t_max = 64e-9;
  double bin_width = 10e-12;
  std::uint64_t seed = 1;

  void validate() const;
  [[nodiscard]] std::size_t bin_count() const;
  /// Histogram grid implied by (t_min, t_max, bin_width).
  [[nodiscard]] UniformGrid grid() const;
};

/// Spacing of the internal inverse-CDF grid.
inline constexpr double kSamplingStep = 1e-12;

/// Unnormalized intensity monitor(dt - dt0) * (1 + beat) at dt.
[[nodiscard]] double true_coincidence_intensity(double dt, const SynthConfig& c);

/// Intensity divided by its integral over [t_min, t_max] (trapezoid rule on
/// the sampling grid), i.e. a probability density in 1/s.
[[nodiscard]] double true_coincidence_density(double dt, const SynthConfig& c);

/// Integral of true_coincidence_intensity over the window.
[[nodiscard]] double intensity_normalization(const SynthConfig& c);

/// Draws n_pairs delays by inverse-CDF sampling, adds one jitter draw from g
/// per pair, adds Poisson(background_rate) accidentals per bin and bins the
/// result. Bit-identical for identical inputs regardless of thread count.
/// Throws WindowOverflow if more than 1% of the pairs leave the window.
[[nodiscard]] Histogram sample_events(const SynthConfig& c, const DetectorResponse& g,
                                      unsigned threads = 0);

}  // namespace qjump
