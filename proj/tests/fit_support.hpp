#pragma once

#include "qjump/fit.hpp"
#include "qjump/synth.hpp"

namespace qjump::testing {

inline constexpr double kPsec = 1e-12;
inline constexpr double kNsec = 1e-9;

// Reference regime on a short window around the jump: 10 ps bins,
// dt0 = 14 ns, tau = 7 ns, a few thousand counts per bin at the peak.
inline SynthConfig short_window_config(std::uint64_t seed, double alpha = 4.7 * kPsec) {
  SynthConfig c;
  c.monitor = {alpha, 7 * kNsec};
  c.t_min = 13.5 * kNsec;
  c.t_max = 16.5 * kNsec;
  c.n_pairs = 400000;
  c.background_rate = 10.0;
  c.seed = seed;
  return c;
}

inline FitSpec spec_near(const Histogram& h, const ParamSet& start) {
  FitSpec s;
  s.initial = start;
  s.lower = default_lower_bounds();
  s.upper = default_upper_bounds();
  s.window_lo = h.center(0);
  // The synthetic density stops at t_max, so jitter empties the last bins
  // relative to the model; keep them out of the fit.
  s.window_hi = h.center(h.size() - 1) - 200 * kPsec;
  return s;
}

inline Histogram exact_histogram(const ParamSet& p, const DetectorResponse& g, double t_start,
                                 std::size_t bins) {
  const UniformGrid grid{t_start, g.bin_width, bins};
  return Histogram{g.bin_width, t_start, model_curve(p, g, grid)};
}

}  // namespace qjump::testing
