#pragma once

// Jump monitor function, histograms, detector impulse response and the
// discrete convolution that maps the ideal model onto detected counts.
// Times are in seconds.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qjump/grid.hpp"

namespace qjump {

/// Logistic 1 / (1 + exp(-x)); exactly 0 / 1 beyond |x| > 745.
[[nodiscard]] double sigmoid(double x);

struct MonitorParams {
  double alpha = 0.0;  ///< jump timescale, 0 means an ideal step
  double tau = 1.0;    ///< exponential decay constant

  void validate() const;
};

/// sigmoid(dt / alpha) * exp(-dt / tau); for alpha == 0 the sigmoid becomes a
/// step with step(0) = 1/2.
[[nodiscard]] double monitor(double dt, const MonitorParams& m);

/// Integral of monitor over [a, b]: closed form for the step-exponential part,
/// piecewise Gauss-Legendre for the sigmoid correction around dt = 0.
[[nodiscard]] double monitor_integral(double a, double b, const MonitorParams& m);

/// 10%-90% rise time of sigmoid(dt / alpha): 2 ln(9) alpha.
[[nodiscard]] double rise_time_10_90(double alpha);

/// 10%-90% rise of the full monitor function, measured against its peak by
/// root bracketing. Validation counterpart of rise_time_10_90.
[[nodiscard]] double rise_time_10_90_numeric(const MonitorParams& m);

/// Uniformly binned counts. Bin i is centered at t_start + i * bin_width.
/// Counts are kept as doubles so exact model curves can be stored too; data
/// read from disk or produced by the generator are integral.
struct Histogram {
  double bin_width = 0.0;
  double t_start = 0.0;
  std::vector<double> counts;

  void validate() const;
  [[nodiscard]] std::size_t size() const { return counts.size(); }
  [[nodiscard]] double center(std::size_t i) const {
    return t_start + bin_width * static_cast<double>(i);
  }
  [[nodiscard]] UniformGrid grid() const { return {t_start, bin_width, counts.size()}; }
  [[nodiscard]] double total() const;
};

/// Normalized two-detector timing-difference distribution. offsets[k] is the
/// position of weight k relative to the weighted centroid, so that
/// sum(weights * offsets) == 0. All offsets share one sub-bin phase:
/// offsets[k] = (first_lag + k + phase) * bin_width.
struct DetectorResponse {
  double bin_width = 0.0;
  std::vector<double> offsets;
  std::vector<double> weights;

  void validate() const;
  [[nodiscard]] std::size_t size() const { return weights.size(); }
  /// Integer bin lag of offsets[0] (rounded).
  [[nodiscard]] long first_lag() const;
  /// Common fractional shift in units of bin_width, in [-0.5, 0.5].
  [[nodiscard]] double phase() const;
  [[nodiscard]] double mean() const;
  [[nodiscard]] double stddev() const;
  /// Full width at half maximum, linearly interpolated between bins. 0 for a
  /// single-bin (ideal) response.
  [[nodiscard]] double fwhm() const;
  /// Span between the first and last offset.
  [[nodiscard]] double support() const;
};

struct BackgroundFloor {
  /// Bins with |t - peak| > half_window are used for the median floor.
  double half_window = 2e-9;
};

/// g_D = G_D / sum(G_D), re-centered on its centroid. With a floor, the median
/// of the bins outside the central window is subtracted (negatives clamped)
/// before normalizing. Throws EmptyHistogram if nothing is left.
[[nodiscard]] DetectorResponse normalize_response(const Histogram& raw,
                                                  std::optional<BackgroundFloor> floor = {});

/// Ideal detector: a single unit weight at offset 0.
[[nodiscard]] DetectorResponse delta_response(double bin_width);

/// Gaussian response sampled at bin centers out to +-n_sigma.
[[nodiscard]] DetectorResponse gaussian_response(double fwhm, double bin_width,
                                                 double n_sigma = 6.0);

/// Bins the convolution needs on each side of the target grid.
struct ConvolutionPadding {
  std::size_t before = 0;
  std::size_t after = 0;
};
[[nodiscard]] ConvolutionPadding convolution_padding(const DetectorResponse& g);

/// Supports longer than this go through the FFT path.
inline constexpr std::size_t kDirectConvolutionLimit = 512;

/// out[i] = sum_k weights[k] * extended[i + padding.before - lag_k], with
/// lag_k = first_lag + k. `extended` must hold the target grid plus
/// convolution_padding(g) on both ends; the result has the target length.
/// The sub-bin phase is not applied here (callers sample on a grid already
/// shifted by phase * bin_width). Throws GridMismatch on inconsistent sizes or
/// bin widths.
[[nodiscard]] std::vector<double> convolve(std::span<const double> extended,
                                           double bin_width, const DetectorResponse& g);
[[nodiscard]] std::vector<double> convolve_direct(std::span<const double> extended,
                                                  double bin_width, const DetectorResponse& g);
[[nodiscard]] std::vector<double> convolve_fft(std::span<const double> extended,
                                               double bin_width, const DetectorResponse& g);

/// 10%-90% width of a rising edge in sampled values. The levels are
/// baseline + {0.1, 0.9} * (plateau - baseline); crossings are linearly
/// interpolated and searched from `search_from` forward. Returns nullopt when
/// either crossing is missing.
[[nodiscard]] std::optional<double> edge_10_90(std::span<const double> values,
                                               const UniformGrid& grid, double baseline,
                                               double plateau, std::size_t search_from = 0);

}  // namespace qjump
