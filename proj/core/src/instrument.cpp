#include "qjump/instrument.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "qjump/error.hpp"

namespace qjump {

double sigmoid(double x) {
  if (x > 745.0) return 1.0;
  if (x < -745.0) return 0.0;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void MonitorParams::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) throw InputError("monitor alpha must be >= 0");
  if (!std::isfinite(tau) || !(tau > 0.0)) throw InputError("monitor tau must be > 0");
}

double monitor(double dt, const MonitorParams& m) {
  const double decay = std::exp(-dt / m.tau);
  if (m.alpha == 0.0) {
    if (dt < 0.0) return 0.0;
    if (dt == 0.0) return 0.5;
    return decay;
  }
  const double gate = sigmoid(dt / m.alpha);
  // exp(-dt/tau) overflows far in the pre-jump tail where the gate is 0.
  return gate == 0.0 ? 0.0 : gate * decay;
}

namespace {

// sigmoid(x / alpha) - H(x), times exp(-x / tau), evaluated in log space.
double gate_correction(double x, const MonitorParams& m) {
  if (x < 0.0) {
    const double u = x / m.alpha;
    return std::exp(u - x / m.tau - std::log1p(std::exp(u)));
  }
  const double u = -x / m.alpha;
  return -std::exp(u - x / m.tau - std::log1p(std::exp(u)));
}

constexpr std::array<double, 8> kGaussNodes{
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights{
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

double correction_integral(double a, double b, const MonitorParams& m) {
  if (!(b > a)) return 0.0;
  const double piece = std::min(m.alpha, m.tau);
  const auto pieces = static_cast<std::size_t>(std::ceil((b - a) / piece));
  const double len = (b - a) / static_cast<double>(pieces);
  double sum = 0.0;
  for (std::size_t k = 0; k < pieces; ++k) {
    const double mid = a + (static_cast<double>(k) + 0.5) * len;
    for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
      sum += kGaussWeights[q] * gate_correction(mid + 0.5 * len * kGaussNodes[q], m);
    }
  }
  return 0.5 * len * sum;
}

}  // namespace

double monitor_integral(double a, double b, const MonitorParams& m) {
  if (!(b > a)) return 0.0;
  double total = 0.0;
  const double lo = std::max(a, 0.0);
  if (b > lo) total = -m.tau * std::exp(-lo / m.tau) * std::expm1(-(b - lo) / m.tau);
  if (m.alpha == 0.0) return total;

  // The correction decays as exp(-40) beyond these distances from the jump.
  constexpr double kCutoff = 40.0;
  const double right = kCutoff / (1.0 / m.alpha + 1.0 / m.tau);
  const double left_rate = 1.0 / m.alpha - 1.0 / m.tau;
  const double left = left_rate > 0.0 ? kCutoff / left_rate : std::numeric_limits<double>::infinity();
  total += correction_integral(std::max(a, -left), std::min(b, 0.0), m);
  total += correction_integral(std::max(a, 0.0), std::min(b, right), m);
  return total;
}

double rise_time_10_90(double alpha) { return 2.0 * std::log(9.0) * alpha; }

double rise_time_10_90_numeric(const MonitorParams& m) {
  m.validate();
  if (m.alpha == 0.0) return 0.0;
  const double eps = m.alpha / m.tau;
  if (eps >= 1.0) throw InputError("monitor has no rising edge for alpha >= tau");

  // Work in x = dt / alpha; the maximum sits where 1 - sigmoid(x) = eps.
  const auto f = [&](double x) { return monitor(x * m.alpha, m); };
  const double x_peak = std::log((1.0 - eps) / eps);
  const double peak = f(x_peak);

  const auto crossing = [&](double level) {
    double hi = x_peak;
    double lo = x_peak - 1.0;
    while (f(lo) >= level) lo -= 2.0 * (hi - lo);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) < level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  return (crossing(0.9 * peak) - crossing(0.1 * peak)) * m.alpha;
}

void Histogram::validate() const {
  if (!std::isfinite(bin_width) || !(bin_width > 0.0)) {
    throw InputError("histogram bin width must be > 0");
  }
  if (!std::isfinite(t_start)) throw NonFiniteInput("histogram start time is not finite");
  if (counts.size() < 2) throw InputError("histogram needs at least 2 bins");
  for (const double c : counts) {
    if (!std::isfinite(c) || c < 0.0) throw InputError("histogram counts must be non-negative");
  }
}

double Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

void DetectorResponse::validate() const {
  if (!std::isfinite(bin_width) || !(bin_width > 0.0)) {
    throw InputError("response bin width must be > 0");
  }
  if (weights.empty() || weights.size() != offsets.size()) {
    throw InputError("response needs matching, non-empty offsets and weights");
  }
  double sum = 0.0;
  for (const double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InputError("response weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw InputError("response weights must sum to 1");
  for (std::size_t k = 1; k < offsets.size(); ++k) {
    if (std::abs(offsets[k] - offsets[k - 1] - bin_width) > 1e-6 * bin_width) {
      throw InputError("response offsets must be uniformly spaced by the bin width");
    }
  }
}

long DetectorResponse::first_lag() const {
  return std::lround(offsets.front() / bin_width);
}

double DetectorResponse::phase() const {
  return offsets.front() / bin_width - static_cast<double>(first_lag());
}

double DetectorResponse::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) m += weights[k] * offsets[k];
  return m;
}

double DetectorResponse::stddev() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    v += weights[k] * (offsets[k] - m) * (offsets[k] - m);
  }
  return std::sqrt(v);
}

double DetectorResponse::fwhm() const {
  // A delta, possibly with empty neighbours.
  if (std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }) < 2) return 0.0;
  const auto peak_it = std::max_element(weights.begin(), weights.end());
  const auto peak = static_cast<std::size_t>(peak_it - weights.begin());
  const double half = 0.5 * *peak_it;

  // Walk outwards from the peak to the first samples below half maximum.
  std::size_t lo = peak;
  while (lo > 0 && weights[lo - 1] >= half) --lo;
  std::size_t hi = peak;
  while (hi + 1 < weights.size() && weights[hi + 1] >= half) ++hi;

  double left = offsets[lo] - 0.5 * bin_width;
  if (lo > 0) {
    const double frac = (half - weights[lo - 1]) / (weights[lo] - weights[lo - 1]);
    left = offsets[lo - 1] + frac * bin_width;
  }
  double right = offsets[hi] + 0.5 * bin_width;
  if (hi + 1 < weights.size()) {
    const double frac = (weights[hi] - half) / (weights[hi] - weights[hi + 1]);
    right = offsets[hi] + frac * bin_width;
  }
  return right - left;
}

double DetectorResponse::support() const { return offsets.back() - offsets.front(); }

DetectorResponse normalize_response(const Histogram& raw, std::optional<BackgroundFloor> floor) {
  raw.validate();
  std::vector<double> counts = raw.counts;

  if (floor) {
    const auto peak = static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    const double t_peak = raw.center(peak);
    std::vector<double> outside;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (std::abs(raw.center(i) - t_peak) > floor->half_window) outside.push_back(counts[i]);
    }
    if (!outside.empty()) {
      const auto mid = outside.begin() + static_cast<std::ptrdiff_t>(outside.size() / 2);
      std::nth_element(outside.begin(), mid, outside.end());
      double median = *mid;
      if (outside.size() % 2 == 0) {
        median = 0.5 * (median + *std::max_element(outside.begin(), mid));
      }
      for (double& c : counts) c = std::max(0.0, c - median);
    }
  }

  const auto first = std::find_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; });
  if (first == counts.end()) throw EmptyHistogram("response histogram has no counts");
  const auto last = std::find_if(counts.rbegin(), counts.rend(), [](double c) { return c > 0.0; });
  const auto i0 = static_cast<std::size_t>(first - counts.begin());
  const auto i1 = counts.size() - static_cast<std::size_t>(last - counts.rbegin());

  DetectorResponse g;
  g.bin_width = raw.bin_width;
  const double total = std::accumulate(counts.begin() + static_cast<std::ptrdiff_t>(i0),
                                       counts.begin() + static_cast<std::ptrdiff_t>(i1), 0.0);
  double centroid = 0.0;
  for (std::size_t i = i0; i < i1; ++i) {
    g.weights.push_back(counts[i] / total);
    centroid += counts[i] / total * raw.center(i);
  }
  for (std::size_t i = i0; i < i1; ++i) g.offsets.push_back(raw.center(i) - centroid);

  // Final pass so the weights sum to 1 to rounding.
  const double sum = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
  for (double& w : g.weights) w /= sum;
  return g;
}

DetectorResponse delta_response(double bin_width) {
  if (!(bin_width > 0.0)) throw InputError("bin width must be > 0");
  return DetectorResponse{bin_width, {0.0}, {1.0}};
}

DetectorResponse gaussian_response(double fwhm, double bin_width, double n_sigma) {
  if (!(bin_width > 0.0)) throw InputError("bin width must be > 0");
  if (!std::isfinite(fwhm) || fwhm < 0.0) throw InputError("FWHM must be >= 0");
  if (fwhm == 0.0) return delta_response(bin_width);
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const auto half = static_cast<long>(std::ceil(n_sigma * sigma / bin_width));
  Histogram h;
  h.bin_width = bin_width;
  h.t_start = -static_cast<double>(half) * bin_width;
  for (long i = -half; i <= half; ++i) {
    const double t = static_cast<double>(i) * bin_width;
    h.counts.push_back(std::exp(-0.5 * t * t / (sigma * sigma)));
  }
  return normalize_response(h);
}

ConvolutionPadding convolution_padding(const DetectorResponse& g) {
  const long lag_min = g.first_lag();
  const long lag_max = lag_min + static_cast<long>(g.size()) - 1;
  return {static_cast<std::size_t>(std::max(0L, lag_max)),
          static_cast<std::size_t>(std::max(0L, -lag_min))};
}

std::optional<double> edge_10_90(std::span<const double> values, const UniformGrid& grid,
                                 double baseline, double plateau, std::size_t search_from) {
  if (values.size() != grid.size) throw GridMismatch("edge values do not match the grid");
  const auto cross = [&](double level, std::size_t from) -> std::optional<std::pair<double, std::size_t>> {
    for (std::size_t i = std::max<std::size_t>(from, 1); i < values.size(); ++i) {
      if (values[i] >= level && values[i - 1] < level) {
        const double frac = (level - values[i - 1]) / (values[i] - values[i - 1]);
        return std::pair{grid.at(i - 1) + frac * grid.step, i};
      }
    }
    return std::nullopt;
  };
  const double span = plateau - baseline;
  const auto lo = cross(baseline + 0.1 * span, search_from);
  if (!lo) return std::nullopt;
  const auto hi = cross(baseline + 0.9 * span, lo->second);
  if (!hi) return std::nullopt;
  return hi->first - lo->first;
}

}  // namespace qjump
