#include "qjump/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "qjump/error.hpp"

namespace qjump {
namespace {

constexpr std::uint64_t kChunkSize = 1u << 16;

std::size_t sampling_points(const SynthConfig& c) {
  return static_cast<std::size_t>(std::llround((c.t_max - c.t_min) / kSamplingStep)) + 1;
}

// Cumulative trapezoid integral of the intensity on the sampling grid.
std::vector<double> cumulative_intensity(const SynthConfig& c) {
  const std::size_t n = sampling_points(c);
  const double step = (c.t_max - c.t_min) / static_cast<double>(n - 1);
  std::vector<double> cdf(n, 0.0);
  double prev = true_coincidence_intensity(c.t_min, c);
  for (std::size_t j = 1; j < n; ++j) {
    const double cur = true_coincidence_intensity(c.t_min + step * static_cast<double>(j), c);
    cdf[j] = cdf[j - 1] + 0.5 * (prev + cur) * step;
    prev = cur;
  }
  return cdf;
}

}  // namespace

void SynthConfig::validate() const {
  monitor.validate();
  if (n_pairs == 0) throw InputError("n_pairs must be > 0");
  if (!std::isfinite(bin_width) || !(bin_width > 0.0)) throw InputError("bin_width must be > 0");
  if (!std::isfinite(t_min) || !std::isfinite(t_max) || !std::isfinite(dt0) ||
      !(t_min < dt0 && dt0 < t_max)) {
    throw InputError("synthetic window must satisfy t_min < dt0 < t_max");
  }
  if (!std::isfinite(background_rate) || background_rate < 0.0) {
    throw InputError("background_rate must be >= 0");
  }
  if (beat) {
    if (!(beat->amplitude >= 0.0 && beat->amplitude < 1.0)) {
      throw InputError("beat amplitude must lie in [0, 1)");
    }
    if (!std::isfinite(beat->frequency) || !std::isfinite(beat->phase)) {
      throw NonFiniteInput("beat frequency and phase must be finite");
    }
  }
  const double bins = (t_max - t_min) / bin_width;
  if (std::abs(bins - std::round(bins)) > 1e-6 * bins || std::round(bins) < 2.0) {
    throw InputError("window length must be a whole number (>= 2) of bins");
  }
}

std::size_t SynthConfig::bin_count() const {
  return static_cast<std::size_t>(std::llround((t_max - t_min) / bin_width));
}

UniformGrid SynthConfig::grid() const { return {t_min + 0.5 * bin_width, bin_width, bin_count()}; }

double true_coincidence_intensity(double dt, const SynthConfig& c) {
  const double shifted = dt - c.dt0;
  double value = monitor(shifted, c.monitor);
  if (c.beat) {
    value *= 1.0 + c.beat->amplitude *
                       std::cos(2.0 * std::numbers::pi * c.beat->frequency * shifted + c.beat->phase);
  }
  return value;
}

double intensity_normalization(const SynthConfig& c) {
  c.validate();
  return cumulative_intensity(c).back();
}

double true_coincidence_density(double dt, const SynthConfig& c) {
  if (dt < c.t_min || dt > c.t_max) return 0.0;
  return true_coincidence_intensity(dt, c) / intensity_normalization(c);
}

Histogram sample_events(const SynthConfig& c, const DetectorResponse& g, unsigned threads) {
  c.validate();
  g.validate();
  if (std::abs(g.bin_width - c.bin_width) > 1e-9 * c.bin_width) {
    throw GridMismatch("response bin width differs from the synthetic bin width");
  }

  const std::vector<double> cdf = cumulative_intensity(c);
  const double total = cdf.back();
  if (!(total > 0.0)) throw InputError("true coincidence intensity vanishes over the window");
  const double step = (c.t_max - c.t_min) / static_cast<double>(cdf.size() - 1);

  std::vector<double> jitter_cdf(g.size());
  std::partial_sum(g.weights.begin(), g.weights.end(), jitter_cdf.begin());

  const std::size_t nbins = c.bin_count();
  const std::uint64_t nchunks = (c.n_pairs + kChunkSize - 1) / kChunkSize;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, nchunks));

  struct Partial {
    std::vector<std::uint64_t> bins;
    std::uint64_t overflow = 0;
  };
  std::vector<Partial> partials(threads, Partial{std::vector<std::uint64_t>(nbins, 0), 0});
  std::atomic<std::uint64_t> next_chunk{0};

  const auto worker = [&](Partial& out) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::uint64_t chunk = next_chunk++; chunk < nchunks; chunk = next_chunk++) {
      std::mt19937_64 rng(derive_seed(c.seed, "pairs", chunk));
      const std::uint64_t begin = chunk * kChunkSize;
      const std::uint64_t end = std::min(c.n_pairs, begin + kChunkSize);
      for (std::uint64_t e = begin; e < end; ++e) {
        const double target = unit(rng) * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
        std::size_t j = static_cast<std::size_t>(it - cdf.begin());
        j = std::clamp<std::size_t>(j, 1, cdf.size() - 1);
        const double cell = cdf[j] - cdf[j - 1];
        const double frac = cell > 0.0 ? (target - cdf[j - 1]) / cell : 0.5;
        const double t_true = c.t_min + step * (static_cast<double>(j - 1) + frac);

        const double r = unit(rng);
        auto jt = std::upper_bound(jitter_cdf.begin(), jitter_cdf.end(), r * jitter_cdf.back());
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(jt - jitter_cdf.begin()),
                                                    g.size() - 1);
        const double t = t_true + g.offsets[k];

        const double pos = (t - c.t_min) / c.bin_width;
        if (pos < 0.0 || pos >= static_cast<double>(nbins)) {
          ++out.overflow;
          continue;
        }
        ++out.bins[static_cast<std::size_t>(pos)];
      }
    }
  };

  if (threads == 1) {
    worker(partials[0]);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, std::ref(partials[t]));
  }

  std::vector<std::uint64_t> bins(nbins, 0);
  std::uint64_t overflow = 0;
  for (const Partial& p : partials) {
    for (std::size_t i = 0; i < nbins; ++i) bins[i] += p.bins[i];
    overflow += p.overflow;
  }
  if (static_cast<double>(overflow) > 0.01 * static_cast<double>(c.n_pairs)) {
    throw WindowOverflow(std::to_string(overflow) + " of " + std::to_string(c.n_pairs) +
                         " pairs fell outside the histogram window");
  }

  if (c.background_rate > 0.0) {
    std::mt19937_64 rng(derive_seed(c.seed, "background"));
    std::poisson_distribution<std::uint64_t> accidentals(c.background_rate);
    for (std::size_t i = 0; i < nbins; ++i) bins[i] += accidentals(rng);
  }

  Histogram h;
  h.bin_width = c.bin_width;
  h.t_start = c.t_min + 0.5 * c.bin_width;
  h.counts.assign(bins.begin(), bins.end());
  return h;
}

}  // namespace qjump
