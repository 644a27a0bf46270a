#pragma once

// Run configuration: a sectioned key = value text file. Lines starting with
// ';' or '#' are comments. Unknown sections or keys are rejected.
//
//   [run]       seed, threads
//   [cascade]   either omega01 omega12 delta1 delta2 (+ adiabaticity)
//               or delta_eff omega_eff; always gamma23 gamma30; optional e2 e3
//   [monitor]   alpha, tau (tau defaults to 1 / (gamma30 + gamma23/2))
//   [grid]      start, stop, step            (simulate)
//   [synth]     n_pairs dt0 background t_min t_max bin_width
//               beat_amplitude beat_frequency beat_phase
//   [response]  model = gaussian | delta | file; fwhm; file; floor; floor_window
//   [fit]       free; weights; window_lo; window_hi; A Y0 dt0 alpha tau;
//               oversample; max_iterations; bootstrap

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "qjump/cascade.hpp"
#include "qjump/fit.hpp"
#include "qjump/instrument.hpp"
#include "qjump/synth.hpp"

namespace qjump::cli {

struct ResponseConfig {
  enum class Model { kGaussian, kDelta, kFile };
  Model model = Model::kGaussian;
  double fwhm = 50e-12;
  std::filesystem::path file;
  bool floor = true;
  double floor_half_window = BackgroundFloor{}.half_window;
};

struct FitConfig {
  std::array<bool, kParamCount> free{true, true, true, true, false};
  std::array<std::optional<double>, kParamCount> initial{};
  WeightMode weights = WeightMode::kPoisson;
  std::optional<double> window_lo;
  std::optional<double> window_hi;
  unsigned oversample = 0;
  int max_iterations = 300;
  int bootstrap = 0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::optional<CascadeParams> cascade;
  std::optional<MonitorParams> monitor;
  std::optional<UniformGrid> grid;
  std::optional<SynthConfig> synth;
  ResponseConfig response;
  FitConfig fit;
  /// Relative file paths in the config resolve against this directory.
  std::filesystem::path base_dir;
};

/// Throws ConfigError (and the validation errors of the core types).
[[nodiscard]] RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
[[nodiscard]] RunConfig parse_config_text(const std::string& text,
                                          const std::filesystem::path& base_dir = {});
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

/// [cascade] section in effective form with SI units; parses back exactly.
[[nodiscard]] std::string format_cascade_section(const CascadeParams& p);

/// Monitor from [monitor], falling back to the cascade decay for tau.
/// Throws ConfigError if neither is available.
[[nodiscard]] MonitorParams resolve_monitor(const RunConfig& c);

/// Detector response for `bin_width` from [response].
[[nodiscard]] DetectorResponse resolve_response(const RunConfig& c, double bin_width);

}  // namespace qjump::cli
