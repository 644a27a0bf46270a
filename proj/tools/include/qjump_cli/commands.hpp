#pragma once

// The four batch commands behind the qjump executable. Each writes its
// outputs to the given paths; tests call them directly or through run().

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qjump/fit.hpp"
#include "qjump_cli/config.hpp"

namespace qjump::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// CSV `dt_ps,correlation[,monitor]` on the [grid] of the config.
void cmd_simulate(const RunConfig& c, const std::filesystem::path& out);

struct CalibrationSummary {
  std::size_t bins = 0;
  double raw_centroid = 0.0;  ///< centroid of the raw input (s, absolute)
  double fwhm = 0.0;
  double stddev = 0.0;
  double support = 0.0;
};

/// Normalizes a raw response histogram and writes it in response format.
CalibrationSummary cmd_calibrate(const RunConfig& c, const std::filesystem::path& raw,
                                 const std::filesystem::path& out);

/// Synthetic histogram from [synth], [monitor] and the response (the
/// [response] section unless `response_file` is given).
void cmd_generate(const RunConfig& c, const std::filesystem::path& out,
                  const std::optional<std::filesystem::path>& response_file = std::nullopt);

struct FitOutcome {
  FitResult result;
  std::optional<BootstrapResult> bootstrap;
};

/// Fits the data, writes the JSON report and optionally the residual CSV.
FitOutcome cmd_fit(const RunConfig& c, const std::filesystem::path& data,
                   const std::filesystem::path& response, const std::filesystem::path& report,
                   const std::optional<std::filesystem::path>& residuals = std::nullopt);

/// FitSpec for `hist` from the [fit] section: automatic starting values and
/// tail-fit tau where the config gives none.
[[nodiscard]] FitSpec build_fit_spec(const RunConfig& c, const Histogram& hist,
                                     const DetectorResponse& g);

/// Lower-case hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

/// Full command-line entry point; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qjump::cli
