#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "qjump/fit.hpp"

namespace qjump::cli {

struct InputDigest {
  std::string path;
  std::string sha256;
};

struct ReportInputs {
  InputDigest data;
  InputDigest response;
  std::uint64_t seed = 0;
};

/// Fit report as pretty-printed JSON. Times in ps, counts per bin for A, Y0.
/// Contains no timestamps, so identical inputs give identical bytes.
[[nodiscard]] std::string fit_report_json(const FitResult& r, const FitSpec& spec,
                                          const std::optional<BootstrapResult>& bootstrap,
                                          const Histogram& hist, const ReportInputs& inputs);

/// bin_center_ps,observed,fitted,residual for every histogram bin.
void write_residual_csv(std::ostream& out, const Histogram& hist, std::span<const double> fitted);

}  // namespace qjump::cli
