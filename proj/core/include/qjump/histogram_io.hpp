#pragma once

// CSV exchange formats.
//
//   histogram:  header "bin_center_ps,counts", one row per bin, centers
//               strictly increasing and uniformly spaced, integer counts.
//   response:   either the histogram format (raw calibration counts, which
//               are normalized on load) or "offset_ps,weight" as written by
//               write_response_csv.

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "qjump/instrument.hpp"

namespace qjump {

[[nodiscard]] Histogram read_histogram_csv(std::istream& in);
[[nodiscard]] Histogram read_histogram_csv(const std::filesystem::path& path);

void write_histogram_csv(std::ostream& out, const Histogram& h);
void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);

[[nodiscard]] DetectorResponse read_response_csv(
    std::istream& in, std::optional<BackgroundFloor> floor = BackgroundFloor{});
[[nodiscard]] DetectorResponse read_response_csv(
    const std::filesystem::path& path, std::optional<BackgroundFloor> floor = BackgroundFloor{});

void write_response_csv(std::ostream& out, const DetectorResponse& g);
void write_response_csv(const std::filesystem::path& path, const DetectorResponse& g);

/// Picoseconds <-> seconds.
inline constexpr double kPicosecond = 1e-12;

}  // namespace qjump
