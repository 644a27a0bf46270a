#pragma once

#include <cstdint>
#include <string_view>

namespace qjump {

/// Stream seed derived from a master seed, a label and an index: splitmix64
/// mixing of the master seed, the FNV-1a hash of the label and the index.
/// Used for every independent random stream (event chunks, background,
/// bootstrap resamples) so results never depend on scheduling.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                        std::uint64_t index = 0);

}  // namespace qjump
