#pragma once

#include <cstddef>
#include <vector>

namespace qjump {

/// Uniform one-dimensional grid: point i sits at start + i * step.
struct UniformGrid {
  double start = 0.0;
  double step = 1.0;
  std::size_t size = 0;

  [[nodiscard]] double at(std::size_t i) const { return start + step * static_cast<double>(i); }

  [[nodiscard]] std::vector<double> points() const {
    std::vector<double> out(size);
    for (std::size_t i = 0; i < size; ++i) out[i] = at(i);
    return out;
  }
};

}  // namespace qjump
