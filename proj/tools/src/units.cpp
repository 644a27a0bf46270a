#include "qjump_cli/units.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "qjump/error.hpp"

namespace qjump::cli {
namespace {

struct UnitEntry {
  std::string_view symbol;
  Dimension dimension;
  double factor;
};

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kElectronVolt = 1.602176634e-19;

constexpr std::array kUnits{
    UnitEntry{"fs", Dimension::kTime, 1e-15},
    UnitEntry{"ps", Dimension::kTime, 1e-12},
    UnitEntry{"ns", Dimension::kTime, 1e-9},
    UnitEntry{"us", Dimension::kTime, 1e-6},
    UnitEntry{"ms", Dimension::kTime, 1e-3},
    UnitEntry{"s", Dimension::kTime, 1.0},
    UnitEntry{"/s", Dimension::kRate, 1.0},
    UnitEntry{"/ms", Dimension::kRate, 1e3},
    UnitEntry{"/us", Dimension::kRate, 1e6},
    UnitEntry{"/ns", Dimension::kRate, 1e9},
    UnitEntry{"1/s", Dimension::kRate, 1.0},
    UnitEntry{"1/ms", Dimension::kRate, 1e3},
    UnitEntry{"1/us", Dimension::kRate, 1e6},
    UnitEntry{"1/ns", Dimension::kRate, 1e9},
    UnitEntry{"rad/s", Dimension::kAngularFrequency, 1.0},
    UnitEntry{"rad/ms", Dimension::kAngularFrequency, 1e3},
    UnitEntry{"rad/us", Dimension::kAngularFrequency, 1e6},
    UnitEntry{"rad/ns", Dimension::kAngularFrequency, 1e9},
    UnitEntry{"Hz", Dimension::kAngularFrequency, kTwoPi},
    UnitEntry{"kHz", Dimension::kAngularFrequency, kTwoPi * 1e3},
    UnitEntry{"MHz", Dimension::kAngularFrequency, kTwoPi * 1e6},
    UnitEntry{"GHz", Dimension::kAngularFrequency, kTwoPi * 1e9},
    UnitEntry{"Hz", Dimension::kFrequency, 1.0},
    UnitEntry{"kHz", Dimension::kFrequency, 1e3},
    UnitEntry{"MHz", Dimension::kFrequency, 1e6},
    UnitEntry{"GHz", Dimension::kFrequency, 1e9},
    UnitEntry{"J", Dimension::kEnergy, 1.0},
    UnitEntry{"eV", Dimension::kEnergy, kElectronVolt},
    UnitEntry{"meV", Dimension::kEnergy, 1e-3 * kElectronVolt},
    UnitEntry{"ueV", Dimension::kEnergy, 1e-6 * kElectronVolt},
    UnitEntry{"rad", Dimension::kAngle, 1.0},
    UnitEntry{"deg", Dimension::kAngle, std::numbers::pi / 180.0},
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string_view si_symbol(Dimension d) {
  switch (d) {
    case Dimension::kTime: return "s";
    case Dimension::kRate: return "/s";
    case Dimension::kAngularFrequency: return "rad/s";
    case Dimension::kFrequency: return "Hz";
    case Dimension::kEnergy: return "J";
    case Dimension::kAngle: return "rad";
  }
  return "";
}

}  // namespace

std::string_view dimension_name(Dimension d) {
  switch (d) {
    case Dimension::kTime: return "time";
    case Dimension::kRate: return "rate";
    case Dimension::kAngularFrequency: return "angular frequency";
    case Dimension::kFrequency: return "frequency";
    case Dimension::kEnergy: return "energy";
    case Dimension::kAngle: return "angle";
  }
  return "?";
}

double parse_quantity(std::string_view text, Dimension d) {
  const std::string_view s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr == s.data()) {
    throw ConfigError("malformed " + std::string(dimension_name(d)) + " '" + std::string(s) + "'");
  }
  const std::string_view unit = trim(std::string_view(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr)));
  if (unit.empty()) {
    throw ConfigError("missing unit on " + std::string(dimension_name(d)) + " '" + std::string(s) +
                      "' (e.g. " + std::string(si_symbol(d)) + ")");
  }
  if (!std::isfinite(value)) throw ConfigError("non-finite value '" + std::string(s) + "'");
  for (const UnitEntry& u : kUnits) {
    if (u.dimension == d && u.symbol == unit) return value * u.factor;
  }
  throw ConfigError("unit '" + std::string(unit) + "' is not a " + std::string(dimension_name(d)) +
                    " unit");
}

double parse_number(std::string_view text) {
  const std::string_view s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("expected a plain number, got '" + std::string(s) + "'");
  }
  if (!std::isfinite(value)) throw ConfigError("non-finite value '" + std::string(s) + "'");
  return value;
}

std::string format_quantity(double si_value, Dimension d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", si_value);
  return std::string(buf) + " " + std::string(si_symbol(d));
}

}  // namespace qjump::cli
