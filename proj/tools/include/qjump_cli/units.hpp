#pragma once

// Physical quantities in config files always carry an explicit unit:
//   time              fs ps ns us ms s
//   rate              /s /ms /us /ns (also 1/s ...)
//   angular frequency rad/s rad/ms rad/us rad/ns, or Hz kHz MHz GHz (times 2 pi)
//   frequency         Hz kHz MHz GHz
//   energy            J eV meV ueV
//   angle             rad deg
// Values are returned in SI (s, 1/s, rad/s, Hz, J, rad).

#include <string>
#include <string_view>

namespace qjump::cli {

enum class Dimension { kTime, kRate, kAngularFrequency, kFrequency, kEnergy, kAngle };

[[nodiscard]] std::string_view dimension_name(Dimension d);

/// Throws ConfigError when the number is malformed, the unit is missing or it
/// does not belong to `d`.
[[nodiscard]] double parse_quantity(std::string_view text, Dimension d);

/// Plain number without unit. Throws ConfigError.
[[nodiscard]] double parse_number(std::string_view text);

/// SI value with the SI unit of `d`, printed to round-trip exactly.
[[nodiscard]] std::string format_quantity(double si_value, Dimension d);

}  // namespace qjump::cli
