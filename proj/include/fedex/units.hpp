#pragma once

#include <string>
#include <string_view>

namespace fedex {

/// Physical dimension a configured quantity must carry.
enum class Dimension { length, time, power, energy, data, rate, speed, frequency, noise_density, gain };

std::string_view to_string(Dimension dim);

/// Parses "<number><unit>" (whitespace between the two allowed) into SI: m, s, W, J, bits,
/// bit/s, m/s, Hz, W/Hz. Gains accept a bare linear factor or a dB value.
/// Throws InputError on a missing, unknown or mismatched unit.
double parse_quantity(std::string_view text, Dimension dim);

/// SI value with the canonical unit suffix, e.g. "2000m"; parses back to the identical double.
std::string format_quantity(double si_value, Dimension dim);

}  // namespace fedex
