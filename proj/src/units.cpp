#include "fedex/units.hpp"

#include <cctype>
#include <cmath>
#include <map>

#include "fedex/topology.hpp"

namespace fedex {

namespace {

struct UnitTable {
  std::string_view canonical;
  std::map<std::string_view, double> scale;
};

const UnitTable& table(Dimension dim) {
  static const std::map<Dimension, UnitTable> tables = {
      {Dimension::length, {"m", {{"m", 1.0}, {"km", 1e3}}}},
      {Dimension::time, {"s", {{"ms", 1e-3}, {"s", 1.0}, {"min", 60.0}, {"h", 3600.0}}}},
      {Dimension::power, {"W", {{"mW", 1e-3}, {"W", 1.0}, {"kW", 1e3}}}},
      {Dimension::energy, {"J", {{"J", 1.0}, {"kJ", 1e3}, {"MJ", 1e6}, {"Wh", 3600.0}}}},
      {Dimension::data,
       {"bit", {{"bit", 1.0}, {"kbit", 1e3}, {"Mbit", 1e6}, {"Gbit", 1e9}, {"B", 8.0}, {"KB", 8e3}, {"MB", 8e6}, {"GB", 8e9}}}},
      {Dimension::rate, {"bps", {{"bps", 1.0}, {"kbps", 1e3}, {"Mbps", 1e6}, {"Gbps", 1e9}}}},
      {Dimension::speed, {"m/s", {{"m/s", 1.0}, {"km/h", 1.0 / 3.6}}}},
      {Dimension::frequency, {"Hz", {{"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}}}},
      {Dimension::noise_density, {"W/Hz", {{"W/Hz", 1.0}, {"mW/Hz", 1e-3}}}},
      {Dimension::gain, {"", {{"", 1.0}}}},
  };
  return tables.at(dim);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(Dimension dim) {
  switch (dim) {
    case Dimension::length: return "length";
    case Dimension::time: return "time";
    case Dimension::power: return "power";
    case Dimension::energy: return "energy";
    case Dimension::data: return "data size";
    case Dimension::rate: return "data rate";
    case Dimension::speed: return "speed";
    case Dimension::frequency: return "frequency";
    case Dimension::noise_density: return "noise density";
    case Dimension::gain: return "gain";
  }
  return "?";
}

double parse_quantity(std::string_view text, Dimension dim) {
  const std::string_view s = trim(text);
  std::size_t split = 0;
  while (split < s.size() && (std::isdigit(static_cast<unsigned char>(s[split])) || s[split] == '.' || s[split] == '-' ||
                              s[split] == '+' || ((s[split] == 'e' || s[split] == 'E') && split > 0 &&
                                                  split + 1 < s.size() &&
                                                  (std::isdigit(static_cast<unsigned char>(s[split + 1])) ||
                                                   s[split + 1] == '-' || s[split + 1] == '+')))) {
    ++split;
  }
  const std::string_view number = s.substr(0, split);
  const std::string_view unit = trim(s.substr(split));
  if (number.empty()) throw InputError("expected a number with a " + std::string(to_string(dim)) + " unit, got '" + std::string(s) + "'");
  const double value = parse_double(number);

  if (dim == Dimension::power && unit == "dBm") return std::pow(10.0, value / 10.0) * 1e-3;
  if (dim == Dimension::noise_density && unit == "dBm/Hz") return std::pow(10.0, value / 10.0) * 1e-3;
  if (dim == Dimension::gain && unit == "dB") return std::pow(10.0, value / 10.0);

  const auto& t = table(dim);
  if (unit.empty() && dim != Dimension::gain) {
    throw InputError("missing " + std::string(to_string(dim)) + " unit in '" + std::string(s) + "' (e.g. " +
                     format_double(value) + std::string(t.canonical) + ")");
  }
  auto it = t.scale.find(unit);
  if (it == t.scale.end()) {
    std::string known;
    for (const auto& [u, f] : t.scale) known += (known.empty() ? "" : ", ") + std::string(u);
    if (dim == Dimension::power) known += ", dBm";
    if (dim == Dimension::noise_density) known += ", dBm/Hz";
    if (dim == Dimension::gain) known = "dB or a bare factor";
    throw InputError("unknown " + std::string(to_string(dim)) + " unit '" + std::string(unit) + "' (expected " + known + ")");
  }
  const double si = value * it->second;
  if (!std::isfinite(si)) throw InputError("quantity '" + std::string(s) + "' is not finite");
  return si;
}

std::string format_quantity(double si_value, Dimension dim) {
  return format_double(si_value) + std::string(table(dim).canonical);
}

}  // namespace fedex
