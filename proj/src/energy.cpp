#include "fedex/energy.hpp"

#include <cmath>
#include <string>

#include "fedex/topology.hpp"

namespace fedex {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InputError(std::string(name) + " must be strictly positive and finite");
  }
}

}  // namespace

void validate(const RadioParams& radio) {
  if (radio.fixed_rate_bps) {
    require_positive(*radio.fixed_rate_bps, "fixed transmission rate");
  } else {
    require_positive(radio.tx_power_w, "transmit power");
    require_positive(radio.bandwidth_hz, "bandwidth");
    require_positive(radio.noise_psd_w_per_hz, "noise power spectral density");
    require_positive(radio.ref_channel_gain, "reference channel gain");
    require_positive(radio.altitude_m, "altitude");
  }
  if (!(radio.model_bits >= 0.0) || !std::isfinite(radio.model_bits)) {
    throw InputError("model size must be non-negative and finite");
  }
}

void validate(const PropulsionParams& prop) {
  require_positive(prop.parasitic_coeff, "parasitic power coefficient");
  require_positive(prop.induced_coeff, "induced power coefficient");
  require_positive(prop.hover_power_w, "hover power");
  require_positive(prop.speed_mps, "speed");
}

double channel_gain(const RadioParams& radio) {
  return radio.ref_channel_gain / (radio.altitude_m * radio.altitude_m);
}

double transmission_rate(const RadioParams& radio) {
  if (radio.fixed_rate_bps) return *radio.fixed_rate_bps;
  const double snr = channel_gain(radio) * radio.tx_power_w / (radio.bandwidth_hz * radio.noise_psd_w_per_hz);
  return radio.bandwidth_hz * std::log2(1.0 + snr);
}

double transmission_time(const RadioParams& radio) {
  return radio.model_bits / transmission_rate(radio);
}

double transmission_energy(const RadioParams& radio, int clients) {
  return radio.tx_power_w * transmission_time(radio) * clients;
}

double slf_power(const PropulsionParams& prop) {
  const double v = prop.speed_mps;
  return prop.parasitic_coeff * v * v * v + prop.induced_coeff / v;
}

double slf_time(const PropulsionParams& prop, double tour_length_m) {
  if (!(tour_length_m >= 0.0)) throw InputError("tour length must be non-negative");
  return tour_length_m / prop.speed_mps;
}

double slf_energy(const PropulsionParams& prop, double tour_length_m) {
  return slf_time(prop, tour_length_m) * slf_power(prop);
}

double hover_energy(const PropulsionParams& prop, double t_trans_s, int clients) {
  return clients * t_trans_s * prop.hover_power_w;
}

EnergyReport tour_energy_report(const RadioParams& radio, const PropulsionParams& prop, double tour_length_m,
                                int clients, double budget_j) {
  EnergyReport r;
  const double t_trans = transmission_time(radio);
  r.e_trans = transmission_energy(radio, clients);
  r.e_slf = slf_energy(prop, tour_length_m);
  r.e_hover = hover_energy(prop, t_trans, clients);
  r.e_prop = r.e_slf + r.e_hover;
  r.e_total = r.e_prop + r.e_trans;
  r.budget = budget_j;
  r.feasible = r.e_total <= budget_j;
  return r;
}

double calibrate_noise_psd(const RadioParams& radio, double target_rate_bps) {
  require_positive(target_rate_bps, "target rate");
  const double snr = std::exp2(target_rate_bps / radio.bandwidth_hz) - 1.0;
  return channel_gain(radio) * radio.tx_power_w / (radio.bandwidth_hz * snr);
}

PropulsionParams calibrated_propulsion(double slf_power_w, double speed_mps, double parasitic_share,
                                       double hover_power_w) {
  if (!(parasitic_share > 0.0 && parasitic_share < 1.0)) {
    throw InputError("parasitic share must lie strictly between 0 and 1");
  }
  require_positive(slf_power_w, "SLF power");
  require_positive(speed_mps, "speed");
  PropulsionParams p;
  p.parasitic_coeff = parasitic_share * slf_power_w / (speed_mps * speed_mps * speed_mps);
  p.induced_coeff = (1.0 - parasitic_share) * slf_power_w * speed_mps;
  p.hover_power_w = hover_power_w;
  p.speed_mps = speed_mps;
  return p;
}

double min_power_speed(const PropulsionParams& prop) {
  return std::pow(prop.induced_coeff / (3.0 * prop.parasitic_coeff), 0.25);
}

}  // namespace fedex
