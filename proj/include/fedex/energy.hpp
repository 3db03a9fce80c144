#pragma once

#include <limits>
#include <optional>

namespace fedex {

/// Line-of-sight link between a hovering transporter and the device below it.
/// All quantities SI: W, Hz, W/Hz, m, bits.
struct RadioParams {
  double tx_power_w = 0.1;
  double bandwidth_hz = 10e6;
  double noise_psd_w_per_hz = 0.0;
  /// Channel power gain at the 1 m reference distance.
  double ref_channel_gain = 1e-3;
  double altitude_m = 1000.0;
  double model_bits = 8e8;
  /// When set, the Shannon expression is bypassed and this rate (bit/s) is used.
  std::optional<double> fixed_rate_bps;
};

/// Rotary/fixed-wing propulsion model: SLF power c1*V^3 + c2/V plus hover power.
struct PropulsionParams {
  double parasitic_coeff = 0.015;  // c1, W s^3 / m^3
  double induced_coeff = 150.0;    // c2, W m / s
  double hover_power_w = 20.0;
  double speed_mps = 10.0;
};

struct EnergyReport {
  double e_trans = 0.0;
  double e_slf = 0.0;
  double e_hover = 0.0;
  double e_prop = 0.0;
  double e_total = 0.0;
  double budget = std::numeric_limits<double>::infinity();
  bool feasible = true;
};

/// Throws InputError unless every radio parameter is strictly positive
/// (model size may be zero).
void validate(const RadioParams& radio);
void validate(const PropulsionParams& prop);

/// Channel gain beta0 / H^2 at hover altitude.
double channel_gain(const RadioParams& radio);
/// r = B log2(1 + h p / (B N0)).
double transmission_rate(const RadioParams& radio);
/// S / r.
double transmission_time(const RadioParams& radio);
/// Broadcast energy for one round trip visiting `clients` devices: p * T_trans * R_k.
double transmission_energy(const RadioParams& radio, int clients);

double slf_power(const PropulsionParams& prop);
double slf_time(const PropulsionParams& prop, double tour_length_m);
double slf_energy(const PropulsionParams& prop, double tour_length_m);
double hover_energy(const PropulsionParams& prop, double t_trans_s, int clients);

EnergyReport tour_energy_report(const RadioParams& radio, const PropulsionParams& prop, double tour_length_m,
                                int clients, double budget_j);

/// Noise PSD that makes the Shannon rate of `radio` equal `target_rate_bps`.
double calibrate_noise_psd(const RadioParams& radio, double target_rate_bps);

/// Splits `slf_power_w` at `speed_mps` between parasitic (share) and induced (1 - share) terms.
PropulsionParams calibrated_propulsion(double slf_power_w, double speed_mps, double parasitic_share,
                                       double hover_power_w);

/// Speed minimising SLF power, (c2 / (3 c1))^(1/4).
double min_power_speed(const PropulsionParams& prop);

}  // namespace fedex
