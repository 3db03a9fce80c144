#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fedex/energy.hpp"
#include "fedex/topology.hpp"

using namespace fedex;

namespace {

RadioParams paper_radio() {
  RadioParams r;
  r.noise_psd_w_per_hz = calibrate_noise_psd(r, 50e6);
  return r;
}

}  // namespace

TEST_CASE("shannon rate") {
  RadioParams r = paper_radio();
  CHECK(transmission_rate(r) == doctest::Approx(50e6).epsilon(1e-12));

  r.tx_power_w = 1e-30;
  CHECK(transmission_rate(r) < 1e-6);

  RadioParams wide = paper_radio();
  wide.bandwidth_hz *= 2.0;
  const double base = transmission_rate(paper_radio());
  CHECK(transmission_rate(wide) > base);
  CHECK(transmission_rate(wide) < 2.0 * base);
}

TEST_CASE("channel gain at altitude") {
  RadioParams r;
  r.ref_channel_gain = 1e-3;
  r.altitude_m = 1000.0;
  CHECK(channel_gain(r) == doctest::Approx(1e-9));
}

TEST_CASE("transmission time and energy") {
  RadioParams r;
  r.fixed_rate_bps = 5e7;
  r.model_bits = 8e8;
  CHECK(transmission_time(r) == doctest::Approx(16.0));
  CHECK(transmission_energy(r, 10) == doctest::Approx(16.0));
  CHECK(transmission_energy(r, 0) == 0.0);
  r.model_bits = 0.0;
  CHECK(transmission_time(r) == 0.0);
}

TEST_CASE("straight-and-level flight energy") {
  const PropulsionParams p = calibrated_propulsion(30.0, 10.0, 0.5, 20.0);
  CHECK(slf_power(p) == doctest::Approx(30.0).epsilon(1e-14));
  CHECK(p.parasitic_coeff * 1000.0 == doctest::Approx(15.0));
  CHECK(slf_time(p, 6000.0) == doctest::Approx(600.0));
  CHECK(slf_energy(p, 6000.0) == doctest::Approx(18000.0));
  CHECK(slf_energy(p, 0.0) == 0.0);
}

TEST_CASE("minimum-power speed matches a grid search") {
  const PropulsionParams p = calibrated_propulsion(30.0, 10.0, 0.5, 20.0);
  const double v_star = min_power_speed(p);
  CHECK(v_star == doctest::Approx(std::pow(p.induced_coeff / (3.0 * p.parasitic_coeff), 0.25)));
  double best_v = 0.0;
  double best_power = std::numeric_limits<double>::infinity();
  for (double v = 1.0; v <= 40.0; v += 1e-3) {
    PropulsionParams q = p;
    q.speed_mps = v;
    if (slf_power(q) < best_power) {
      best_power = slf_power(q);
      best_v = v;
    }
  }
  CHECK(best_v == doctest::Approx(v_star).epsilon(1e-3));
}

TEST_CASE("hover energy") {
  PropulsionParams p;
  p.hover_power_w = 20.0;
  CHECK(hover_energy(p, 16.0, 10) == doctest::Approx(3200.0));
  CHECK(hover_energy(p, 16.0, 0) == 0.0);
  PropulsionParams doubled = p;
  doubled.hover_power_w = 40.0;
  CHECK(hover_energy(doubled, 16.0, 10) == 2.0 * hover_energy(p, 16.0, 10));
}

TEST_CASE("energy report invariants and budget") {
  const RadioParams r = paper_radio();
  const PropulsionParams p;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> len(0.0, 8000.0);
  std::uniform_int_distribution<int> count(0, 20);
  for (int i = 0; i < 200; ++i) {
    const double length = len(rng);
    const int clients = count(rng);
    const EnergyReport e = tour_energy_report(r, p, length, clients, 15000.0);
    CHECK(e.e_prop == e.e_slf + e.e_hover);
    CHECK(e.e_total == e.e_trans + e.e_prop);
    CHECK(e.e_trans >= 0.0);
    CHECK(e.e_slf >= 0.0);
    CHECK(e.e_hover >= 0.0);
    CHECK(e.feasible == (e.e_total <= 15000.0));
  }
  const EnergyReport unlimited =
      tour_energy_report(r, p, 1e7, 100, std::numeric_limits<double>::infinity());
  CHECK(unlimited.feasible);
}

TEST_CASE("lowering the budget can flip feasibility") {
  const RadioParams r = paper_radio();
  const PropulsionParams p;
  const EnergyReport high = tour_energy_report(r, p, 3500.0, 10, 15000.0);
  const EnergyReport low = tour_energy_report(r, p, 3500.0, 10, 12000.0);
  CHECK(high.e_total == low.e_total);
  CHECK(high.feasible);
  CHECK_FALSE(low.feasible);
}

TEST_CASE("energy is linear in client count and tour length") {
  const RadioParams r = paper_radio();
  const PropulsionParams p;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> scale(0.5, 4.0);
  for (int i = 0; i < 50; ++i) {
    const double s = scale(rng);
    const int k = 1 + i % 7;
    CHECK(transmission_energy(r, 3 * k) == doctest::Approx(3.0 * transmission_energy(r, k)).epsilon(1e-14));
    CHECK(hover_energy(p, 16.0, 3 * k) == doctest::Approx(3.0 * hover_energy(p, 16.0, k)).epsilon(1e-14));
    CHECK(slf_energy(p, s * 1234.5) == doctest::Approx(s * slf_energy(p, 1234.5)).epsilon(1e-14));
  }
}

TEST_CASE("invalid parameters are rejected") {
  RadioParams r = paper_radio();
  r.bandwidth_hz = 0.0;
  CHECK_THROWS_AS(validate(r), InputError);
  r = paper_radio();
  r.model_bits = -1.0;
  CHECK_THROWS_AS(validate(r), InputError);
  PropulsionParams p;
  p.speed_mps = 0.0;
  CHECK_THROWS_AS(validate(p), InputError);
  CHECK_THROWS_AS(calibrated_propulsion(30.0, 10.0, 1.5, 20.0), InputError);
}
