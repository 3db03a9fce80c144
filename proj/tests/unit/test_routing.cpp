#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fedex/routing.hpp"

using namespace fedex;

namespace {

Topology random_topology(int clients, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(0.0, 2000.0);
  std::vector<Point> pts{{1000.0, 1000.0}};
  for (int i = 0; i < clients; ++i) pts.push_back({coord(rng), coord(rng)});
  return build_topology(std::move(pts));
}

double brute_force_length(const Topology& topo, std::vector<int> clients) {
  std::sort(clients.begin(), clients.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, tour_length(topo, clients));
  } while (std::next_permutation(clients.begin(), clients.end()));
  return best;
}

RadioParams fixed_radio() {
  RadioParams r;
  r.fixed_rate_bps = 5e7;
  r.model_bits = 8e8;
  return r;
}

}  // namespace

TEST_CASE("tour length by hand geometry") {
  const Topology t = build_topology({{0, 0}, {1000, 0}, {1000, 1000}});
  CHECK(tour_length(t, std::vector<int>{}) == 0.0);
  CHECK(tour_length(t, std::vector<int>{1, 2}) == doctest::Approx(2000.0 + std::sqrt(2.0) * 1000.0));
  CHECK(tour_length(t, std::vector<int>{1, 2}) == doctest::Approx(3414.21).epsilon(1e-5));
}

TEST_CASE("single and double client tours") {
  const Topology t = random_topology(2, 4);
  const auto one = solve_tsp_2opt(t, std::vector<int>{2}, 3, 1);
  REQUIRE(one == std::vector<int>{2});
  CHECK(tour_length(t, one) == doctest::Approx(2.0 * t.distance(0, 2)));
  const auto two = solve_tsp_exact(t, std::vector<int>{1, 2});
  CHECK(tour_length(t, two) == doctest::Approx(tour_length(t, std::vector<int>{2, 1})));
}

TEST_CASE("held-karp equals exhaustive enumeration") {
  const Topology square = build_topology({{0, 0}, {-1, -1}, {1, -1}, {1, 1}, {-1, 1}});
  const std::vector<int> all{1, 2, 3, 4};
  CHECK(tour_length(square, solve_tsp_exact(square, all)) ==
        doctest::Approx(3.0 * 2.0 + 2.0 * std::sqrt(2.0)));
  CHECK(tour_length(square, solve_tsp_exact(square, all)) == doctest::Approx(brute_force_length(square, all)));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Topology t = random_topology(7, seed);
    const auto clients = t.clients();
    CHECK(tour_length(t, solve_tsp_exact(t, clients)) == doctest::Approx(brute_force_length(t, clients)).epsilon(1e-12));
  }
  const Topology big = random_topology(kExactTspLimit + 1, 1);
  CHECK_THROWS_AS(solve_tsp_exact(big, big.clients()), InputError);
}

TEST_CASE("2-opt never beats the optimum and ends 2-opt optimal") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Topology t = random_topology(8, seed);
    const auto clients = t.clients();
    const auto heuristic = solve_tsp_2opt(t, clients, 10, seed);
    const auto exact = solve_tsp_exact(t, clients);
    CHECK(tour_length(t, heuristic) >= tour_length(t, exact) - 1e-9);
    CHECK(best_two_opt_delta(t, heuristic) >= -1e-9);
    auto sorted = heuristic;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == clients);
  }
}

TEST_CASE("2-opt is deterministic under its seed") {
  const Topology t = random_topology(11, 3);
  CHECK(solve_tsp_2opt(t, t.clients(), 5, 99) == solve_tsp_2opt(t, t.clients(), 5, 99));
}

TEST_CASE("round-trip time in slots") {
  const Topology t = build_topology({{0, 0}, {750, 0}, {1500, 0}, {1500, 1500}, {0, 1500}});
  const PropulsionParams prop;
  const Tour tour = build_tour(t, fixed_radio(), prop, t.clients(), 60.0, TspMethod::exact);
  CHECK(tour.length_m == doctest::Approx(6000.0));
  CHECK(tour.t_slf_s == doctest::Approx(600.0));
  CHECK(tour.t_trans_s == doctest::Approx(16.0));
  CHECK(tour.rtt_s == doctest::Approx(664.0));
  CHECK(tour.rtt_slots == 12);
  CHECK_THROWS_AS(build_tour(t, fixed_radio(), prop, std::vector<int>{}, 60.0, TspMethod::exact), InputError);
}

TEST_CASE("seconds to slots") {
  CHECK(seconds_to_slots(0.0, 60.0) == 1);
  CHECK(seconds_to_slots(60.0, 60.0) == 1);
  CHECK(seconds_to_slots(60.5, 60.0) == 2);
  CHECK(seconds_to_slots(300.0, 60.0) == 5);
}

TEST_CASE("tsp cache keys on the sorted client set") {
  const Topology t = random_topology(9, 8);
  TspCache cache(t, TspMethod::two_opt, 4, 17);
  const auto a = cache.solve(std::vector<int>{3, 1, 2, 7});
  const auto b = cache.solve(std::vector<int>{7, 2, 1, 3});
  CHECK(a.order == b.order);
  CHECK(a.length_m == b.length_m);
  CHECK(cache.size() == 1);
  CHECK(cache.hits() == 1);
  TspCache fresh(t, TspMethod::two_opt, 4, 17);
  CHECK(fresh.solve(std::vector<int>{1, 2, 3, 7}).order == a.order);
}

TEST_CASE("tours text format") {
  const Topology t = build_topology({{0, 0}, {3, 4}});
  const Tour tour = tour_from_order(t, fixed_radio(), PropulsionParams{}, {1}, 60.0);
  std::ostringstream out;
  write_tours(out, std::vector<Tour>{tour});
  CHECK(out.str().rfind("transporter=0 clients=1 length_m=10 ", 0) == 0);
  CHECK(out.str().find("order=0 1 0\n") != std::string::npos);
}
