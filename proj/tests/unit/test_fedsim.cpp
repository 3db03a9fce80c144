#include <doctest.h>

#include <random>
#include <sstream>

#include "fedex/fedsim.hpp"

using namespace fedex;

namespace {

TransporterRoute route(std::vector<int> order, std::vector<int> offsets, int rtt) {
  TransporterRoute r;
  r.order = std::move(order);
  r.visit_offsets = std::move(offsets);
  r.rtt_slots = rtt;
  return r;
}

SimScenario scenario(int clients, std::vector<TransporterRoute> routes) {
  SimScenario sc;
  sc.num_clients = clients;
  sc.routes = std::move(routes);
  return sc;
}

QuadraticTask identity_task(int clients, int d, double sigma, double clip, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ModelVector> targets;
  for (int i = 0; i < clients; ++i) {
    ModelVector b(d);
    for (int j = 0; j < d; ++j) b[j] = n(rng);
    targets.push_back(b);
  }
  return QuadraticTask(Eigen::MatrixXd::Identity(d, d), targets, sigma, clip);
}

QuadraticTask general_task(int clients, int d, double sigma, double clip, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<ModelVector> targets;
  for (int i = 0; i < clients; ++i) {
    ModelVector b(d);
    for (int j = 0; j < d; ++j) b[j] = 2.0 * n(rng);
    targets.push_back(b);
  }
  return QuadraticTask(random_design_matrix(d, seed + 1), targets, sigma, clip);
}

// Two transporters with unequal periods over five clients.
SimScenario mixed_scenario() {
  return scenario(5, {route({1, 2, 3}, {1, 2, 4}, 5), route({4, 5}, {2, 3}, 3)});
}

SimConfig config(SimMode mode, int slots, double eta, std::uint64_t seed) {
  SimConfig c;
  c.mode = mode;
  c.total_slots = slots;
  c.eta = eta;
  c.seed = seed;
  return c;
}

const CheckResult& check(const VerificationReport& rep, const std::string& name) {
  for (const auto& c : rep.checks) {
    if (c.name == name) return c;
  }
  throw std::runtime_error("no check " + name);
}

}  // namespace

TEST_CASE("stop scheduling") {
  RadioParams radio;
  radio.fixed_rate_bps = 5e7;
  radio.model_bits = 0.0;
  const PropulsionParams prop;
  const Topology out = build_topology({{0, 0}, {3000, 0}});
  const Tour far = tour_from_order(out, radio, prop, {1}, 60.0);
  CHECK(schedule_tour_stops(out, far, 10.0, 60.0, 7) == std::vector<int>{12});

  radio.model_bits = 8e8;
  const Topology here = build_topology({{0, 0}, {0, 0}});
  const Tour hover = tour_from_order(here, radio, prop, {1}, 60.0);
  CHECK(hover.rtt_slots == 1);
  CHECK(schedule_tour_stops(here, hover, 10.0, 60.0, 3) == std::vector<int>{4});

  const Topology many = generate_block_layout(BlockLayoutSpec{}, 2);
  const Tour tour = build_tour(many, radio, prop, many.clients(), 60.0, TspMethod::two_opt, 2, 1);
  const auto stops = schedule_tour_stops(many, tour, 10.0, 60.0, 0);
  for (std::size_t j = 1; j < stops.size(); ++j) CHECK(stops[j] >= stops[j - 1]);
  CHECK(stops.back() <= tour.rtt_slots);
  CHECK(stops.front() >= 1);
}

TEST_CASE("client visit") {
  ClientState c;
  c.x = ModelVector::Zero(3);
  c.clu = ModelVector::Zero(3);
  TransporterState t;
  t.carried = ModelVector::Constant(3, 2.0);
  t.aggregated = ModelVector::Zero(3);
  client_visit(c, t, 0);
  CHECK(t.aggregated.isZero());
  CHECK(c.x == t.carried);
  CHECK(c.seeded());

  ClientState d = c;
  c.clu << 1.0, 2.0, 3.0;
  d.clu << 0.5, 0.5, 0.5;
  client_visit(c, t, 4);
  client_visit(d, t, 4);
  ModelVector expect(3);
  expect << 1.5, 2.5, 3.5;
  CHECK(t.aggregated == expect);
  CHECK(c.clu.isZero());
  CHECK(c.base_slot == 4);
}

TEST_CASE("local step") {
  const QuadraticTask task = identity_task(1, 4, 0.0, 1e9, 1);
  const ModelVector b = task.target(1);
  Rng rng(1);
  ClientState c{b, ModelVector::Zero(4), 0};
  local_step(c, task, 1, 0.1, rng);
  CHECK(c.x == b);
  CHECK(c.clu.isZero());

  ModelVector v(4);
  v << 1.0, -2.0, 0.5, 3.0;
  c.x = b + v;
  local_step(c, task, 1, 0.25, rng);
  CHECK((c.x - (b + 0.75 * v)).norm() < 1e-14);

  const QuadraticTask noisy = general_task(1, 4, 0.3, 2.0, 2);
  ClientState n{ModelVector::Ones(4), ModelVector::Zero(4), 0};
  const ModelVector start = n.x;
  for (int s = 0; s < 25; ++s) local_step(n, noisy, 1, 0.05, rng);
  CHECK((n.clu - (start - n.x)).norm() < 1e-13);
}

TEST_CASE("single client at the server is one-step delayed gradient descent") {
  const QuadraticTask task = identity_task(1, 3, 0.0, 1e9, 3);
  const SimScenario sc = scenario(1, {route({1}, {1}, 1)});
  const double eta = 0.2;
  const SimTrace tr = run_fedex_sync(task, sc, config(SimMode::sync, 40, eta, 1));
  std::vector<ModelVector> oracle{tr.x0, tr.x0, tr.x0};
  while (oracle.size() < 40) {
    const std::size_t t = oracle.size() - 1;
    const ModelVector g = oracle[t - 1] - task.target(1);
    oracle.push_back(oracle[t] - (eta * g) / 1.0);
  }
  for (std::size_t t = 0; t < 40; ++t) CHECK(tr.global[t] == oracle[t]);
}

TEST_CASE("sync global model is piecewise constant between rounds") {
  const QuadraticTask task = general_task(5, 4, 0.5, 3.0, 4);
  const SimTrace tr = run_fedex_sync(task, mixed_scenario(), config(SimMode::sync, 60, 0.05, 2));
  const int P = tr.period[0];
  CHECK(P == 5);
  for (int t = 1; t < 60; ++t) {
    if ((t - 1) % P != 0 || t == 1) CHECK(tr.global[static_cast<std::size_t>(t)] == tr.global[static_cast<std::size_t>(t - 1)]);
  }
  CHECK(tr.update_slots.front() == P);
}

TEST_CASE("simulation is deterministic") {
  const QuadraticTask task = general_task(5, 4, 0.5, 3.0, 5);
  for (SimMode mode : {SimMode::sync, SimMode::async}) {
    const SimTrace a = simulate(task, mixed_scenario(), config(mode, 80, 0.05, 9));
    const SimTrace b = simulate(task, mixed_scenario(), config(mode, 80, 0.05, 9));
    std::ostringstream ca, cb;
    write_trace_csv(ca, a);
    write_trace_csv(cb, b);
    CHECK(ca.str() == cb.str());
    for (std::size_t t = 0; t < a.global.size(); ++t) CHECK(a.global[t] == b.global[t]);
    const SimTrace c = simulate(task, mixed_scenario(), config(mode, 80, 0.05, 10));
    CHECK(c.global.back() != a.global.back());
  }
}

TEST_CASE("equal periods make async identical to sync") {
  const QuadraticTask task = general_task(5, 4, 0.5, 3.0, 6);
  const SimScenario sc = scenario(5, {route({1, 2, 3}, {1, 2, 4}, 4), route({4, 5}, {3, 4}, 4)});
  const SimTrace s = run_fedex_sync(task, sc, config(SimMode::sync, 100, 0.05, 3));
  const SimTrace a = run_fedex_async(task, sc, config(SimMode::async, 100, 0.05, 3));
  for (std::size_t t = 0; t < 100; ++t) CHECK(s.global[t] == a.global[t]);

  const SimScenario single = scenario(3, {route({2, 1, 3}, {1, 3, 4}, 6)});
  const QuadraticTask small = general_task(3, 4, 0.5, 3.0, 7);
  const SimTrace s1 = run_fedex_sync(small, single, config(SimMode::sync, 50, 0.05, 4));
  const SimTrace a1 = run_fedex_async(small, single, config(SimMode::async, 50, 0.05, 4));
  for (std::size_t t = 0; t < 50; ++t) CHECK(s1.global[t] == a1.global[t]);
}

TEST_CASE("simultaneous returns are order independent") {
  const QuadraticTask task = general_task(5, 4, 0.5, 3.0, 8);
  const SimScenario ab = scenario(5, {route({1, 2, 3}, {1, 2, 4}, 4), route({4, 5}, {3, 4}, 4)});
  const SimScenario ba = scenario(5, {route({4, 5}, {3, 4}, 4), route({1, 2, 3}, {1, 2, 4}, 4)});
  const SimTrace x = run_fedex_async(task, ab, config(SimMode::async, 60, 0.05, 5));
  const SimTrace y = run_fedex_async(task, ba, config(SimMode::async, 60, 0.05, 5));
  for (std::size_t t = 0; t < 60; ++t) CHECK(x.global[t] == y.global[t]);
}

TEST_CASE("trace verification") {
  const QuadraticTask task = general_task(5, 4, 0.5, 3.0, 9);
  const SimScenario sc = mixed_scenario();

  SUBCASE("sync traces pass the structural checks") {
    const SimTrace tr = run_fedex_sync(task, sc, config(SimMode::sync, 120, 0.05, 6));
    const auto rep = verify_trace(tr, sc, task);
    CHECK(check(rep, "a_reconstruction").passed);
    CHECK(check(rep, "c_sync_alignment").passed);
    CHECK(check(rep, "d_aligned_view").passed);
    CHECK(check(rep, "sync_gap").passed);
    CHECK(rep.all_passed());
    const auto aligned = simulate_aligned_view(task, sc, config(SimMode::sync, 120, 0.05, 6));
    for (std::size_t t = 0; t < 120; ++t) CHECK(aligned[t] == tr.global[t]);
  }

  SUBCASE("async delay bound is tight") {
    const SimTrace tr = run_fedex_async(task, sc, config(SimMode::async, 120, 0.05, 7));
    const auto rep = verify_trace(tr, sc, task);
    CHECK(rep.all_passed());
    CHECK(rep.delay_equality_attained);
    CHECK(rep.max_delay == rep.delay_bound);
    CHECK(rep.delay_bound == 10);
    CHECK_FALSE(check(rep, "c_sync_alignment").applicable);
    for (std::size_t t = 1; t < tr.phi.size(); ++t) {
      for (std::size_t i = 0; i < tr.phi[t].size(); ++i) {
        CHECK(tr.phi[t][i] >= tr.phi[t - 1][i]);
        CHECK(tr.phi[t][i] <= static_cast<int>(t) - 1);
      }
    }
  }

  SUBCASE("a dropped gradient is pinpointed") {
    SimTrace tr = run_fedex_async(task, sc, config(SimMode::async, 120, 0.05, 8));
    auto it = std::find_if(tr.gradients.begin(), tr.gradients.end(),
                           [](const GradientRecord& g) { return g.client == 2 && g.aligned == 7; });
    REQUIRE(it != tr.gradients.end());
    const int slot = it->slot;
    tr.gradients.erase(it);
    const auto rep = verify_trace(tr, sc, task);
    const auto& a = check(rep, "a_reconstruction");
    CHECK_FALSE(a.passed);
    CHECK(a.detail.find("client 2 has no gradient for slot " + std::to_string(slot)) != std::string::npos);
    CHECK_FALSE(rep.all_passed());
  }
}

TEST_CASE("bound formulas") {
  BoundInputs in;
  in.constants = {2.0, 3.0, 0.5, 0.1, true};
  in.eta = 0.01;
  in.total_slots = 1000;
  in.num_clients = 10;
  in.max_rtt = 6;
  in.sum_weighted_sq_rtt = 300.0;
  in.f0 = 5.0;
  in.grad0_sq = 4.0;

  const double t2 = async_bound_rhs(in);
  CHECK(t2 == doctest::Approx(4.0 / (0.01 * 1000) * 4.9 + 44.0 * 1e-4 * 9.0 * 4.0 / 10.0 * 300.0 +
                              2.0 * 2.0 * 0.01 * 0.25 / 10.0));
  const double t1 = sync_bound_rhs(in);
  CHECK(t1 == doctest::Approx(2.0 / (0.01 * 1000) * 4.9 + 10.0 * 1e-4 * 9.0 * 4.0 * 36.0 + 2.0 * 0.01 * 0.25 / 10.0));
  CHECK(sync_bound_rhs_full(in) ==
        doctest::Approx(2.0 / (0.01 * 1000) * 4.9 + 6.0 / 1000.0 * 4.0 +
                        (994.0 / 1000.0) * (10.0 * 1e-4 * 9.0 * 4.0 * 36.0 + 2.0 * 0.01 * 0.25 / 10.0)));

  BoundInputs noisy = in;
  noisy.constants.sigma = 1.0;
  const double noise_term = 2.0 * 2.0 * 0.01 * 0.25 / 10.0;
  CHECK(async_bound_rhs(noisy) - t2 == doctest::Approx(3.0 * noise_term));

  BoundInputs first_only = in;
  first_only.constants.G = 0.0;
  first_only.constants.sigma = 0.0;
  BoundInputs longer = first_only;
  longer.total_slots = 4000;
  CHECK(async_bound_rhs(longer) == doctest::Approx(async_bound_rhs(first_only) / 4.0));
  CHECK(sync_bound_rhs(longer) == doctest::Approx(sync_bound_rhs(first_only) / 4.0));
}

TEST_CASE("zero-noise bound holds with positive margin") {
  const SimScenario sc = mixed_scenario();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const QuadraticTask task = general_task(5, 4, 0.0, 50.0, 20 + seed);
    const double eta = 1.0 / (2.0 * task.constants().L);
    for (SimMode mode : {SimMode::sync, SimMode::async}) {
      const std::vector<SimTrace> traces{simulate(task, sc, config(mode, 200, eta, seed))};
      const BoundReport rep = evaluate_bounds(traces, sc, task.constants());
      CHECK(rep.applicable);
      CHECK(rep.lhs <= rep.rhs);
      CHECK(rep.margin() > 0.0);
    }
  }
}

TEST_CASE("learning rate rule") {
  CHECK(auto_learning_rate(40, 2.0, 2000) == doctest::Approx(std::sqrt(40.0) / (2.0 * std::sqrt(2000.0))));
  CHECK(auto_learning_rate(4000, 2.0, 10) == doctest::Approx(0.5));
  CHECK_THROWS_AS(auto_learning_rate(40, 0.0, 10), InputError);
}

TEST_CASE("invalid scenarios are rejected") {
  const QuadraticTask task = general_task(2, 3, 0.0, 5.0, 1);
  CHECK_THROWS_AS(simulate(task, scenario(2, {}), config(SimMode::sync, 10, 0.1, 0)), InputError);
  CHECK_THROWS_AS(simulate(task, scenario(2, {route({1}, {1}, 2)}), config(SimMode::sync, 10, 0.1, 0)), InputError);
  CHECK_THROWS_AS(simulate(task, scenario(2, {route({1, 2}, {1, 3}, 2)}), config(SimMode::sync, 10, 0.1, 0)), InputError);
  CHECK_THROWS_AS(simulate(task, scenario(2, {route({1, 2}, {1, 2}, 2)}), config(SimMode::sync, 10, -0.1, 0)), InputError);
}

TEST_CASE("csv schemas") {
  const QuadraticTask task = general_task(5, 4, 0.5, 3.0, 10);
  const SimTrace tr = run_fedex_async(task, mixed_scenario(), config(SimMode::async, 20, 0.05, 1));
  std::ostringstream trace, ledger;
  write_trace_csv(trace, tr);
  write_energy_ledger_csv(ledger, tr);
  std::istringstream lines(trace.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "slot,loss,grad_norm_sq,local_model_gap,phase_0,phase_1");
  int rows = 0;
  for (std::string l; std::getline(lines, l);) ++rows;
  CHECK(rows == 20);
  CHECK(ledger.str().rfind("round,transporter,depart_slot,clients,length_m,e_trans_j,e_slf_j,e_hover_j,e_prop_j,"
                           "e_total_j,budget_j,feasible\n",
                           0) == 0);
}
