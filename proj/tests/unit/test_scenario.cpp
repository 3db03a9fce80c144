#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedex/scenario.hpp"
#include "fedex/units.hpp"

using namespace fedex;
namespace fs = std::filesystem;

namespace {

const std::string kTiny = R"(name: tiny
seed: 7
topology:
  width: 1km
  height: 1km
  blocks: 2
  clients_per_block: 3
radio:
  model_size: 100MB
  rate: 50Mbps
slot: 1min
transporters:
  count: 2
  speed: 10m/s
  budget: unlimited
routing:
  cost: sws
  tsp: exact
gibbs:
  iterations: 200
  exhaustive_check: true
simulation:
  mode: async
  slots: 150
  replications: 2
task:
  kind: quadratic
  samples: 600
  dim: 6
partition:
  scheme: dirichlet
  alpha: 0.5
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string manifest_of(const Scenario& sc) {
  std::ostringstream out;
  write_manifest(out, sc);
  return out.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fedex-unit-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("quantities with units") {
  CHECK(parse_quantity("2km", Dimension::length) == 2000.0);
  CHECK(parse_quantity("1 min", Dimension::time) == 60.0);
  CHECK(parse_quantity("20dBm", Dimension::power) == doctest::Approx(0.1));
  CHECK(parse_quantity("15kJ", Dimension::energy) == 15000.0);
  CHECK(parse_quantity("100MB", Dimension::data) == 8e8);
  CHECK(parse_quantity("50Mbps", Dimension::rate) == 5e7);
  CHECK(parse_quantity("36km/h", Dimension::speed) == doctest::Approx(10.0));
  CHECK(parse_quantity("10MHz", Dimension::frequency) == 1e7);
  CHECK(parse_quantity("-30dB", Dimension::gain) == doctest::Approx(1e-3));
  CHECK(parse_quantity("1e-3", Dimension::gain) == 1e-3);
  CHECK(parse_quantity("-174dBm/Hz", Dimension::noise_density) == doctest::Approx(3.981071705534969e-21));
  CHECK_THROWS_AS(parse_quantity("15", Dimension::energy), InputError);
  CHECK_THROWS_AS(parse_quantity("15kg", Dimension::energy), InputError);
  CHECK_THROWS_AS(parse_quantity("15 m", Dimension::time), InputError);
  CHECK_THROWS_AS(parse_quantity("kJ", Dimension::energy), InputError);
  for (double v : {0.1, 8e8, 1.0 / 3.0}) CHECK(parse_quantity(format_quantity(v, Dimension::data), Dimension::data) == v);
}

TEST_CASE("config parsing resolves every value") {
  const Scenario sc = parse_scenario(kTiny, "tiny");
  CHECK(sc.name == "tiny");
  CHECK(sc.layout.area_width == 1000.0);
  CHECK(sc.transporters.size() == 2);
  CHECK(std::isinf(sc.transporters[0].budget_j));
  CHECK(sc.radio.model_bits == 8e8);
  CHECK(transmission_rate(sc.radio) == doctest::Approx(5e7).epsilon(1e-12));
  CHECK(sc.slot_s == 60.0);
  CHECK(sc.tsp == TspMethod::exact);
  CHECK(sc.exhaustive_check);
  CHECK(sc.replications == 2);
  CHECK(sc.seeds.replications.size() == 2);
  CHECK(sc.seeds.topology != sc.seeds.carp);
  CHECK(sc.seeds.replications[0] != sc.seeds.replications[1]);
  CHECK_FALSE(sc.eta.has_value());
}

TEST_CASE("config errors carry the line number") {
  auto message = [](const std::string& text) {
    try {
      parse_scenario(text, "bad.yaml");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  std::string bad = kTiny;
  bad.replace(bad.find("speed: 10m/s"), 12, "speed: 10");
  CHECK(message(bad).rfind("bad.yaml:14:", 0) == 0);
  CHECK(message(bad).find("unit") != std::string::npos);

  bad = kTiny;
  bad.replace(bad.find("slot: 1min"), 10, "slot: 1 fortnight");
  CHECK(message(bad).rfind("bad.yaml:11:", 0) == 0);

  bad = kTiny + "extra_section: 1\n";
  CHECK(message(bad).find("unknown key 'extra_section'") != std::string::npos);

  bad = kTiny;
  bad.replace(bad.find("mode: async"), 11, "mode: sometimes");
  CHECK(message(bad).find("simulation.") != std::string::npos);

  CHECK_FALSE(message("topology: [unclosed").empty());
  bad = kTiny;
  bad.replace(bad.find("rate: 50Mbps"), 12, "rate: 50Mbps\n  noise_psd: -174dBm/Hz");
  CHECK_FALSE(message(bad).empty());
}

TEST_CASE("manifest reproduces the scenario") {
  const Scenario sc = parse_scenario(kTiny, "tiny");
  const std::string m1 = manifest_of(sc);
  const Scenario back = parse_scenario(m1, "manifest");
  CHECK(manifest_of(back) == m1);
  CHECK(back.seeds.carp == sc.seeds.carp);
  CHECK(back.seeds.replications == sc.seeds.replications);
  CHECK(back.radio.noise_psd_w_per_hz == sc.radio.noise_psd_w_per_hz);
}

TEST_CASE("seed override re-derives every stream") {
  const Scenario a = parse_scenario(kTiny, "tiny");
  const Scenario b = parse_scenario(manifest_of(a), "manifest", 99);
  CHECK(b.seed == 99);
  CHECK(b.seeds.topology == derive_seed(99, "topology"));
  CHECK(b.seeds.carp != a.seeds.carp);
  CHECK(derive_seed(1, "carp") != derive_seed(1, "tsp"));
  CHECK(derive_seed(1, "carp") == derive_seed(1, "carp"));
}

TEST_CASE("tiny scenario plans to the exhaustive optimum") {
  const Scenario sc = parse_scenario(kTiny, "tiny");
  const Topology topo = build_scenario_topology(sc);
  const PlanResult plan = plan_scenario(sc, topo);
  REQUIRE(plan.exhaustive);
  CHECK(plan.exhaustive->best_cost == plan.carp.best_cost);
  CHECK(plan.exhaustive->enumerated == 64);
  CHECK(plan.routes.num_clients == 6);

  std::stringstream json;
  write_plan_json(json, sc, plan);
  const auto orders = read_plan_orders(json);
  const PlanResult again = plan_from_orders(sc, topo, orders);
  REQUIRE(again.routes.routes.size() == plan.routes.routes.size());
  for (std::size_t k = 0; k < orders.size(); ++k) {
    CHECK(again.routes.routes[k].order == plan.routes.routes[k].order);
    CHECK(again.routes.routes[k].visit_offsets == plan.routes.routes[k].visit_offsets);
  }
}

TEST_CASE("artifacts are byte-identical across reruns from the manifest") {
  const Scenario sc = parse_scenario(kTiny, "tiny");
  const Topology topo = build_scenario_topology(sc);
  const PlanResult plan = plan_scenario(sc, topo);
  const auto task = build_task(sc, topo);
  const SimulationResult sim = simulate_scenario(sc, *task, plan.routes);
  CHECK(sim.all_verified());
  const fs::path a = scratch("a");
  write_plan_artifacts(a, sc, topo, plan);
  write_simulation_artifacts(a, sim);

  const Scenario re = load_scenario(a / "manifest.yaml");
  const Topology topo2 = build_scenario_topology(re, a);
  const PlanResult plan2 = plan_scenario(re, topo2);
  const auto task2 = build_task(re, topo2);
  const fs::path b = scratch("b");
  write_plan_artifacts(b, re, topo2, plan2);
  write_simulation_artifacts(b, simulate_scenario(re, *task2, plan2.routes));

  for (const char* f : {"manifest.yaml", "topology.csv", "plan.json", "tours.txt", "cost_trace.csv", "trace_rep0.csv",
                        "trace_rep1.csv", "energy_ledger_rep0.csv", "energy_ledger_rep1.csv", "verification.txt",
                        "bounds.txt"}) {
    CAPTURE(f);
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("route comparison is reproducible") {
  const Scenario sc = parse_scenario(kTiny, "tiny");
  const Topology topo = build_scenario_topology(sc);
  const std::vector<CostKind> costs{CostKind::sws, CostKind::min_max, CostKind::shortest_total};
  std::ostringstream a, b;
  write_route_comparison_csv(a, compare_routes(sc, topo, costs));
  write_route_comparison_csv(b, compare_routes(sc, topo, costs));
  CHECK(a.str() == b.str());
  std::istringstream lines(a.str());
  int rows = 0;
  for (std::string l; std::getline(lines, l);) ++rows;
  CHECK(rows == 4);
}
