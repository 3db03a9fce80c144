// fedex: plan transporter routes, simulate FedEx-Sync/Async and verify traces.
//
// Exit codes: 0 success, 1 verification or reproduction failure, 2 invalid input,
// 3 no energy-feasible assignment.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedex/scenario.hpp"

namespace fs = std::filesystem;
using namespace fedex;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string plan;
  std::string costs = "sws,min_max,shortest_total";
  std::string artifact_dir;
};

fs::path output_dir(const Options& opt, const Scenario& sc) {
  return opt.out.empty() ? artifact_root() / sc.name : fs::path(opt.out);
}

void print_plan(const PlanResult& plan) {
  std::cout << "cost=" << format_double(plan.carp.best_cost) << " max_rtt=" << plan.routes.max_rtt()
            << " sum_weighted_sq_rtt=" << format_double(plan.routes.sum_weighted_sq_rtt()) << '\n';
  for (std::size_t k = 0; k < plan.carp.plans.size(); ++k) {
    const auto& p = plan.carp.plans[k];
    std::cout << "  transporter " << k << ": clients=" << p.tour.order.size() << " rtt_slots=" << p.tour.rtt_slots
              << " energy_j=" << format_double(p.energy.e_total) << (p.energy.feasible ? "" : " OVER BUDGET") << '\n';
  }
  if (plan.exhaustive) {
    std::cout << "exhaustive optimum=" << format_double(plan.exhaustive->best_cost)
              << (plan.exhaustive->best_cost == plan.carp.best_cost ? " (matched)" : " (NOT matched)") << '\n';
  }
}

int finish_simulation(const fs::path& dir, const SimulationResult& sim) {
  write_simulation_artifacts(dir, sim);
  std::cout << "eta=" << format_double(sim.eta) << " bound lhs=" << format_double(sim.bounds.lhs)
            << " rhs=" << format_double(sim.bounds.rhs) << " margin=" << format_double(sim.bounds.margin()) << '\n';
  std::cout << "verification: " << (sim.all_verified() ? "all checks passed" : "FAILED (see verification.txt)") << '\n';
  std::cout << "artifacts: " << dir.string() << '\n';
  return sim.all_verified() ? 0 : 1;
}

int cmd_plan(const Options& opt) {
  const Scenario sc = load_scenario(opt.config, opt.seed);
  const Topology topo = build_scenario_topology(sc);
  const PlanResult plan = plan_scenario(sc, topo);
  const fs::path dir = output_dir(opt, sc);
  write_plan_artifacts(dir, sc, topo, plan);
  print_plan(plan);
  std::cout << "artifacts: " << dir.string() << '\n';
  if (plan.exhaustive && plan.exhaustive->best_cost != plan.carp.best_cost) return 1;
  return 0;
}

int cmd_simulate(const Options& opt) {
  const Scenario sc = load_scenario(opt.config, opt.seed);
  const Topology topo = build_scenario_topology(sc);
  std::ifstream in(opt.plan);
  if (!in) throw InputError("cannot open plan " + opt.plan);
  const PlanResult plan = plan_from_orders(sc, topo, read_plan_orders(in));
  const auto task = build_task(sc, topo);
  const fs::path dir = output_dir(opt, sc);
  write_plan_artifacts(dir, sc, topo, plan);
  return finish_simulation(dir, simulate_scenario(sc, *task, plan.routes));
}

int cmd_run(const Options& opt) {
  const Scenario sc = load_scenario(opt.config, opt.seed);
  const Topology topo = build_scenario_topology(sc);
  const PlanResult plan = plan_scenario(sc, topo);
  const fs::path dir = output_dir(opt, sc);
  write_plan_artifacts(dir, sc, topo, plan);
  print_plan(plan);
  const auto task = build_task(sc, topo);
  return finish_simulation(dir, simulate_scenario(sc, *task, plan.routes));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_verify(const Options& opt) {
  const fs::path dir(opt.artifact_dir);
  const Scenario sc = load_scenario(dir / "manifest.yaml");
  const Topology topo = build_scenario_topology(sc, dir);
  const PlanResult plan = plan_scenario(sc, topo);
  const auto task = build_task(sc, topo);
  const SimulationResult sim = simulate_scenario(sc, *task, plan.routes);

  const fs::path redo = fs::temp_directory_path() / ("fedex-verify-" + std::to_string(sc.seed) + "-" + sc.name);
  fs::remove_all(redo);
  write_plan_artifacts(redo, sc, topo, plan);
  write_simulation_artifacts(redo, sim);

  int mismatches = 0;
  std::vector<std::string> files = {"plan.json", "tours.txt", "cost_trace.csv", "topology.csv"};
  for (int r = 0; r < sc.replications; ++r) {
    files.push_back("trace_rep" + std::to_string(r) + ".csv");
    files.push_back("energy_ledger_rep" + std::to_string(r) + ".csv");
  }
  for (const auto& f : files) {
    if (!fs::exists(dir / f)) {
      std::cout << "missing  " << f << '\n';
      ++mismatches;
    } else if (slurp(dir / f) != slurp(redo / f)) {
      std::cout << "DIFFERS  " << f << '\n';
      ++mismatches;
    } else {
      std::cout << "identical " << f << '\n';
    }
  }
  fs::remove_all(redo);
  for (std::size_t r = 0; r < sim.reports.size(); ++r) {
    std::cout << "replication " << r << ":\n" << sim.reports[r].to_text();
  }
  const bool ok = mismatches == 0 && sim.all_verified();
  std::cout << (ok ? "verify: reproduced and all checks passed" : "verify: FAILED") << '\n';
  return ok ? 0 : 1;
}

int cmd_compare(const Options& opt) {
  const Scenario sc = load_scenario(opt.config, opt.seed);
  const Topology topo = build_scenario_topology(sc);
  std::vector<CostKind> costs;
  std::stringstream list(opt.costs);
  for (std::string item; std::getline(list, item, ',');) costs.push_back(parse_cost_kind(item));
  if (costs.empty()) throw InputError("no cost functions given");
  const auto rows = compare_routes(sc, topo, costs);
  const fs::path dir = output_dir(opt, sc);
  fs::create_directories(dir);
  std::ofstream out(dir / "route_comparison.csv", std::ios::binary);
  write_route_comparison_csv(out, rows);
  write_route_comparison_csv(std::cout, rows);
  std::cout << "artifacts: " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedEx transporter planning and federated-learning simulation"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", opt.config, "Scenario YAML")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", opt.seed, "Override the master seed (re-derives every stream)");
    cmd->add_option("--out", opt.out, "Artifact directory (default $FEDEX_ARTIFACT_ROOT/<name>)");
  };
  auto* plan = app.add_subcommand("plan", "Client assignment and route planning only");
  add_common(plan);
  auto* simulate = app.add_subcommand("simulate", "Simulate a given plan");
  add_common(simulate);
  simulate->add_option("--plan", opt.plan, "plan.json from a previous run")->required()->check(CLI::ExistingFile);
  auto* run = app.add_subcommand("run", "Plan, simulate, verify and evaluate bounds");
  add_common(run);
  auto* verify = app.add_subcommand("verify", "Re-run an artifact directory from its manifest and re-check it");
  verify->add_option("dir", opt.artifact_dir, "Artifact directory")->required()->check(CLI::ExistingDirectory);
  auto* compare = app.add_subcommand("compare-routes", "Plan and simulate under several route objectives");
  add_common(compare);
  compare->add_option("--costs", opt.costs, "Comma-separated cost list");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plan->parsed()) return cmd_plan(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (run->parsed()) return cmd_run(opt);
    if (verify->parsed()) return cmd_verify(opt);
    if (compare->parsed()) return cmd_compare(opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << '\n' << e.diagnostics();
    return 3;
  }
  return 2;
}
