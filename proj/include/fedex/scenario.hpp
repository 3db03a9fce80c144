#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedex/assignment.hpp"
#include "fedex/fedsim.hpp"
#include "fedex/learning.hpp"

namespace fedex {

/// Config validation failure; the message carries the source and line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskKind { quadratic, logistic };

struct TaskSpec {
  TaskKind kind = TaskKind::quadratic;
  DatasetSpec dataset;
  double noise = 1.0;  // injected gradient-noise scale sigma (quadratic)
  double clip = 5.0;   // gradient clipping radius G
  double l2 = 0.01;    // logistic regulariser
  int batch = 8;       // logistic mini-batch
};

struct Seeds {
  std::uint64_t topology = 0;
  std::uint64_t carp = 0;
  std::uint64_t tsp = 0;
  std::uint64_t data = 0;
  std::uint64_t partition = 0;
  std::uint64_t task = 0;
  std::vector<std::uint64_t> replications;
};

/// Fully resolved experiment: every value in SI, every seed explicit.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  Seeds seeds;

  BlockLayoutSpec layout;
  /// When set, positions come from this CSV (id,x,y,block) instead of the block generator.
  std::optional<std::string> topology_file;

  RadioParams radio;
  std::vector<TransporterProfile> transporters;
  double slot_s = 60.0;

  CostKind cost = CostKind::sws;
  TspMethod tsp = TspMethod::two_opt;
  int tsp_restarts = 10;
  int gibbs_iterations = 2000;
  double gibbs_q0 = 1.0;
  double gibbs_decay = 0.05;
  bool exhaustive_check = false;

  SimMode mode = SimMode::async;
  int total_slots = 2000;
  /// Unset selects auto_learning_rate.
  std::optional<double> eta;
  int replications = 4;
  /// Fraction of the initial optimality gap defining the comparison target loss.
  double target_fraction = 0.1;

  TaskSpec task;
  PartitionSpec partition;
};

/// Parses a YAML scenario. `source` names the document in error messages.
/// Seeds not given explicitly are derived from the master seed; `seed_override` replaces it.
Scenario parse_scenario(const std::string& yaml_text, const std::string& source,
                        std::optional<std::uint64_t> seed_override = std::nullopt);
Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt);

/// Resolved scenario as YAML in the config schema; loading it reproduces the scenario exactly.
void write_manifest(std::ostream& out, const Scenario& sc);

/// Derived seed for a named stream of the master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

Topology build_scenario_topology(const Scenario& sc, const std::filesystem::path& base_dir = {});

struct ExhaustiveResult {
  Assignment best;
  double best_cost = 0.0;
  std::size_t feasible = 0;
  std::size_t enumerated = 0;
};

/// Minimum cost over all K^N feasible assignments; rejects spaces above `limit`.
ExhaustiveResult exhaustive_search(const RouteContext& ctx, CostKind kind, std::size_t limit = 1u << 20);

/// CARP plus the derived simulation routes.
struct PlanResult {
  CarpResult carp;
  SimScenario routes;
  std::optional<ExhaustiveResult> exhaustive;
  std::size_t tsp_cache_size = 0;
  std::size_t tsp_cache_hits = 0;
};

/// Runs CARP for `sc` on `topo` (cost taken from `sc.cost`).
PlanResult plan_scenario(const Scenario& sc, const Topology& topo);

/// Rebuilds the plan from a fixed assignment and visiting orders (no optimisation).
PlanResult plan_from_orders(const Scenario& sc, const Topology& topo, const std::vector<std::vector<int>>& orders);

std::unique_ptr<Task> build_task(const Scenario& sc, const Topology& topo);

struct SimulationResult {
  double eta = 0.0;
  std::vector<SimTrace> traces;
  std::vector<VerificationReport> reports;
  BoundReport bounds;
  bool all_verified() const;
};

/// Replications run concurrently, one seed each.
SimulationResult simulate_scenario(const Scenario& sc, const Task& task, const SimScenario& routes);

void write_plan_json(std::ostream& out, const Scenario& sc, const PlanResult& plan);
/// Visiting order per transporter read back from plan.json.
std::vector<std::vector<int>> read_plan_orders(std::istream& in);
void write_cost_trace_csv(std::ostream& out, const CarpResult& carp);

/// Writes manifest.yaml, topology.csv, plan.json, cost_trace.csv and tours.txt.
void write_plan_artifacts(const std::filesystem::path& dir, const Scenario& sc, const Topology& topo,
                          const PlanResult& plan);
/// Writes trace_rep{r}.csv, energy_ledger_rep{r}.csv, verification.txt and bounds.txt.
void write_simulation_artifacts(const std::filesystem::path& dir, const SimulationResult& sim);

struct RouteComparisonRow {
  CostKind cost = CostKind::sws;
  double objective = 0.0;
  double sum_weighted_sq_rtt = 0.0;
  int max_rtt = 0;
  int sum_rtt = 0;
  double energy_spread_j = 0.0;
  /// First slot where the replication-mean loss reaches the target, -1 if never.
  int slots_to_target = -1;
  double target_loss = 0.0;
  double final_loss = 0.0;
};

std::vector<RouteComparisonRow> compare_routes(const Scenario& sc, const Topology& topo,
                                               const std::vector<CostKind>& costs);
void write_route_comparison_csv(std::ostream& out, const std::vector<RouteComparisonRow>& rows);

/// Root directory for artifacts: $FEDEX_ARTIFACT_ROOT, else "artifacts".
std::filesystem::path artifact_root();

}  // namespace fedex
