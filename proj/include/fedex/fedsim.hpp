#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedex/assignment.hpp"
#include "fedex/learning.hpp"

namespace fedex {

enum class SimMode { sync, async };

std::string_view to_string(SimMode mode);
SimMode parse_sim_mode(std::string_view text);

enum class Phase { at_server, travelling, hovering };

std::string_view to_string(Phase phase);

/// Absolute slots at which each stop of `tour` is served when the transporter leaves the
/// server at `start_slot`: stop j (1-based) is served in slot
/// start + max(1, ceil((travel time to stop j + j T_trans) / slot)).
/// Slots are non-decreasing and never exceed start + tour.rtt_slots.
std::vector<int> schedule_tour_stops(const Topology& topo, const Tour& tour, double speed_mps, double slot_s,
                                     int start_slot = 0);

/// One transporter's fixed itinerary, repeated every round.
struct TransporterRoute {
  std::vector<int> order;
  /// Slot offsets (from departure) at which order[j] is served.
  std::vector<int> visit_offsets;
  int rtt_slots = 0;
  double length_m = 0.0;
  EnergyReport energy;
};

/// Clients 1..N split over transporter routes. Transporters with no clients never depart.
struct SimScenario {
  int num_clients = 0;
  std::vector<TransporterRoute> routes;

  int num_transporters() const { return static_cast<int>(routes.size()); }
  /// max_k Delta_k over active transporters.
  int max_rtt() const;
  /// sum_k R_k Delta_k^2.
  double sum_weighted_sq_rtt() const;
};

/// Routes for every transporter of a CARP plan.
SimScenario make_sim_scenario(const RouteContext& ctx, std::span<const TransporterPlan> plans);

struct SimConfig {
  SimMode mode = SimMode::async;
  int total_slots = 2000;
  double eta = 0.01;
  std::uint64_t seed = 0;
};

/// Largest rate the convergence bounds allow: sqrt(N) / (L sqrt(T)), capped at 1/L.
double auto_learning_rate(int num_clients, double L, int total_slots);

struct ClientState {
  ModelVector x;
  ModelVector clu;
  /// Departure slot of the global model the client trains on; -1 before the first visit.
  int base_slot = -1;
  bool seeded() const { return base_slot >= 0; }
};

struct TransporterState {
  ModelVector carried;
  ModelVector aggregated;
};

/// Upload the client's CLU into the transporter, then hand the client the carried model.
void client_visit(ClientState& client, TransporterState& transporter, int carried_slot);

/// One SGD step on the client's local objective; returns the applied eta * g.
ModelVector local_step(ClientState& client, const Task& task, int client_id, double eta, Rng& rng);

/// Independent gradient stream per (seed, client).
Rng client_rng(std::uint64_t seed, int client);

/// eta * g computed by `client` in real slot `slot`; `aligned` is the client's step count,
/// i.e. the slot index in the view where every client starts training at its round start.
struct GradientRecord {
  int client = 0;
  int slot = 0;
  int aligned = 0;
  ModelVector eta_g;
};

/// CLU handed to a transporter: covers the client's aligned steps [first, last].
struct UploadRecord {
  int client = 0;
  int transporter = 0;
  int slot = 0;
  int first_aligned = 0;
  int last_aligned = -1;
  ModelVector clu;
};

struct EnergyLedgerRow {
  int round = 0;
  int transporter = 0;
  int depart_slot = 0;
  int clients = 0;
  double length_m = 0.0;
  EnergyReport energy;
};

struct SimTrace {
  SimMode mode = SimMode::async;
  int num_clients = 0;
  int dim = 0;
  int total_slots = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  ModelVector x0;
  /// Update period of each transporter: its own RTT (async) or the common max RTT (sync).
  std::vector<int> period;
  std::vector<int> rtt;
  std::vector<int> clients_per_transporter;
  /// Indexed by client - 1.
  std::vector<int> transporter_of;
  std::vector<int> visit_offset;

  /// Per slot t = 0..T-1, observed at the start of slot t.
  std::vector<ModelVector> global;
  std::vector<double> loss;
  std::vector<double> grad_norm_sq;
  /// max_i ||x^t - x_i^t||^2 over seeded clients, x_i^t being the model client i trains on in slot t.
  std::vector<double> local_model_gap;
  std::vector<std::vector<Phase>> phase;  // [t][k]
  /// Largest aligned step index of each client contained in x^t, -1 if none.
  std::vector<std::vector<int>> phi;  // [t][client - 1]
  std::vector<int> update_slots;

  std::vector<GradientRecord> gradients;
  std::vector<UploadRecord> uploads;
  std::vector<EnergyLedgerRow> energy;
};

/// Slot-by-slot simulation. x^t, loss, gradient norm, phases and phi are recorded at the start
/// of slot t, then:
///  1. transporters serving a client this slot collect its CLU and hand over their model;
///  2. every seeded client takes one local step;
///  3. transporters returning this slot (t a positive multiple of their period) have their CLUs
///     summed and applied as x <- x - (1/N) sum u_k, visible from x^{t+1}; every transporter at a
///     period boundary (including t = 0) then departs with the current model.
SimTrace simulate(const Task& task, const SimScenario& scenario, const SimConfig& cfg);
SimTrace run_fedex_sync(const Task& task, const SimScenario& scenario, SimConfig cfg);
SimTrace run_fedex_async(const Task& task, const SimScenario& scenario, SimConfig cfg);

/// Global sequence when every client of transporter k trains from each round start and its CLU
/// reaches the server one period later than in the real run.
std::vector<ModelVector> simulate_aligned_view(const Task& task, const SimScenario& scenario, const SimConfig& cfg);

struct CheckResult {
  std::string name;
  bool applicable = true;
  bool passed = true;
  std::string detail;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  /// Largest observed (t - 1) - phi_i(t) over all clients and slots, and its bound 2 * period.
  int max_delay = 0;
  int delay_bound = 0;
  bool delay_equality_attained = false;
  /// Worst ratio of the sync local-model gap to 4 eta^2 G^2 Delta^2 for t > Delta.
  double sync_gap_worst_ratio = 0.0;
  int sync_gap_violations = 0;
  /// Worst ||v^t - x^t||^2 / ((4 eta^2 G^2 / N) sum_k R_k Delta_k^2) (async only).
  double async_gap_worst_ratio = 0.0;

  bool all_passed() const;
  std::string to_text() const;
};

/// Checks a trace:
///  (a) x^t equals x^0 - (1/N) sum of every delivered eta g (within 10 eps d steps max(1, |x|));
///  (b) (t - 1) - phi_i(t) <= 2 period_k at every slot t >= 1;
///  (c) sync only: phi_i(t) identical across clients;
///  (d) the aligned-view re-simulation reproduces x^t exactly;
/// plus the sync local-model gap bound and the realized async virtual-sequence gap bound.
VerificationReport verify_trace(const SimTrace& trace, const SimScenario& scenario, const Task& task);

struct BoundReport {
  SimMode mode = SimMode::async;
  bool applicable = true;
  std::string note;
  int replications = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  /// Sync bound with the (Delta / T) initial-gradient and (T - Delta) / T weights kept.
  double rhs_full = 0.0;
  std::vector<std::pair<std::string, double>> terms;
  double margin() const { return rhs - lhs; }
  std::string to_text() const;
};

struct BoundInputs {
  TaskConstants constants;
  double eta = 0.0;
  int total_slots = 0;
  int num_clients = 0;
  int max_rtt = 0;
  double sum_weighted_sq_rtt = 0.0;
  double f0 = 0.0;
  double grad0_sq = 0.0;
};

/// Sync bound: 2 (f0 - f*) / (eta T) + 10 eta^2 G^2 L^2 Delta^2 + L eta sigma^2 / N.
double sync_bound_rhs(const BoundInputs& in);
double sync_bound_rhs_full(const BoundInputs& in);
/// Async bound: 4 (f0 - f*) / (eta T) + (44 eta^2 G^2 L^2 / N) sum R_k Delta_k^2 + 2 L eta sigma^2 / N.
double async_bound_rhs(const BoundInputs& in);

/// Mean over traces of (1/T) sum_t ||grad f(x^t)||^2 against the bound for the traces' mode.
BoundReport evaluate_bounds(std::span<const SimTrace> traces, const SimScenario& scenario,
                            const TaskConstants& constants);

void write_trace_csv(std::ostream& out, const SimTrace& trace);
void write_energy_ledger_csv(std::ostream& out, const SimTrace& trace);

}  // namespace fedex
