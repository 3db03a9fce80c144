#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedex/energy.hpp"
#include "fedex/routing.hpp"
#include "fedex/topology.hpp"

namespace fedex {

/// Route-design objective over per-transporter client counts R_k and RTTs Delta_k (slots).
enum class CostKind {
  min_max,         // max_k Delta_k
  sws,             // sum_k R_k Delta_k^2
  shortest_total,  // sum_k Delta_k
};

std::string_view to_string(CostKind kind);
CostKind parse_cost_kind(std::string_view text);

struct TransporterProfile {
  PropulsionParams propulsion;
  double budget_j = std::numeric_limits<double>::infinity();
  /// Per-transporter transmit power; unset means the shared radio power applies.
  std::optional<double> tx_power_w;
};

/// Client -> transporter map. Transporters are indexed 0..K-1, clients 1..N.
class Assignment {
 public:
  Assignment() = default;
  Assignment(int num_transporters, std::vector<int> transporter_of);

  int num_transporters() const { return num_transporters_; }
  int num_clients() const { return static_cast<int>(transporter_of_.size()); }
  int of(int client) const { return transporter_of_[static_cast<std::size_t>(client - 1)]; }
  void set(int client, int k);
  const std::vector<int>& raw() const { return transporter_of_; }

  /// Sorted client ids per transporter.
  std::vector<std::vector<int>> subsets() const;
  std::vector<int> counts() const;

  bool operator==(const Assignment&) const = default;

 private:
  int num_transporters_ = 0;
  std::vector<int> transporter_of_;
};

struct TransporterPlan {
  Tour tour;
  EnergyReport energy;
};

/// Everything needed to route and cost a candidate client set for each transporter.
class RouteContext {
 public:
  RouteContext(const Topology& topo, RadioParams radio, std::vector<TransporterProfile> profiles, double slot_s,
               TspCache& cache);

  int num_transporters() const { return static_cast<int>(profiles_.size()); }
  const Topology& topology() const { return topo_; }
  const TransporterProfile& profile(int k) const { return profiles_[static_cast<std::size_t>(k)]; }
  double slot_seconds() const { return slot_s_; }
  RadioParams radio_for(int k) const;

  /// Routes `clients` (any order) for transporter k. An empty set yields a zero plan
  /// (no tour, zero RTT, zero energy, feasible).
  TransporterPlan plan(int k, std::span<const int> clients) const;
  std::vector<TransporterPlan> plans(const Assignment& a) const;

 private:
  const Topology& topo_;
  RadioParams radio_;
  std::vector<TransporterProfile> profiles_;
  double slot_s_;
  TspCache& cache_;
};

/// Cost from per-transporter counts and slot RTTs; empty transporters contribute nothing.
double evaluate_cost(CostKind kind, std::span<const int> counts, std::span<const int> rtt_slots);
double evaluate_cost(const Assignment& a, CostKind kind, const RouteContext& ctx);

/// Transporters k for which routing R_k (minus `client`) plus `client` stays within budget.
std::vector<int> feasible_transporters(int client, const Assignment& a, const RouteContext& ctx);

/// Gibbs weights exp(-C_k / q) normalised over the given costs.
std::vector<double> gibbs_probabilities(std::span<const double> costs, double q);

/// Full conditional of one client's assignment given all others.
struct GibbsConditional {
  std::vector<int> candidates;        // feasible transporters
  std::vector<double> costs;          // C(k, a_-i) for each candidate
  std::vector<double> probabilities;  // softmax(-cost / q)
};

GibbsConditional gibbs_conditional(int client, const Assignment& a, CostKind kind, double q,
                                   const RouteContext& ctx);

/// Resamples `client`'s transporter from its Gibbs conditional. With no feasible
/// transporter the current choice is kept.
Assignment gibbs_step(int client, const Assignment& a, CostKind kind, double q, std::mt19937_64& rng,
                      const RouteContext& ctx);

struct GibbsConfig {
  int iterations = 2000;
  double q0 = 1.0;
  double decay = 0.05;
  std::uint64_t seed = 0;
  /// Client visiting sequence, cycled; empty means 1..N round robin.
  std::vector<int> visit_order;

  double temperature(int iteration) const { return q0 / (1.0 + iteration * decay); }

  /// Decay chosen so the temperature reaches `q_final` at the last iteration.
  static GibbsConfig annealed(int iterations, double q0, double q_final, std::uint64_t seed);
};

struct CarpTraceRow {
  int iteration = 0;
  int client = 0;
  double temperature = 0.0;
  double cost = 0.0;
  double best_cost = 0.0;
};

struct CarpResult {
  Assignment initial;
  Assignment best;
  std::vector<TransporterPlan> plans;
  double best_cost = 0.0;
  std::vector<CarpTraceRow> trace;
};

/// Thrown when no energy-feasible assignment can be constructed.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, std::string diagnostics)
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

/// Clients in seeded random order, each to the feasible transporter whose RTT grows least; if that
/// dead-ends, the most balanced feasible angular sweep around the server; failing that, a
/// move/swap descent on budget overage from the sweep split with the lowest peak energy.
Assignment initial_assignment(const RouteContext& ctx, std::uint64_t seed);

/// Client assignment and route planning: Gibbs sampling over assignments with the
/// TSP tour as the inner problem. Returns the lowest-cost fully feasible assignment seen.
CarpResult run_carp(const RouteContext& ctx, CostKind kind, const GibbsConfig& cfg);

}  // namespace fedex
