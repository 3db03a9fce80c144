#pragma once

#include <cstdint>
#include <iosfwd>
#include <atomic>
#include <map>
#include <shared_mutex>
#include <span>
#include <vector>

#include "fedex/energy.hpp"
#include "fedex/topology.hpp"

namespace fedex {

/// Closed tour server -> order[0] -> ... -> order.back() -> server.
struct Tour {
  std::vector<int> order;
  double length_m = 0.0;
  double t_slf_s = 0.0;
  double t_trans_s = 0.0;
  double rtt_s = 0.0;
  int rtt_slots = 0;
};

enum class TspMethod { exact, two_opt };

/// Largest client set solve_tsp_exact accepts.
inline constexpr int kExactTspLimit = 12;

double tour_length(const Topology& topo, std::span<const int> order);

/// Slot count covering `seconds`, never less than one.
int seconds_to_slots(double seconds, double slot_s);

/// Randomised first-improvement 2-OPT with `restarts` random initial orders;
/// returns the shortest local optimum found.
std::vector<int> solve_tsp_2opt(const Topology& topo, std::span<const int> clients, int restarts, std::uint64_t seed);

/// Held-Karp dynamic programme; rejects more than kExactTspLimit clients.
std::vector<int> solve_tsp_exact(const Topology& topo, std::span<const int> clients);

/// Best length change available from any single 2-OPT exchange (negative means improvable).
double best_two_opt_delta(const Topology& topo, std::span<const int> order);

/// Tour for `clients` with SLF time, RTT in seconds (R_k T_trans + T_SLF) and in slots.
Tour build_tour(const Topology& topo, const RadioParams& radio, const PropulsionParams& prop,
                std::span<const int> clients, double slot_s, TspMethod method, int restarts = 10,
                std::uint64_t seed = 0);

/// Assembles timing for an already fixed visiting order.
Tour tour_from_order(const Topology& topo, const RadioParams& radio, const PropulsionParams& prop,
                     std::vector<int> order, double slot_s);

/// Memo of solved client sets (keyed by the sorted set) -> visiting order and length.
/// Safe for concurrent readers and writers; identical keys always carry identical values
/// because the solver seed is derived from the key.
class TspCache {
 public:
  TspCache(const Topology& topo, TspMethod method, int restarts, std::uint64_t seed)
      : topo_(topo), method_(method), restarts_(restarts), seed_(seed) {}

  struct Entry {
    std::vector<int> order;
    double length_m = 0.0;
  };

  /// Solves (or recalls) the tour over `clients`, which need not be sorted.
  Entry solve(std::span<const int> clients);

  std::size_t size() const;
  std::size_t hits() const;
  TspMethod method() const { return method_; }

 private:
  const Topology& topo_;
  TspMethod method_;
  int restarts_;
  std::uint64_t seed_;
  mutable std::shared_mutex mu_;
  std::map<std::vector<int>, Entry> entries_;
  std::atomic<std::size_t> hits_{0};
};

/// Structured text: one line per transporter, `transporter=<k> length_m=<L> order=0 a b ... 0`.
void write_tours(std::ostream& out, std::span<const Tour> tours);

}  // namespace fedex
