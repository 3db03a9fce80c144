#include "fedex/routing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

namespace fedex {

namespace {

constexpr double kImprovementEps = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_clients(const Topology& topo, std::span<const int> clients) {
  std::set<int> seen;
  for (int c : clients) {
    if (c <= kServer || c > topo.num_clients()) {
      throw InputError("tour contains an id that is not a client: " + std::to_string(c));
    }
    if (!seen.insert(c).second) {
      throw InputError("tour visits client " + std::to_string(c) + " twice");
    }
  }
}

// Cycle over nodes[0..m), nodes[0] is the server.
double cycle_delta(const Topology& topo, const std::vector<int>& nodes, std::size_t p, std::size_t q) {
  const std::size_t m = nodes.size();
  const int a = nodes[p];
  const int b = nodes[p + 1];
  const int c = nodes[q];
  const int d = nodes[(q + 1) % m];
  return topo.distance(a, c) + topo.distance(b, d) - topo.distance(a, b) - topo.distance(c, d);
}

std::vector<std::pair<std::size_t, std::size_t>> two_opt_moves(std::size_t m) {
  std::vector<std::pair<std::size_t, std::size_t>> moves;
  for (std::size_t p = 0; p + 2 < m; ++p) {
    for (std::size_t q = p + 2; q < m; ++q) {
      if (p == 0 && q == m - 1) continue;  // edges share the server node
      moves.emplace_back(p, q);
    }
  }
  return moves;
}

// Runs first-improvement 2-OPT to a local optimum, scanning moves in a random cyclic order.
void two_opt_descent(const Topology& topo, std::vector<int>& nodes, std::mt19937_64& rng) {
  auto moves = two_opt_moves(nodes.size());
  if (moves.empty()) return;
  std::shuffle(moves.begin(), moves.end(), rng);
  std::size_t since_improvement = 0;
  std::size_t idx = 0;
  while (since_improvement < moves.size()) {
    const auto [p, q] = moves[idx];
    if (cycle_delta(topo, nodes, p, q) < -kImprovementEps) {
      std::reverse(nodes.begin() + static_cast<std::ptrdiff_t>(p + 1), nodes.begin() + static_cast<std::ptrdiff_t>(q + 1));
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    idx = (idx + 1) % moves.size();
  }
}

}  // namespace

double tour_length(const Topology& topo, std::span<const int> order) {
  if (order.empty()) return 0.0;
  double len = topo.distance(kServer, order.front());
  for (std::size_t j = 1; j < order.size(); ++j) len += topo.distance(order[j - 1], order[j]);
  return len + topo.distance(order.back(), kServer);
}

int seconds_to_slots(double seconds, double slot_s) {
  if (!(slot_s > 0.0)) throw InputError("slot duration must be positive");
  // Absorb representation noise such as 600.0000000001 / 60.
  const double raw = seconds / slot_s;
  const double slots = std::ceil(raw - 1e-9 * std::max(1.0, raw));
  return std::max(1, static_cast<int>(slots));
}

std::vector<int> solve_tsp_2opt(const Topology& topo, std::span<const int> clients, int restarts, std::uint64_t seed) {
  if (clients.empty()) throw InputError("2-OPT needs at least one client");
  if (restarts < 1) throw InputError("2-OPT needs at least one restart");
  check_clients(topo, clients);
  std::mt19937_64 rng(seed);
  std::vector<int> best;
  double best_len = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    std::vector<int> nodes;
    nodes.reserve(clients.size() + 1);
    nodes.push_back(kServer);
    nodes.insert(nodes.end(), clients.begin(), clients.end());
    std::shuffle(nodes.begin() + 1, nodes.end(), rng);
    two_opt_descent(topo, nodes, rng);
    std::vector<int> order(nodes.begin() + 1, nodes.end());
    const double len = tour_length(topo, order);
    if (len < best_len) {
      best_len = len;
      best = std::move(order);
    }
  }
  return best;
}

std::vector<int> solve_tsp_exact(const Topology& topo, std::span<const int> clients) {
  check_clients(topo, clients);
  const int n = static_cast<int>(clients.size());
  if (n > kExactTspLimit) {
    throw InputError("exact TSP limited to " + std::to_string(kExactTspLimit) + " clients, got " + std::to_string(n));
  }
  if (n <= 1) return {clients.begin(), clients.end()};
  const std::size_t full = (std::size_t{1} << n) - 1;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp((full + 1) * static_cast<std::size_t>(n), inf);
  std::vector<int> parent((full + 1) * static_cast<std::size_t>(n), -1);
  auto at = [n](std::size_t mask, int j) { return mask * static_cast<std::size_t>(n) + static_cast<std::size_t>(j); };
  for (int j = 0; j < n; ++j) dp[at(std::size_t{1} << j, j)] = topo.distance(kServer, clients[j]);
  for (std::size_t mask = 1; mask <= full; ++mask) {
    for (int j = 0; j < n; ++j) {
      if (!(mask & (std::size_t{1} << j))) continue;
      const double base = dp[at(mask, j)];
      if (base == inf) continue;
      for (int k = 0; k < n; ++k) {
        if (mask & (std::size_t{1} << k)) continue;
        const std::size_t next = mask | (std::size_t{1} << k);
        const double cand = base + topo.distance(clients[j], clients[k]);
        if (cand < dp[at(next, k)]) {
          dp[at(next, k)] = cand;
          parent[at(next, k)] = j;
        }
      }
    }
  }
  int last = 0;
  double best = inf;
  for (int j = 0; j < n; ++j) {
    const double cand = dp[at(full, j)] + topo.distance(clients[j], kServer);
    if (cand < best) {
      best = cand;
      last = j;
    }
  }
  std::vector<int> order;
  std::size_t mask = full;
  for (int j = last; j >= 0;) {
    order.push_back(clients[j]);
    const int prev = parent[at(mask, j)];
    mask &= ~(std::size_t{1} << j);
    j = prev;
  }
  std::reverse(order.begin(), order.end());
  return order;
}

double best_two_opt_delta(const Topology& topo, std::span<const int> order) {
  std::vector<int> nodes;
  nodes.push_back(kServer);
  nodes.insert(nodes.end(), order.begin(), order.end());
  double best = 0.0;
  for (const auto& [p, q] : two_opt_moves(nodes.size())) best = std::min(best, cycle_delta(topo, nodes, p, q));
  return best;
}

Tour tour_from_order(const Topology& topo, const RadioParams& radio, const PropulsionParams& prop,
                     std::vector<int> order, double slot_s) {
  check_clients(topo, order);
  Tour t;
  t.order = std::move(order);
  t.length_m = tour_length(topo, t.order);
  t.t_slf_s = slf_time(prop, t.length_m);
  t.t_trans_s = transmission_time(radio);
  t.rtt_s = static_cast<double>(t.order.size()) * t.t_trans_s + t.t_slf_s;
  t.rtt_slots = seconds_to_slots(t.rtt_s, slot_s);
  return t;
}

Tour build_tour(const Topology& topo, const RadioParams& radio, const PropulsionParams& prop,
                std::span<const int> clients, double slot_s, TspMethod method, int restarts, std::uint64_t seed) {
  if (clients.empty()) throw InputError("cannot build a tour for an empty client set");
  auto order = method == TspMethod::exact ? solve_tsp_exact(topo, clients) : solve_tsp_2opt(topo, clients, restarts, seed);
  return tour_from_order(topo, radio, prop, std::move(order), slot_s);
}

TspCache::Entry TspCache::solve(std::span<const int> clients) {
  std::vector<int> key(clients.begin(), clients.end());
  std::sort(key.begin(), key.end());
  {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      hits_.fetch_add(1, std::memory_order_relaxed);
      return it->second;
    }
  }
  Entry e;
  if (!key.empty()) {
    std::uint64_t h = seed_;
    for (int c : key) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
    e.order = method_ == TspMethod::exact ? solve_tsp_exact(topo_, key) : solve_tsp_2opt(topo_, key, restarts_, h);
    e.length_m = tour_length(topo_, e.order);
  }
  std::unique_lock lock(mu_);
  entries_[key] = e;
  return e;
}

std::size_t TspCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::size_t TspCache::hits() const { return hits_.load(std::memory_order_relaxed); }

void write_tours(std::ostream& out, std::span<const Tour> tours) {
  for (std::size_t k = 0; k < tours.size(); ++k) {
    const Tour& t = tours[k];
    out << "transporter=" << k << " clients=" << t.order.size() << " length_m=" << format_double(t.length_m)
        << " rtt_s=" << format_double(t.rtt_s) << " rtt_slots=" << t.rtt_slots << " order=0";
    for (int c : t.order) out << ' ' << c;
    out << " 0\n";
  }
}

}  // namespace fedex
