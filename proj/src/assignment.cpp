#include "fedex/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <numeric>
#include <sstream>

namespace fedex {

std::string_view to_string(CostKind kind) {
  switch (kind) {
    case CostKind::min_max: return "min_max";
    case CostKind::sws: return "sws";
    case CostKind::shortest_total: return "shortest_total";
  }
  return "?";
}

CostKind parse_cost_kind(std::string_view text) {
  if (text == "min_max" || text == "min-max") return CostKind::min_max;
  if (text == "sws") return CostKind::sws;
  if (text == "shortest_total" || text == "shortest-total") return CostKind::shortest_total;
  throw InputError("unknown route cost '" + std::string(text) + "' (expected min_max, sws or shortest_total)");
}

Assignment::Assignment(int num_transporters, std::vector<int> transporter_of)
    : num_transporters_(num_transporters), transporter_of_(std::move(transporter_of)) {
  if (num_transporters_ < 1) throw InputError("assignment needs at least one transporter");
  for (int k : transporter_of_) {
    if (k < 0 || k >= num_transporters_) throw InputError("assignment refers to unknown transporter");
  }
}

void Assignment::set(int client, int k) {
  if (k < 0 || k >= num_transporters_) throw InputError("assignment refers to unknown transporter");
  transporter_of_[static_cast<std::size_t>(client - 1)] = k;
}

std::vector<std::vector<int>> Assignment::subsets() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_transporters_));
  for (std::size_t i = 0; i < transporter_of_.size(); ++i) {
    out[static_cast<std::size_t>(transporter_of_[i])].push_back(static_cast<int>(i) + 1);
  }
  return out;
}

std::vector<int> Assignment::counts() const {
  std::vector<int> out(static_cast<std::size_t>(num_transporters_), 0);
  for (int k : transporter_of_) ++out[static_cast<std::size_t>(k)];
  return out;
}

RouteContext::RouteContext(const Topology& topo, RadioParams radio, std::vector<TransporterProfile> profiles,
                           double slot_s, TspCache& cache)
    : topo_(topo), radio_(std::move(radio)), profiles_(std::move(profiles)), slot_s_(slot_s), cache_(cache) {
  if (profiles_.empty()) throw InputError("at least one transporter is required");
  if (!(slot_s_ > 0.0)) throw InputError("slot duration must be positive");
  validate(radio_);
  for (const auto& p : profiles_) validate(p.propulsion);
}

RadioParams RouteContext::radio_for(int k) const {
  RadioParams r = radio_;
  if (const auto& p = profile(k).tx_power_w) r.tx_power_w = *p;
  return r;
}

TransporterPlan RouteContext::plan(int k, std::span<const int> clients) const {
  TransporterPlan out;
  const TransporterProfile& prof = profile(k);
  if (clients.empty()) {
    out.energy.budget = prof.budget_j;
    out.energy.feasible = 0.0 <= prof.budget_j;
    return out;
  }
  const RadioParams radio = radio_for(k);
  auto entry = cache_.solve(clients);
  out.tour = tour_from_order(topo_, radio, prof.propulsion, std::move(entry.order), slot_s_);
  out.energy = tour_energy_report(radio, prof.propulsion, out.tour.length_m, static_cast<int>(clients.size()),
                                  prof.budget_j);
  return out;
}

std::vector<TransporterPlan> RouteContext::plans(const Assignment& a) const {
  std::vector<TransporterPlan> out;
  const auto subsets = a.subsets();
  for (int k = 0; k < num_transporters(); ++k) out.push_back(plan(k, subsets[static_cast<std::size_t>(k)]));
  return out;
}

double evaluate_cost(CostKind kind, std::span<const int> counts, std::span<const int> rtt_slots) {
  double cost = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    const double delta = rtt_slots[k];
    switch (kind) {
      case CostKind::min_max: cost = std::max(cost, delta); break;
      case CostKind::sws: cost += counts[k] * delta * delta; break;
      case CostKind::shortest_total: cost += delta; break;
    }
  }
  return cost;
}

double evaluate_cost(const Assignment& a, CostKind kind, const RouteContext& ctx) {
  const auto plans = ctx.plans(a);
  const auto counts = a.counts();
  std::vector<int> slots;
  for (const auto& p : plans) slots.push_back(p.tour.rtt_slots);
  return evaluate_cost(kind, counts, slots);
}

namespace {

struct NeighbourPlans {
  std::vector<TransporterPlan> without;  // R_k \ {i}
  std::vector<TransporterPlan> with;     // (R_k \ {i}) u {i}
};

NeighbourPlans neighbour_plans(int client, const Assignment& a, const RouteContext& ctx) {
  NeighbourPlans np;
  auto subsets = a.subsets();
  for (int k = 0; k < ctx.num_transporters(); ++k) {
    auto& s = subsets[static_cast<std::size_t>(k)];
    s.erase(std::remove(s.begin(), s.end(), client), s.end());
    np.without.push_back(ctx.plan(k, s));
    s.push_back(client);
    np.with.push_back(ctx.plan(k, s));
  }
  return np;
}

double cost_with_client_at(int k, CostKind kind, const NeighbourPlans& np, const std::vector<int>& base_counts) {
  std::vector<int> counts = base_counts;
  std::vector<int> slots;
  for (std::size_t j = 0; j < np.without.size(); ++j) {
    const bool here = static_cast<int>(j) == k;
    slots.push_back(here ? np.with[j].tour.rtt_slots : np.without[j].tour.rtt_slots);
    if (here) ++counts[j];
  }
  return evaluate_cost(kind, counts, slots);
}

std::string describe_plans(const std::vector<TransporterPlan>& plans) {
  std::ostringstream out;
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const auto& p = plans[k];
    out << "transporter " << k << ": clients=" << p.tour.order.size() << " length_m=" << p.tour.length_m
        << " e_trans=" << p.energy.e_trans << " e_slf=" << p.energy.e_slf << " e_hover=" << p.energy.e_hover
        << " e_total=" << p.energy.e_total << " budget=" << p.energy.budget
        << (p.energy.feasible ? " feasible" : " INFEASIBLE") << '\n';
  }
  return out.str();
}

}  // namespace

std::vector<int> feasible_transporters(int client, const Assignment& a, const RouteContext& ctx) {
  const auto np = neighbour_plans(client, a, ctx);
  std::vector<int> out;
  for (int k = 0; k < ctx.num_transporters(); ++k) {
    if (np.with[static_cast<std::size_t>(k)].energy.feasible) out.push_back(k);
  }
  return out;
}

std::vector<double> gibbs_probabilities(std::span<const double> costs, double q) {
  if (!(q > 0.0)) throw InputError("Gibbs temperature must be positive");
  std::vector<double> p(costs.size());
  if (costs.empty()) return p;
  // Shift by the minimum so the largest weight is exactly 1.
  const double lo = *std::min_element(costs.begin(), costs.end());
  double total = 0.0;
  for (std::size_t j = 0; j < costs.size(); ++j) {
    p[j] = std::exp(-(costs[j] - lo) / q);
    total += p[j];
  }
  for (double& v : p) v /= total;
  return p;
}

GibbsConditional gibbs_conditional(int client, const Assignment& a, CostKind kind, double q,
                                   const RouteContext& ctx) {
  const auto np = neighbour_plans(client, a, ctx);
  auto counts = a.counts();
  --counts[static_cast<std::size_t>(a.of(client))];
  GibbsConditional gc;
  for (int k = 0; k < ctx.num_transporters(); ++k) {
    if (!np.with[static_cast<std::size_t>(k)].energy.feasible) continue;
    gc.candidates.push_back(k);
    gc.costs.push_back(cost_with_client_at(k, kind, np, counts));
  }
  gc.probabilities = gibbs_probabilities(gc.costs, q);
  return gc;
}

namespace {

std::size_t sample_index(std::span<const double> probabilities, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (std::size_t j = 0; j < probabilities.size(); ++j) {
    acc += probabilities[j];
    if (u < acc) return j;
  }
  return probabilities.size() - 1;
}

}  // namespace

Assignment gibbs_step(int client, const Assignment& a, CostKind kind, double q, std::mt19937_64& rng,
                      const RouteContext& ctx) {
  const auto gc = gibbs_conditional(client, a, kind, q, ctx);
  Assignment next = a;
  if (gc.candidates.empty()) return next;
  next.set(client, gc.candidates[sample_index(gc.probabilities, rng)]);
  return next;
}

GibbsConfig GibbsConfig::annealed(int iterations, double q0, double q_final, std::uint64_t seed) {
  if (iterations < 1) throw InputError("CARP needs at least one iteration");
  if (!(q0 > 0.0) || !(q_final > 0.0) || q_final > q0) {
    throw InputError("temperatures must satisfy 0 < q_final <= q0");
  }
  GibbsConfig cfg;
  cfg.iterations = iterations;
  cfg.q0 = q0;
  cfg.decay = (q0 / q_final - 1.0) / iterations;
  cfg.seed = seed;
  return cfg;
}

namespace {

// Seeded random insertion order, each client to the feasible transporter whose RTT grows least.
std::optional<Assignment> greedy_assignment(const RouteContext& ctx, std::uint64_t seed, std::string& diagnostics) {
  const Topology& topo = ctx.topology();
  const int n = topo.num_clients();
  const int K = ctx.num_transporters();
  std::vector<int> order = topo.clients();
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<int>> sets(static_cast<std::size_t>(K));
  std::vector<TransporterPlan> current;
  for (int k = 0; k < K; ++k) current.push_back(ctx.plan(k, {}));
  std::vector<int> of(static_cast<std::size_t>(n), -1);

  for (int client : order) {
    int best = -1;
    double best_growth = 0.0;
    std::vector<TransporterPlan> attempts;
    for (int k = 0; k < K; ++k) {
      auto s = sets[static_cast<std::size_t>(k)];
      s.push_back(client);
      attempts.push_back(ctx.plan(k, s));
      const auto& p = attempts.back();
      if (!p.energy.feasible) continue;
      const double growth = p.tour.rtt_s - current[static_cast<std::size_t>(k)].tour.rtt_s;
      if (best < 0 || growth < best_growth) {
        best = k;
        best_growth = growth;
      }
    }
    if (best < 0) {
      std::ostringstream diag;
      diag << "greedy insertion: client " << client << " fits on no transporter\ncurrent loads:\n"
           << describe_plans(current) << "with client " << client << " added:\n" << describe_plans(attempts);
      diagnostics = diag.str();
      return std::nullopt;
    }
    sets[static_cast<std::size_t>(best)].push_back(client);
    current[static_cast<std::size_t>(best)] = attempts[static_cast<std::size_t>(best)];
    of[static_cast<std::size_t>(client - 1)] = best;
  }
  return Assignment(K, std::move(of));
}

// Sweep construction: clients sorted by bearing from the server and cut into K contiguous arcs of
// near-equal size. Every rotation of the cut points is tried; the feasible split with the lowest
// peak energy wins.
std::optional<Assignment> sweep_assignment(const RouteContext& ctx, std::string& diagnostics,
                                           std::optional<Assignment>& least_split) {
  const Topology& topo = ctx.topology();
  const int n = topo.num_clients();
  const int K = ctx.num_transporters();
  std::vector<int> order = topo.clients();
  const Point& server = topo.position(kServer);
  std::vector<double> bearing(static_cast<std::size_t>(n) + 1, 0.0);
  for (int c : order) bearing[static_cast<std::size_t>(c)] = std::atan2(topo.position(c).y - server.y, topo.position(c).x - server.x);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return bearing[static_cast<std::size_t>(a)] < bearing[static_cast<std::size_t>(b)]; });

  std::optional<Assignment> best;
  double best_peak = std::numeric_limits<double>::infinity();
  double least_peak = std::numeric_limits<double>::infinity();
  std::vector<TransporterPlan> least_plans;
  for (int shift = 0; shift < n; ++shift) {
    std::vector<int> of(static_cast<std::size_t>(n), -1);
    for (int j = 0; j < n; ++j) {
      const int c = order[static_cast<std::size_t>((j + shift) % n)];
      of[static_cast<std::size_t>(c - 1)] = static_cast<int>(static_cast<long long>(j) * K / n);
    }
    Assignment a(K, std::move(of));
    const auto plans = ctx.plans(a);
    double peak = 0.0;
    bool feasible = true;
    for (const auto& p : plans) {
      peak = std::max(peak, p.energy.e_total);
      feasible = feasible && p.energy.feasible;
    }
    if (peak < least_peak) {
      least_peak = peak;
      least_plans = plans;
      least_split = a;
    }
    if (feasible && peak < best_peak) {
      best_peak = peak;
      best = std::move(a);
    }
  }
  if (!best) diagnostics = "sweep construction: best split found:\n" + describe_plans(least_plans);
  return best;
}

double overage(const std::vector<TransporterPlan>& plans, const RouteContext& ctx) {
  double total = 0.0;
  for (std::size_t k = 0; k < plans.size(); ++k) {
    total += std::max(0.0, plans[k].energy.e_total - ctx.profile(static_cast<int>(k)).budget_j);
  }
  return total;
}

// Steepest descent on the summed budget overage using single-client moves and pairwise swaps.
std::optional<Assignment> repair_assignment(const RouteContext& ctx, Assignment a, std::string& diagnostics) {
  const int K = ctx.num_transporters();
  auto sets = a.subsets();
  std::vector<TransporterPlan> plans = ctx.plans(a);
  double current = overage(plans, ctx);
  auto without = [](std::vector<int> s, int c) {
    s.erase(std::find(s.begin(), s.end(), c));
    return s;
  };
  while (current > 0.0) {
    double best = current;
    int best_src = -1, best_dst = -1;
    std::vector<int> best_src_set, best_dst_set;
    TransporterPlan best_src_plan, best_dst_plan;
    for (int src = 0; src < K; ++src) {
      if (plans[static_cast<std::size_t>(src)].energy.feasible) continue;
      for (int c : sets[static_cast<std::size_t>(src)]) {
        for (int dst = 0; dst < K; ++dst) {
          if (dst == src) continue;
          std::vector<std::vector<int>> candidates_src, candidates_dst;
          auto moved_src = without(sets[static_cast<std::size_t>(src)], c);
          auto moved_dst = sets[static_cast<std::size_t>(dst)];
          moved_dst.push_back(c);
          candidates_src.push_back(moved_src);
          candidates_dst.push_back(moved_dst);
          for (int d : sets[static_cast<std::size_t>(dst)]) {
            auto s = moved_src;
            s.push_back(d);
            candidates_src.push_back(s);
            candidates_dst.push_back(without(moved_dst, d));
          }
          for (std::size_t j = 0; j < candidates_src.size(); ++j) {
            auto ps = ctx.plan(src, candidates_src[j]);
            auto pd = ctx.plan(dst, candidates_dst[j]);
            auto trial = plans;
            trial[static_cast<std::size_t>(src)] = ps;
            trial[static_cast<std::size_t>(dst)] = pd;
            const double o = overage(trial, ctx);
            if (o < best) {
              best = o;
              best_src = src;
              best_dst = dst;
              best_src_set = candidates_src[j];
              best_dst_set = candidates_dst[j];
              best_src_plan = std::move(ps);
              best_dst_plan = std::move(pd);
            }
          }
        }
      }
    }
    if (best_src < 0) {
      diagnostics = "overage descent: local minimum with total overage " + format_double(current) + " J:\n" +
                    describe_plans(plans);
      return std::nullopt;
    }
    sets[static_cast<std::size_t>(best_src)] = std::move(best_src_set);
    sets[static_cast<std::size_t>(best_dst)] = std::move(best_dst_set);
    plans[static_cast<std::size_t>(best_src)] = std::move(best_src_plan);
    plans[static_cast<std::size_t>(best_dst)] = std::move(best_dst_plan);
    current = best;
  }
  for (int k = 0; k < K; ++k) {
    for (int c : sets[static_cast<std::size_t>(k)]) a.set(c, k);
  }
  return a;
}

}  // namespace

Assignment initial_assignment(const RouteContext& ctx, std::uint64_t seed) {
  std::string greedy_diag;
  if (auto a = greedy_assignment(ctx, seed, greedy_diag)) return *a;
  std::string sweep_diag;
  std::optional<Assignment> least_split;
  if (auto a = sweep_assignment(ctx, sweep_diag, least_split)) return *a;
  std::string repair_diag;
  if (least_split) {
    if (auto a = repair_assignment(ctx, *least_split, repair_diag)) return *a;
  }
  throw InfeasibleError("no energy-feasible initial assignment found", greedy_diag + sweep_diag + repair_diag);
}

CarpResult run_carp(const RouteContext& ctx, CostKind kind, const GibbsConfig& cfg) {
  if (cfg.iterations < 0) throw InputError("CARP iteration count must be non-negative");
  std::vector<int> visit = cfg.visit_order.empty() ? ctx.topology().clients() : cfg.visit_order;
  std::mt19937_64 rng(cfg.seed);

  CarpResult result;
  result.initial = initial_assignment(ctx, rng());
  Assignment current = result.initial;
  result.best = current;
  result.plans = ctx.plans(current);
  result.best_cost = evaluate_cost(current, kind, ctx);

  for (int l = 0; l < cfg.iterations; ++l) {
    const int client = visit[static_cast<std::size_t>(l) % visit.size()];
    const double q = cfg.temperature(l);
    current = gibbs_step(client, current, kind, q, rng, ctx);
    auto plans = ctx.plans(current);
    const double cost = evaluate_cost(current, kind, ctx);
    const bool all_feasible =
        std::all_of(plans.begin(), plans.end(), [](const TransporterPlan& p) { return p.energy.feasible; });
    if (all_feasible && cost < result.best_cost) {
      result.best_cost = cost;
      result.best = current;
      result.plans = std::move(plans);
    }
    result.trace.push_back({l, client, q, cost, result.best_cost});
  }
  return result;
}

}  // namespace fedex
