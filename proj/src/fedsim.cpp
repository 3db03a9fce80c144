#include "fedex/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fedex {

std::string_view to_string(SimMode mode) { return mode == SimMode::sync ? "sync" : "async"; }

SimMode parse_sim_mode(std::string_view text) {
  if (text == "sync") return SimMode::sync;
  if (text == "async") return SimMode::async;
  throw InputError("unknown simulation mode '" + std::string(text) + "' (expected sync or async)");
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::at_server: return "server";
    case Phase::travelling: return "travel";
    case Phase::hovering: return "hover";
  }
  return "?";
}

std::vector<int> schedule_tour_stops(const Topology& topo, const Tour& tour, double speed_mps, double slot_s,
                                     int start_slot) {
  if (!(speed_mps > 0.0)) throw InputError("transporter speed must be positive");
  std::vector<int> slots;
  slots.reserve(tour.order.size());
  double travelled = 0.0;
  int prev = kServer;
  for (std::size_t j = 0; j < tour.order.size(); ++j) {
    travelled += topo.distance(prev, tour.order[j]);
    prev = tour.order[j];
    const double seconds = travelled / speed_mps + static_cast<double>(j + 1) * tour.t_trans_s;
    const int offset = seconds_to_slots(seconds, slot_s);
    if (offset > tour.rtt_slots) {
      throw std::logic_error("stop " + std::to_string(tour.order[j]) + " served after the tour's round trip");
    }
    slots.push_back(start_slot + offset);
  }
  return slots;
}

int SimScenario::max_rtt() const {
  int m = 0;
  for (const auto& r : routes) {
    if (!r.order.empty()) m = std::max(m, r.rtt_slots);
  }
  return m;
}

double SimScenario::sum_weighted_sq_rtt() const {
  double s = 0.0;
  for (const auto& r : routes) s += static_cast<double>(r.order.size()) * r.rtt_slots * r.rtt_slots;
  return s;
}

SimScenario make_sim_scenario(const RouteContext& ctx, std::span<const TransporterPlan> plans) {
  SimScenario sc;
  sc.num_clients = ctx.topology().num_clients();
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const Tour& tour = plans[k].tour;
    TransporterRoute r;
    r.order = tour.order;
    r.rtt_slots = tour.order.empty() ? 0 : tour.rtt_slots;
    r.length_m = tour.length_m;
    r.energy = plans[k].energy;
    r.visit_offsets = schedule_tour_stops(ctx.topology(), tour, ctx.profile(static_cast<int>(k)).propulsion.speed_mps,
                                          ctx.slot_seconds());
    sc.routes.push_back(std::move(r));
  }
  return sc;
}

double auto_learning_rate(int num_clients, double L, int total_slots) {
  if (!(L > 0.0) || total_slots < 1 || num_clients < 1) {
    throw InputError("learning-rate rule needs L > 0, T >= 1 and N >= 1");
  }
  return std::min(std::sqrt(static_cast<double>(num_clients)) / (L * std::sqrt(static_cast<double>(total_slots))),
                  1.0 / L);
}

void client_visit(ClientState& client, TransporterState& transporter, int carried_slot) {
  transporter.aggregated += client.clu;
  client.x = transporter.carried;
  client.clu.setZero();
  client.base_slot = carried_slot;
}

ModelVector local_step(ClientState& client, const Task& task, int client_id, double eta, Rng& rng) {
  ModelVector eta_g = eta * task.stochastic_gradient(client_id, client.x, rng);
  client.x -= eta_g;
  client.clu += eta_g;
  return eta_g;
}

Rng client_rng(std::uint64_t seed, int client) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(client)};
  return Rng(seq);
}

namespace {

void apply_update(ModelVector& x, const ModelVector& total, int num_clients) {
  x -= total / static_cast<double>(num_clients);
}

struct Layout {
  std::vector<int> period;
  std::vector<int> transporter_of;
  std::vector<int> visit_offset;
  /// visits[k][r] lists clients served at round offset r (1..period) in tour order.
  std::vector<std::vector<std::vector<int>>> visits;

  bool active(std::size_t k) const { return period[k] > 0; }
};

Layout make_layout(const Task& task, const SimScenario& sc, const SimConfig& cfg) {
  if (sc.routes.empty()) throw InputError("scenario has no transporters");
  if (sc.num_clients != task.num_clients()) {
    throw InputError("scenario has " + std::to_string(sc.num_clients) + " clients but the task has " +
                     std::to_string(task.num_clients()));
  }
  if (cfg.total_slots < 1) throw InputError("simulation needs at least one slot");
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw InputError("learning rate must be positive");
  const int delta = sc.max_rtt();
  if (delta < 1) throw InputError("scenario has no transporter with clients");

  Layout lay;
  const std::size_t K = sc.routes.size();
  lay.period.assign(K, 0);
  lay.transporter_of.assign(static_cast<std::size_t>(sc.num_clients), -1);
  lay.visit_offset.assign(static_cast<std::size_t>(sc.num_clients), 0);
  lay.visits.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& r = sc.routes[k];
    if (r.order.size() != r.visit_offsets.size()) throw InputError("route stop slots do not match its clients");
    if (r.order.empty()) continue;
    if (r.rtt_slots < 1) throw InputError("non-empty route needs a positive round trip");
    lay.period[k] = cfg.mode == SimMode::sync ? delta : r.rtt_slots;
    lay.visits[k].resize(static_cast<std::size_t>(lay.period[k]) + 1);
    for (std::size_t j = 0; j < r.order.size(); ++j) {
      const int c = r.order[j];
      const int off = r.visit_offsets[j];
      if (c < 1 || c > sc.num_clients) throw InputError("route visits unknown client " + std::to_string(c));
      if (lay.transporter_of[static_cast<std::size_t>(c - 1)] != -1) {
        throw InputError("client " + std::to_string(c) + " is on more than one route");
      }
      if (off < 1 || off > r.rtt_slots) throw InputError("stop slot outside the round trip");
      lay.transporter_of[static_cast<std::size_t>(c - 1)] = static_cast<int>(k);
      lay.visit_offset[static_cast<std::size_t>(c - 1)] = off;
      lay.visits[k][static_cast<std::size_t>(off)].push_back(c);
    }
  }
  for (int c = 1; c <= sc.num_clients; ++c) {
    if (lay.transporter_of[static_cast<std::size_t>(c - 1)] == -1) {
      throw InputError("client " + std::to_string(c) + " is not on any route");
    }
  }
  return lay;
}

}  // namespace

SimTrace simulate(const Task& task, const SimScenario& sc, const SimConfig& cfg) {
  const Layout lay = make_layout(task, sc, cfg);
  const int N = sc.num_clients;
  const int d = task.dimension();
  const std::size_t K = sc.routes.size();

  SimTrace tr;
  tr.mode = cfg.mode;
  tr.num_clients = N;
  tr.dim = d;
  tr.total_slots = cfg.total_slots;
  tr.eta = cfg.eta;
  tr.seed = cfg.seed;
  tr.x0 = ModelVector::Zero(d);
  tr.period = lay.period;
  tr.transporter_of = lay.transporter_of;
  tr.visit_offset = lay.visit_offset;
  for (const auto& r : sc.routes) {
    tr.rtt.push_back(r.order.empty() ? 0 : r.rtt_slots);
    tr.clients_per_transporter.push_back(static_cast<int>(r.order.size()));
  }
  tr.global.reserve(static_cast<std::size_t>(cfg.total_slots));
  tr.gradients.reserve(static_cast<std::size_t>(cfg.total_slots) * static_cast<std::size_t>(N));

  std::vector<ClientState> clients(static_cast<std::size_t>(N), ClientState{ModelVector::Zero(d), ModelVector::Zero(d)});
  std::vector<Rng> rngs;
  for (int c = 1; c <= N; ++c) rngs.push_back(client_rng(cfg.seed, c));
  std::vector<int> steps(static_cast<std::size_t>(N), 0);
  std::vector<int> steps_at_visit(static_cast<std::size_t>(N), 0);
  std::vector<int> phi(static_cast<std::size_t>(N), -1);
  std::vector<TransporterState> trans(K, TransporterState{ModelVector::Zero(d), ModelVector::Zero(d)});
  std::vector<std::vector<std::pair<int, int>>> in_flight(K);  // (client, last aligned step carried)
  ModelVector x = tr.x0;

  for (int t = 0; t < cfg.total_slots; ++t) {
    tr.global.push_back(x);
    const auto [f, g] = task.global_loss_and_grad(x);
    tr.loss.push_back(f);
    tr.grad_norm_sq.push_back(g.squaredNorm());
    tr.phi.push_back(phi);
    std::vector<Phase> ph(K, Phase::at_server);
    for (std::size_t k = 0; k < K; ++k) {
      if (!lay.active(k) || t == 0) continue;
      const int r = (t - 1) % lay.period[k] + 1;
      if (!lay.visits[k][static_cast<std::size_t>(r)].empty()) {
        ph[k] = Phase::hovering;
      } else if (r <= sc.routes[k].rtt_slots) {
        ph[k] = Phase::travelling;
      }
    }
    tr.phase.push_back(std::move(ph));

    // 1. Transporters serve the clients scheduled in this slot.
    for (std::size_t k = 0; k < K; ++k) {
      if (!lay.active(k) || t == 0) continue;
      const int r = (t - 1) % lay.period[k] + 1;
      for (int c : lay.visits[k][static_cast<std::size_t>(r)]) {
        const auto ci = static_cast<std::size_t>(c - 1);
        ClientState& cl = clients[ci];
        tr.uploads.push_back({c, static_cast<int>(k), t, steps_at_visit[ci], steps[ci] - 1, cl.clu});
        in_flight[k].emplace_back(c, steps[ci] - 1);
        client_visit(cl, trans[k], t - r);
        steps_at_visit[ci] = steps[ci];
      }
    }
    double gap = 0.0;
    for (const auto& cl : clients) {
      if (cl.seeded()) gap = std::max(gap, (x - cl.x).squaredNorm());
    }
    tr.local_model_gap.push_back(gap);

    // 2. Every seeded client takes one local step.
    for (int c = 1; c <= N; ++c) {
      const auto ci = static_cast<std::size_t>(c - 1);
      if (!clients[ci].seeded()) continue;
      tr.gradients.push_back({c, t, steps[ci]++, local_step(clients[ci], task, c, cfg.eta, rngs[ci])});
    }

    // 3. Returning transporters are aggregated, then everyone at a round boundary departs.
    bool updated = false;
    ModelVector total = ModelVector::Zero(d);
    for (std::size_t k = 0; k < K; ++k) {
      if (!lay.active(k) || t == 0 || t % lay.period[k] != 0) continue;
      total += trans[k].aggregated;
      for (const auto& [c, last] : in_flight[k]) {
        auto& p = phi[static_cast<std::size_t>(c - 1)];
        p = std::max(p, last);
      }
      in_flight[k].clear();
      updated = true;
    }
    if (updated) {
      apply_update(x, total, N);
      tr.update_slots.push_back(t);
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (!lay.active(k) || t % lay.period[k] != 0) continue;
      trans[k].carried = x;
      trans[k].aggregated.setZero();
      tr.energy.push_back({t / lay.period[k], static_cast<int>(k), t, static_cast<int>(sc.routes[k].order.size()),
                           sc.routes[k].length_m, sc.routes[k].energy});
    }
  }
  return tr;
}

SimTrace run_fedex_sync(const Task& task, const SimScenario& scenario, SimConfig cfg) {
  cfg.mode = SimMode::sync;
  return simulate(task, scenario, cfg);
}

SimTrace run_fedex_async(const Task& task, const SimScenario& scenario, SimConfig cfg) {
  cfg.mode = SimMode::async;
  return simulate(task, scenario, cfg);
}

std::vector<ModelVector> simulate_aligned_view(const Task& task, const SimScenario& sc, const SimConfig& cfg) {
  const Layout lay = make_layout(task, sc, cfg);
  const int N = sc.num_clients;
  const int d = task.dimension();
  const std::size_t K = sc.routes.size();

  std::vector<ClientState> clients(static_cast<std::size_t>(N), ClientState{ModelVector::Zero(d), ModelVector::Zero(d)});
  std::vector<Rng> rngs;
  for (int c = 1; c <= N; ++c) rngs.push_back(client_rng(cfg.seed, c));
  std::vector<ModelVector> pending(K, ModelVector::Zero(d));
  ModelVector x = ModelVector::Zero(d);
  std::vector<ModelVector> global;
  global.reserve(static_cast<std::size_t>(cfg.total_slots));

  for (int t = 0; t < cfg.total_slots; ++t) {
    global.push_back(x);
    for (int c = 1; c <= N; ++c) {
      auto& cl = clients[static_cast<std::size_t>(c - 1)];
      if (cl.seeded()) local_step(cl, task, c, cfg.eta, rngs[static_cast<std::size_t>(c - 1)]);
    }
    // CLUs collected at one boundary reach the server at the next.
    bool updated = false;
    ModelVector total = ModelVector::Zero(d);
    for (std::size_t k = 0; k < K; ++k) {
      if (!lay.active(k) || t == 0 || t % lay.period[k] != 0) continue;
      total += pending[k];
      updated = true;
    }
    if (updated) apply_update(x, total, N);
    for (std::size_t k = 0; k < K; ++k) {
      if (!lay.active(k) || t % lay.period[k] != 0) continue;
      TransporterState collector{x, ModelVector::Zero(d)};
      for (int c : sc.routes[k].order) client_visit(clients[static_cast<std::size_t>(c - 1)], collector, t);
      pending[k] = std::move(collector.aggregated);
    }
  }
  return global;
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::string slot_of(const SimTrace& tr, int client, int aligned) {
  return std::to_string(tr.visit_offset[static_cast<std::size_t>(client - 1)] + aligned);
}

CheckResult check_reconstruction(const SimTrace& tr) {
  CheckResult res{"a_reconstruction", true, true, ""};
  const int N = tr.num_clients;
  std::vector<std::map<int, const GradientRecord*>> by_client(static_cast<std::size_t>(N));
  for (const auto& g : tr.gradients) by_client[static_cast<std::size_t>(g.client - 1)][g.aligned] = &g;

  std::ostringstream issues;
  int issue_count = 0;
  auto note = [&](const std::string& s) {
    if (issue_count++ < 5) issues << (issue_count > 1 ? "; " : "") << s;
  };

  for (int c = 1; c <= N; ++c) {
    int expected = 0;
    for (const auto& [aligned, rec] : by_client[static_cast<std::size_t>(c - 1)]) {
      for (; expected < aligned; ++expected) {
        note("client " + std::to_string(c) + " has no gradient for slot " + slot_of(tr, c, expected));
      }
      expected = aligned + 1;
    }
  }

  for (const auto& up : tr.uploads) {
    if (up.last_aligned < up.first_aligned) continue;
    const auto& recs = by_client[static_cast<std::size_t>(up.client - 1)];
    ModelVector sum = ModelVector::Zero(tr.dim);
    double scale = 1.0;
    for (int s = up.first_aligned; s <= up.last_aligned; ++s) {
      auto it = recs.find(s);
      if (it == recs.end()) continue;
      sum += it->second->eta_g;
      scale = std::max(scale, it->second->eta_g.cwiseAbs().maxCoeff());
    }
    const double err = (sum - up.clu).cwiseAbs().maxCoeff();
    const double tol = 10.0 * kEps * tr.dim * (up.last_aligned - up.first_aligned + 1) * std::max(scale, up.clu.cwiseAbs().maxCoeff());
    if (err > tol) {
      note("client " + std::to_string(up.client) + " upload at slot " + std::to_string(up.slot) +
           " differs from its logged gradients by " + format_double(err));
    }
  }

  ModelVector sum = ModelVector::Zero(tr.dim);
  std::vector<int> applied(static_cast<std::size_t>(N), -1);
  std::size_t steps = 0;
  double worst = 0.0;
  int first_bad = -1;
  for (int t = 0; t < static_cast<int>(tr.global.size()); ++t) {
    for (int c = 1; c <= N; ++c) {
      const auto ci = static_cast<std::size_t>(c - 1);
      while (applied[ci] < tr.phi[static_cast<std::size_t>(t)][ci]) {
        ++applied[ci];
        auto it = by_client[ci].find(applied[ci]);
        if (it == by_client[ci].end()) continue;
        sum += it->second->eta_g;
        ++steps;
      }
    }
    const ModelVector expect = tr.x0 - sum / static_cast<double>(N);
    const ModelVector& got = tr.global[static_cast<std::size_t>(t)];
    const double scale = std::max({1.0, got.cwiseAbs().maxCoeff(), expect.cwiseAbs().maxCoeff()});
    const double tol = 10.0 * kEps * tr.dim * static_cast<double>(std::max<std::size_t>(steps, 1)) * scale;
    const double err = (got - expect).cwiseAbs().maxCoeff();
    worst = std::max(worst, err / tol);
    if (err > tol && first_bad < 0) first_bad = t;
  }
  if (first_bad >= 0) note("global model departs from delivered gradients from slot " + std::to_string(first_bad));

  res.passed = issue_count == 0;
  std::ostringstream detail;
  detail << "worst_error_over_tolerance=" << format_double(worst) << " applied_steps=" << steps;
  if (issue_count > 0) detail << " issues=" << issue_count << " [" << issues.str() << "]";
  res.detail = detail.str();
  return res;
}

}  // namespace

VerificationReport verify_trace(const SimTrace& tr, const SimScenario& sc, const Task& task) {
  VerificationReport rep;
  const int N = tr.num_clients;
  const int T = static_cast<int>(tr.global.size());
  if (static_cast<int>(tr.phi.size()) != T) throw InputError("trace phi table does not match its slot count");

  rep.checks.push_back(check_reconstruction(tr));

  {
    CheckResult res{"b_delay_bound", true, true, ""};
    int violations = 0;
    int worst_excess = std::numeric_limits<int>::min();
    std::string equality_at;
    std::string first_violation;
    for (int t = 1; t < T; ++t) {
      for (int c = 1; c <= N; ++c) {
        const auto ci = static_cast<std::size_t>(c - 1);
        const int P = tr.period[static_cast<std::size_t>(tr.transporter_of[ci])];
        const int delay = (t - 1) - tr.phi[static_cast<std::size_t>(t)][ci];
        rep.max_delay = std::max(rep.max_delay, delay);
        worst_excess = std::max(worst_excess, delay - 2 * P);
        if (delay > 2 * P && violations++ == 0) {
          first_violation = "client " + std::to_string(c) + " slot " + std::to_string(t);
        }
        if (delay == 2 * P && equality_at.empty()) {
          equality_at = "client " + std::to_string(c) + " slot " + std::to_string(t);
        }
      }
    }
    for (int P : tr.period) rep.delay_bound = std::max(rep.delay_bound, 2 * P);
    rep.delay_equality_attained = !equality_at.empty();
    res.passed = violations == 0;
    std::ostringstream detail;
    detail << "max_delay=" << rep.max_delay << " worst_excess_over_2period=" << worst_excess
           << " violations=" << violations;
    if (!first_violation.empty()) detail << " first_violation=" << first_violation;
    detail << " equality=" << (equality_at.empty() ? "none" : equality_at);
    res.detail = detail.str();
    rep.checks.push_back(res);
  }

  {
    CheckResult res{"c_sync_alignment", tr.mode == SimMode::sync, true, ""};
    if (res.applicable) {
      int bad = -1;
      for (int t = 0; t < T && bad < 0; ++t) {
        const auto& p = tr.phi[static_cast<std::size_t>(t)];
        if (std::any_of(p.begin(), p.end(), [&](int v) { return v != p.front(); })) bad = t;
      }
      res.passed = bad < 0;
      res.detail = bad < 0 ? "phi identical across clients at every slot" : "phi differs across clients at slot " + std::to_string(bad);
    } else {
      res.detail = "async trace";
    }
    rep.checks.push_back(res);
  }

  {
    CheckResult res{"d_aligned_view", true, true, ""};
    SimConfig cfg{tr.mode, tr.total_slots, tr.eta, tr.seed};
    const auto aligned = simulate_aligned_view(task, sc, cfg);
    int bad = -1;
    for (int t = 0; t < T && bad < 0; ++t) {
      if (aligned[static_cast<std::size_t>(t)] != tr.global[static_cast<std::size_t>(t)]) bad = t;
    }
    res.passed = bad < 0 && static_cast<int>(aligned.size()) == T;
    res.detail = bad < 0 ? "global sequence identical at all " + std::to_string(T) + " slots"
                         : "first difference at slot " + std::to_string(bad);
    rep.checks.push_back(res);
  }

  const double G = task.constants().G;
  {
    CheckResult res{"sync_gap", tr.mode == SimMode::sync && std::isfinite(G), true, ""};
    if (res.applicable) {
      const int delta = *std::max_element(tr.period.begin(), tr.period.end());
      const double bound = 4.0 * tr.eta * tr.eta * G * G * delta * delta;
      for (int t = delta + 1; t < T; ++t) {
        const double gap = tr.local_model_gap[static_cast<std::size_t>(t)];
        rep.sync_gap_worst_ratio = std::max(rep.sync_gap_worst_ratio, gap / bound);
        if (gap > bound * (1.0 + 1e-12)) ++rep.sync_gap_violations;
      }
      res.passed = rep.sync_gap_violations == 0;
      res.detail = "bound=" + format_double(bound) + " worst_ratio=" + format_double(rep.sync_gap_worst_ratio) +
                   " violations=" + std::to_string(rep.sync_gap_violations);
    } else {
      res.detail = tr.mode == SimMode::sync ? "unbounded gradients" : "async trace";
    }
    rep.checks.push_back(res);
  }

  {
    CheckResult res{"async_gap", tr.mode == SimMode::async && std::isfinite(G), true, ""};
    if (res.applicable) {
      double weighted = 0.0;
      for (std::size_t k = 0; k < tr.period.size(); ++k) {
        weighted += static_cast<double>(tr.clients_per_transporter[k]) * tr.period[k] * tr.period[k];
      }
      const double bound = 4.0 * tr.eta * tr.eta * G * G / N * weighted;
      std::vector<std::map<int, const GradientRecord*>> by_client(static_cast<std::size_t>(N));
      for (const auto& g : tr.gradients) by_client[static_cast<std::size_t>(g.client - 1)][g.aligned] = &g;
      const int last_t = T - *std::max_element(tr.visit_offset.begin(), tr.visit_offset.end());
      int violations = 0;
      int checked = 0;
      for (int t = 1; t <= last_t && t < T; ++t) {
        ModelVector diff = ModelVector::Zero(tr.dim);
        bool complete = true;
        for (int c = 1; c <= N && complete; ++c) {
          const auto& recs = by_client[static_cast<std::size_t>(c - 1)];
          for (int s = tr.phi[static_cast<std::size_t>(t)][static_cast<std::size_t>(c - 1)] + 1; s <= t - 1; ++s) {
            auto it = recs.find(s);
            if (it == recs.end()) {
              complete = false;
              break;
            }
            diff += it->second->eta_g;
          }
        }
        if (!complete) continue;
        ++checked;
        const double gap = (diff / static_cast<double>(N)).squaredNorm();
        rep.async_gap_worst_ratio = std::max(rep.async_gap_worst_ratio, gap / bound);
        if (gap > bound * (1.0 + 1e-12)) ++violations;
      }
      res.passed = violations == 0;
      res.detail = "bound=" + format_double(bound) + " worst_ratio=" + format_double(rep.async_gap_worst_ratio) +
                   " slots_checked=" + std::to_string(checked) + " violations=" + std::to_string(violations);
    } else {
      res.detail = tr.mode == SimMode::async ? "unbounded gradients" : "sync trace";
    }
    rep.checks.push_back(res);
  }
  return rep;
}

bool VerificationReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.applicable || c.passed; });
}

std::string VerificationReport::to_text() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    out << "check=" << c.name << " status=" << (!c.applicable ? "n/a" : c.passed ? "pass" : "fail") << ' ' << c.detail
        << '\n';
  }
  out << "delay max=" << max_delay << " bound=" << delay_bound
      << " equality_attained=" << (delay_equality_attained ? "yes" : "no") << '\n';
  out << "overall=" << (all_passed() ? "pass" : "fail") << '\n';
  return out.str();
}

double sync_bound_rhs(const BoundInputs& in) {
  const auto& c = in.constants;
  const double eta = in.eta;
  const double D = in.max_rtt;
  return 2.0 / (eta * in.total_slots) * (in.f0 - c.f_star) + 10.0 * eta * eta * c.G * c.G * c.L * c.L * D * D +
         c.L * eta * c.sigma * c.sigma / in.num_clients;
}

double sync_bound_rhs_full(const BoundInputs& in) {
  const auto& c = in.constants;
  const double eta = in.eta;
  const double T = in.total_slots;
  const double D = in.max_rtt;
  const double tail = std::max(0.0, T - D) / T;
  return 2.0 / (eta * T) * (in.f0 - c.f_star) + D / T * in.grad0_sq +
         tail * 10.0 * eta * eta * c.G * c.G * c.L * c.L * D * D + tail * c.L * eta * c.sigma * c.sigma / in.num_clients;
}

double async_bound_rhs(const BoundInputs& in) {
  const auto& c = in.constants;
  const double eta = in.eta;
  return 4.0 / (eta * in.total_slots) * (in.f0 - c.f_star) +
         44.0 * eta * eta * c.G * c.G * c.L * c.L / in.num_clients * in.sum_weighted_sq_rtt +
         2.0 * c.L * eta * c.sigma * c.sigma / in.num_clients;
}

BoundReport evaluate_bounds(std::span<const SimTrace> traces, const SimScenario& scenario,
                            const TaskConstants& constants) {
  if (traces.empty()) throw InputError("bound evaluation needs at least one trace");
  const SimTrace& first = traces.front();
  BoundReport rep;
  rep.mode = first.mode;
  rep.replications = static_cast<int>(traces.size());
  for (const auto& tr : traces) {
    if (tr.grad_norm_sq.empty()) throw InputError("trace has no slots");
    double s = 0.0;
    for (double g : tr.grad_norm_sq) s += g;
    rep.lhs += s / static_cast<double>(tr.grad_norm_sq.size());
  }
  rep.lhs /= static_cast<double>(traces.size());

  BoundInputs in{constants, first.eta, static_cast<int>(first.grad_norm_sq.size()), first.num_clients,
                 scenario.max_rtt(), scenario.sum_weighted_sq_rtt(), first.loss.front(), first.grad_norm_sq.front()};
  const auto& c = constants;
  const double eta = in.eta;
  const double T = in.total_slots;
  if (rep.mode == SimMode::sync) {
    const double D = in.max_rtt;
    rep.rhs = sync_bound_rhs(in);
    rep.rhs_full = sync_bound_rhs_full(in);
    rep.terms = {{"initial_gap", 2.0 / (eta * T) * (in.f0 - c.f_star)},
                 {"staleness", 10.0 * eta * eta * c.G * c.G * c.L * c.L * D * D},
                 {"noise", c.L * eta * c.sigma * c.sigma / in.num_clients}};
  } else {
    rep.rhs = async_bound_rhs(in);
    rep.rhs_full = rep.rhs;
    rep.terms = {{"initial_gap", 4.0 / (eta * T) * (in.f0 - c.f_star)},
                 {"staleness", 44.0 * eta * eta * c.G * c.G * c.L * c.L / in.num_clients * in.sum_weighted_sq_rtt},
                 {"noise", 2.0 * c.L * eta * c.sigma * c.sigma / in.num_clients}};
  }
  std::vector<std::string> notes;
  if (eta > (1.0 + 1e-12) / c.L) {
    rep.applicable = false;
    notes.push_back("learning rate exceeds 1/L");
  }
  if (!std::isfinite(c.G)) {
    rep.applicable = false;
    notes.push_back("gradient norm unbounded");
  }
  if (T < in.max_rtt) notes.push_back("horizon shorter than one round");
  if (!c.f_star_exact) notes.push_back("optimal value estimated numerically");
  for (std::size_t i = 0; i < notes.size(); ++i) rep.note += (i ? "; " : "") + notes[i];
  return rep;
}

std::string BoundReport::to_text() const {
  std::ostringstream out;
  out << "mode=" << to_string(mode) << '\n';
  out << "replications=" << replications << '\n';
  out << "lhs=" << format_double(lhs) << '\n';
  out << "rhs=" << format_double(rhs) << '\n';
  if (mode == SimMode::sync) out << "rhs_full=" << format_double(rhs_full) << '\n';
  for (const auto& [name, value] : terms) out << "term_" << name << '=' << format_double(value) << '\n';
  out << "margin=" << format_double(margin()) << '\n';
  out << "holds=" << (!applicable ? "n/a" : margin() >= 0.0 ? "yes" : "no") << '\n';
  if (!note.empty()) out << "note=" << note << '\n';
  return out.str();
}

void write_trace_csv(std::ostream& out, const SimTrace& tr) {
  out << "slot,loss,grad_norm_sq,local_model_gap";
  for (std::size_t k = 0; k < tr.period.size(); ++k) out << ",phase_" << k;
  out << '\n';
  for (std::size_t t = 0; t < tr.global.size(); ++t) {
    out << t << ',' << format_double(tr.loss[t]) << ',' << format_double(tr.grad_norm_sq[t]) << ','
        << format_double(tr.local_model_gap[t]);
    for (Phase p : tr.phase[t]) out << ',' << to_string(p);
    out << '\n';
  }
}

void write_energy_ledger_csv(std::ostream& out, const SimTrace& tr) {
  out << "round,transporter,depart_slot,clients,length_m,e_trans_j,e_slf_j,e_hover_j,e_prop_j,e_total_j,budget_j,feasible\n";
  for (const auto& row : tr.energy) {
    const auto& e = row.energy;
    out << row.round << ',' << row.transporter << ',' << row.depart_slot << ',' << row.clients << ','
        << format_double(row.length_m) << ',' << format_double(e.e_trans) << ',' << format_double(e.e_slf) << ','
        << format_double(e.e_hover) << ',' << format_double(e.e_prop) << ',' << format_double(e.e_total) << ','
        << format_double(e.budget) << ',' << (e.feasible ? 1 : 0) << '\n';
  }
}

}  // namespace fedex
