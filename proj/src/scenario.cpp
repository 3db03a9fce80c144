#include "fedex/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "fedex/units.hpp"
#include "json.hpp"

namespace fedex {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Typed access to one YAML mapping; every failure names the source line.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string& source)
      : node_(std::move(node)), path_(std::move(path)), source_(source) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) fail(node_, "expected a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }

  YAML::Node get(const std::string& key) {
    seen_.insert(key);
    return has(key) ? node_[key] : YAML::Node(YAML::NodeType::Undefined);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    auto n = get(key);
    if (!n) return fallback;
    return scalar(n, key);
  }

  double quantity(const std::string& key, Dimension dim, double fallback) {
    auto n = get(key);
    if (!n) return fallback;
    const std::string s = scalar(n, key);
    try {
      return parse_quantity(s, dim);
    } catch (const InputError& e) {
      fail(n, key + ": " + e.what());
    }
  }

  double number(const std::string& key, double fallback) {
    auto n = get(key);
    if (!n) return fallback;
    const std::string s = scalar(n, key);
    try {
      return parse_double(s);
    } catch (const InputError&) {
      fail(n, key + ": expected a plain number, got '" + s + "'");
    }
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail(get(key), key + ": must be positive");
    return v;
  }

  int integer(const std::string& key, int fallback, int min_value) {
    auto n = get(key);
    if (!n) return fallback;
    const std::string s = scalar(n, key);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(n, key + ": expected an integer, got '" + s + "'");
    if (v < min_value) fail(n, key + ": must be at least " + std::to_string(min_value));
    return v;
  }

  std::uint64_t u64(const YAML::Node& n, const std::string& key) {
    const std::string s = scalar(n, key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(n, key + ": expected a non-negative integer, got '" + s + "'");
    return v;
  }

  bool boolean(const std::string& key, bool fallback) {
    auto n = get(key);
    if (!n) return fallback;
    const std::string s = scalar(n, key);
    if (s == "true" || s == "yes") return true;
    if (s == "false" || s == "no") return false;
    fail(n, key + ": expected true or false, got '" + s + "'");
  }

  /// Energy budget; "unlimited" or "inf" means no limit.
  double budget(const std::string& key, double fallback) {
    auto n = get(key);
    if (!n) return fallback;
    const std::string s = scalar(n, key);
    if (s == "unlimited" || s == "inf") return std::numeric_limits<double>::infinity();
    const double v = quantity(key, Dimension::energy, fallback);
    if (!(v >= 0.0)) fail(n, key + ": budget must be non-negative");
    return v;
  }

  Section child(const std::string& key) { return Section(get(key), path_ + key + ".", source_); }

  template <typename F>
  auto parse_enum(const std::string& key, const std::string& fallback, F parse) {
    auto n = get(key);
    const std::string s = n ? scalar(n, key) : fallback;
    try {
      return parse(s);
    } catch (const InputError& e) {
      fail(n ? n : node_, key + ": " + e.what());
    }
  }

  /// Rejects keys that were never read (typos, unsupported options).
  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) fail(kv.first, "unknown key '" + key + "'");
    }
  }

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    std::ostringstream out;
    out << source_;
    if (n && n.Mark().line >= 0) out << ':' << n.Mark().line + 1;
    out << ": " << path_ << msg;
    throw ConfigError(out.str());
  }

 private:
  std::string scalar(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key + ": expected a single value");
    return n.Scalar();
  }

  YAML::Node node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> seen_;
};

std::string radio_key_conflict(bool rate, bool psd, bool fixed) {
  return (rate + psd + fixed) > 1 ? "give only one of rate, noise_psd and fixed_rate" : "";
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ h);
}

Scenario parse_scenario(const std::string& yaml_text, const std::string& source,
                        std::optional<std::uint64_t> seed_override) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  Section top(root, "", source);
  Scenario sc;
  sc.name = top.text("name", "scenario");
  if (auto n = top.get("seed")) sc.seed = top.u64(n, "seed");
  if (seed_override) sc.seed = *seed_override;

  // Explicit seeds (as written by a manifest) are honoured unless the master seed is overridden.
  Section seeds = top.child("seeds");
  auto seed_for = [&](const std::string& key) {
    auto n = seeds.get(key);
    return n && !seed_override ? seeds.u64(n, key) : derive_seed(sc.seed, key);
  };
  sc.seeds.topology = seed_for("topology");
  sc.seeds.carp = seed_for("carp");
  sc.seeds.tsp = seed_for("tsp");
  sc.seeds.data = seed_for("data");
  sc.seeds.partition = seed_for("partition");
  sc.seeds.task = seed_for("task");
  YAML::Node rep_seeds = seeds.get("replications");

  Section topo = top.child("topology");
  if (topo.has("file")) sc.topology_file = topo.text("file", "");
  sc.layout.area_width = topo.quantity("width", Dimension::length, sc.layout.area_width);
  sc.layout.area_height = topo.quantity("height", Dimension::length, sc.layout.area_height);
  sc.layout.n_blocks = topo.integer("blocks", sc.layout.n_blocks, 1);
  sc.layout.clients_per_block = topo.integer("clients_per_block", sc.layout.clients_per_block, 1);
  sc.layout.columns = topo.integer("columns", sc.layout.columns, 0);
  if (topo.has("server")) {
    Section server = topo.child("server");
    sc.layout.server = Point{server.quantity("x", Dimension::length, 0.0), server.quantity("y", Dimension::length, 0.0)};
    server.finish();
  }
  topo.finish();

  Section radio = top.child("radio");
  sc.radio.tx_power_w = radio.quantity("tx_power", Dimension::power, sc.radio.tx_power_w);
  sc.radio.bandwidth_hz = radio.quantity("bandwidth", Dimension::frequency, sc.radio.bandwidth_hz);
  sc.radio.ref_channel_gain = radio.quantity("ref_channel_gain", Dimension::gain, sc.radio.ref_channel_gain);
  sc.radio.altitude_m = radio.quantity("altitude", Dimension::length, sc.radio.altitude_m);
  sc.radio.model_bits = radio.quantity("model_size", Dimension::data, sc.radio.model_bits);
  const bool has_rate = radio.has("rate");
  const bool has_psd = radio.has("noise_psd");
  const bool has_fixed = radio.has("fixed_rate");
  if (auto msg = radio_key_conflict(has_rate, has_psd, has_fixed); !msg.empty()) radio.fail(radio.get("rate"), msg);
  if (has_psd) sc.radio.noise_psd_w_per_hz = radio.quantity("noise_psd", Dimension::noise_density, 0.0);
  if (has_fixed) sc.radio.fixed_rate_bps = radio.quantity("fixed_rate", Dimension::rate, 0.0);
  const double rate = radio.quantity("rate", Dimension::rate, 50e6);
  radio.finish();
  try {
    if (!has_psd && !has_fixed) sc.radio.noise_psd_w_per_hz = calibrate_noise_psd(sc.radio, rate);
    validate(sc.radio);
  } catch (const InputError& e) {
    radio.fail(root["radio"], e.what());
  }

  sc.slot_s = top.quantity("slot", Dimension::time, sc.slot_s);
  if (!(sc.slot_s > 0.0)) top.fail(top.get("slot"), "slot: must be positive");

  Section fleet_cfg = top.child("transporters");
  TransporterProfile base;
  base.propulsion.speed_mps = fleet_cfg.quantity("speed", Dimension::speed, base.propulsion.speed_mps);
  base.propulsion.parasitic_coeff = fleet_cfg.number("parasitic_coeff", base.propulsion.parasitic_coeff);
  base.propulsion.induced_coeff = fleet_cfg.number("induced_coeff", base.propulsion.induced_coeff);
  base.propulsion.hover_power_w = fleet_cfg.quantity("hover_power", Dimension::power, base.propulsion.hover_power_w);
  base.budget_j = fleet_cfg.budget("budget", 15e3);
  auto read_profile = [&](Section& s, TransporterProfile p) {
    p.propulsion.speed_mps = s.quantity("speed", Dimension::speed, p.propulsion.speed_mps);
    p.propulsion.parasitic_coeff = s.number("parasitic_coeff", p.propulsion.parasitic_coeff);
    p.propulsion.induced_coeff = s.number("induced_coeff", p.propulsion.induced_coeff);
    p.propulsion.hover_power_w = s.quantity("hover_power", Dimension::power, p.propulsion.hover_power_w);
    p.budget_j = s.budget("budget", p.budget_j);
    if (s.has("tx_power")) p.tx_power_w = s.quantity("tx_power", Dimension::power, 0.0);
    return p;
  };
  if (auto fleet = fleet_cfg.get("fleet")) {
    if (!fleet.IsSequence() || fleet.size() == 0) fleet_cfg.fail(fleet, "fleet: expected a non-empty list");
    for (std::size_t k = 0; k < fleet.size(); ++k) {
      Section s(fleet[k], "transporters.fleet[" + std::to_string(k) + "].", source);
      sc.transporters.push_back(read_profile(s, base));
      s.finish();
    }
  } else {
    const int count = fleet_cfg.integer("count", 4, 1);
    sc.transporters.assign(static_cast<std::size_t>(count), base);
  }
  if (auto overrides = fleet_cfg.get("overrides")) {
    if (!overrides.IsSequence()) fleet_cfg.fail(overrides, "overrides: expected a list");
    for (std::size_t j = 0; j < overrides.size(); ++j) {
      Section s(overrides[j], "transporters.overrides[" + std::to_string(j) + "].", source);
      const int idx = s.integer("index", -1, 0);
      if (idx < 0 || idx >= static_cast<int>(sc.transporters.size())) {
        s.fail(overrides[j], "index: must name a transporter 0.." + std::to_string(sc.transporters.size() - 1));
      }
      sc.transporters[static_cast<std::size_t>(idx)] = read_profile(s, sc.transporters[static_cast<std::size_t>(idx)]);
      s.finish();
    }
  }
  fleet_cfg.finish();
  for (const auto& p : sc.transporters) {
    try {
      validate(p.propulsion);
      if (p.tx_power_w && !(*p.tx_power_w > 0.0)) throw InputError("transmit power must be positive");
    } catch (const InputError& e) {
      fleet_cfg.fail(root["transporters"], e.what());
    }
  }

  Section routing = top.child("routing");
  sc.cost = routing.parse_enum("cost", "sws", parse_cost_kind);
  sc.tsp = routing.parse_enum("tsp", "two_opt", [](const std::string& s) {
    if (s == "two_opt") return TspMethod::two_opt;
    if (s == "exact") return TspMethod::exact;
    throw InputError("unknown TSP method '" + s + "' (expected two_opt or exact)");
  });
  sc.tsp_restarts = routing.integer("restarts", sc.tsp_restarts, 1);
  routing.finish();

  Section gibbs = top.child("gibbs");
  sc.gibbs_iterations = gibbs.integer("iterations", sc.gibbs_iterations, 0);
  sc.gibbs_q0 = gibbs.positive("q0", sc.gibbs_q0);
  if (gibbs.has("decay") && gibbs.has("q_final")) gibbs.fail(gibbs.get("q_final"), "give either decay or q_final");
  if (gibbs.has("q_final")) {
    const double q_final = gibbs.positive("q_final", 1.0);
    if (q_final > sc.gibbs_q0) gibbs.fail(gibbs.get("q_final"), "q_final: must not exceed q0");
    sc.gibbs_decay = sc.gibbs_iterations > 0 ? (sc.gibbs_q0 / q_final - 1.0) / sc.gibbs_iterations : 0.0;
  } else {
    sc.gibbs_decay = gibbs.number("decay", sc.gibbs_decay);
    if (!(sc.gibbs_decay >= 0.0)) gibbs.fail(gibbs.get("decay"), "decay: must be non-negative");
  }
  sc.exhaustive_check = gibbs.boolean("exhaustive_check", false);
  gibbs.finish();

  Section sim = top.child("simulation");
  sc.mode = sim.parse_enum("mode", "async", parse_sim_mode);
  sc.total_slots = sim.integer("slots", sc.total_slots, 1);
  if (sim.text("learning_rate", "auto") != "auto") sc.eta = sim.positive("learning_rate", 0.0);
  sc.replications = sim.integer("replications", sc.replications, 1);
  sc.target_fraction = sim.positive("target_fraction", sc.target_fraction);
  sim.finish();

  Section task = top.child("task");
  sc.task.kind = task.parse_enum("kind", "quadratic", [](const std::string& s) {
    if (s == "quadratic") return TaskKind::quadratic;
    if (s == "logistic") return TaskKind::logistic;
    throw InputError("unknown task '" + s + "' (expected quadratic or logistic)");
  });
  sc.task.dataset.num_samples = task.integer("samples", sc.task.dataset.num_samples, 1);
  sc.task.dataset.num_classes = task.integer("classes", sc.task.dataset.num_classes, 1);
  sc.task.dataset.dim = task.integer("dim", sc.task.dataset.dim, 1);
  sc.task.dataset.class_spread = task.positive("class_spread", sc.task.dataset.class_spread);
  sc.task.dataset.sample_noise = task.positive("sample_noise", sc.task.dataset.sample_noise);
  sc.task.noise = task.number("noise", sc.task.noise);
  if (!(sc.task.noise >= 0.0)) task.fail(task.get("noise"), "noise: must be non-negative");
  sc.task.clip = task.positive("clip", sc.task.clip);
  sc.task.l2 = task.positive("l2", sc.task.l2);
  sc.task.batch = task.integer("batch", sc.task.batch, 1);
  task.finish();

  Section part = top.child("partition");
  sc.partition.scheme = part.parse_enum("scheme", "iid", parse_partition_scheme);
  sc.partition.alpha = part.positive("alpha", sc.partition.alpha);
  sc.partition.p_main = part.number("p_main", sc.partition.p_main);
  if (!(sc.partition.p_main >= 0.0 && sc.partition.p_main <= 1.0)) {
    part.fail(part.get("p_main"), "p_main: must lie in [0, 1]");
  }
  sc.partition.seed = sc.seeds.partition;
  part.finish();

  if (rep_seeds && !seed_override) {
    if (!rep_seeds.IsSequence() || rep_seeds.size() != static_cast<std::size_t>(sc.replications)) {
      seeds.fail(rep_seeds, "replications: expected one seed per replication");
    }
    for (std::size_t r = 0; r < rep_seeds.size(); ++r) sc.seeds.replications.push_back(seeds.u64(rep_seeds[r], "replications"));
  } else {
    for (int r = 0; r < sc.replications; ++r) sc.seeds.replications.push_back(derive_seed(sc.seed, "replication/" + std::to_string(r)));
  }
  seeds.finish();
  top.finish();

  if (!sc.topology_file) {
    const int n = sc.layout.n_blocks * sc.layout.clients_per_block;
    if (n < static_cast<int>(sc.transporters.size())) {
      top.fail(root["topology"], "need at least as many clients (" + std::to_string(n) + ") as transporters (" +
                                     std::to_string(sc.transporters.size()) + ")");
    }
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  Scenario sc = parse_scenario(buf.str(), path.string(), seed_override);
  if (sc.topology_file && std::filesystem::path(*sc.topology_file).is_relative()) {
    sc.topology_file = (path.parent_path() / *sc.topology_file).string();
  }
  return sc;
}

void write_manifest(std::ostream& out, const Scenario& sc) {
  auto q = [](double v, Dimension d) { return format_quantity(v, d); };
  auto budget = [&](double b) { return std::isfinite(b) ? q(b, Dimension::energy) : std::string("unlimited"); };
  out << "# Resolved scenario: SI values and explicit seeds.\n";
  out << "name: " << sc.name << '\n';
  out << "seed: " << sc.seed << '\n';
  out << "seeds:\n";
  out << "  topology: " << sc.seeds.topology << "\n  carp: " << sc.seeds.carp << "\n  tsp: " << sc.seeds.tsp
      << "\n  data: " << sc.seeds.data << "\n  partition: " << sc.seeds.partition << "\n  task: " << sc.seeds.task
      << "\n  replications: [";
  for (std::size_t r = 0; r < sc.seeds.replications.size(); ++r) out << (r ? ", " : "") << sc.seeds.replications[r];
  out << "]\n";
  out << "topology:\n";
  if (sc.topology_file) {
    out << "  file: topology.csv\n";
  } else {
    out << "  width: " << q(sc.layout.area_width, Dimension::length) << '\n';
    out << "  height: " << q(sc.layout.area_height, Dimension::length) << '\n';
    out << "  blocks: " << sc.layout.n_blocks << '\n';
    out << "  clients_per_block: " << sc.layout.clients_per_block << '\n';
    out << "  columns: " << sc.layout.columns << '\n';
    if (sc.layout.server) {
      out << "  server: {x: " << q(sc.layout.server->x, Dimension::length) << ", y: "
          << q(sc.layout.server->y, Dimension::length) << "}\n";
    }
  }
  out << "radio:\n";
  out << "  tx_power: " << q(sc.radio.tx_power_w, Dimension::power) << '\n';
  out << "  bandwidth: " << q(sc.radio.bandwidth_hz, Dimension::frequency) << '\n';
  out << "  ref_channel_gain: " << format_double(sc.radio.ref_channel_gain) << '\n';
  out << "  altitude: " << q(sc.radio.altitude_m, Dimension::length) << '\n';
  out << "  model_size: " << q(sc.radio.model_bits, Dimension::data) << '\n';
  if (sc.radio.fixed_rate_bps) {
    out << "  fixed_rate: " << q(*sc.radio.fixed_rate_bps, Dimension::rate) << '\n';
  } else {
    out << "  noise_psd: " << q(sc.radio.noise_psd_w_per_hz, Dimension::noise_density) << '\n';
  }
  out << "slot: " << q(sc.slot_s, Dimension::time) << '\n';
  out << "transporters:\n  fleet:\n";
  for (const auto& p : sc.transporters) {
    out << "    - {speed: " << q(p.propulsion.speed_mps, Dimension::speed)
        << ", parasitic_coeff: " << format_double(p.propulsion.parasitic_coeff)
        << ", induced_coeff: " << format_double(p.propulsion.induced_coeff)
        << ", hover_power: " << q(p.propulsion.hover_power_w, Dimension::power) << ", budget: " << budget(p.budget_j);
    if (p.tx_power_w) out << ", tx_power: " << q(*p.tx_power_w, Dimension::power);
    out << "}\n";
  }
  out << "routing:\n  cost: " << to_string(sc.cost) << "\n  tsp: " << (sc.tsp == TspMethod::exact ? "exact" : "two_opt")
      << "\n  restarts: " << sc.tsp_restarts << '\n';
  out << "gibbs:\n  iterations: " << sc.gibbs_iterations << "\n  q0: " << format_double(sc.gibbs_q0)
      << "\n  decay: " << format_double(sc.gibbs_decay) << "\n  exhaustive_check: " << (sc.exhaustive_check ? "true" : "false")
      << '\n';
  out << "simulation:\n  mode: " << to_string(sc.mode) << "\n  slots: " << sc.total_slots
      << "\n  learning_rate: " << (sc.eta ? format_double(*sc.eta) : std::string("auto"))
      << "\n  replications: " << sc.replications << "\n  target_fraction: " << format_double(sc.target_fraction) << '\n';
  out << "task:\n  kind: " << (sc.task.kind == TaskKind::quadratic ? "quadratic" : "logistic")
      << "\n  samples: " << sc.task.dataset.num_samples << "\n  classes: " << sc.task.dataset.num_classes
      << "\n  dim: " << sc.task.dataset.dim << "\n  class_spread: " << format_double(sc.task.dataset.class_spread)
      << "\n  sample_noise: " << format_double(sc.task.dataset.sample_noise) << "\n  noise: " << format_double(sc.task.noise)
      << "\n  clip: " << format_double(sc.task.clip) << "\n  l2: " << format_double(sc.task.l2)
      << "\n  batch: " << sc.task.batch << '\n';
  out << "partition:\n  scheme: " << to_string(sc.partition.scheme) << "\n  alpha: " << format_double(sc.partition.alpha)
      << "\n  p_main: " << format_double(sc.partition.p_main) << '\n';
}

Topology build_scenario_topology(const Scenario& sc, const std::filesystem::path& base_dir) {
  if (sc.topology_file) {
    std::filesystem::path p(*sc.topology_file);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) throw InputError("cannot open topology file " + p.string());
    Topology topo = read_topology_csv(in);
    if (topo.num_clients() < static_cast<int>(sc.transporters.size())) {
      throw InputError("topology has fewer clients than transporters");
    }
    return topo;
  }
  return generate_block_layout(sc.layout, sc.seeds.topology);
}

ExhaustiveResult exhaustive_search(const RouteContext& ctx, CostKind kind, std::size_t limit) {
  const int N = ctx.topology().num_clients();
  const int K = ctx.num_transporters();
  std::size_t space = 1;
  for (int i = 0; i < N; ++i) {
    if (space > limit / static_cast<std::size_t>(K)) throw InputError("assignment space too large to enumerate");
    space *= static_cast<std::size_t>(K);
  }
  ExhaustiveResult res;
  res.best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> of(static_cast<std::size_t>(N), 0);
  for (std::size_t code = 0; code < space; ++code) {
    std::size_t c = code;
    for (int i = 0; i < N; ++i) {
      of[static_cast<std::size_t>(i)] = static_cast<int>(c % static_cast<std::size_t>(K));
      c /= static_cast<std::size_t>(K);
    }
    Assignment a(K, of);
    const auto plans = ctx.plans(a);
    ++res.enumerated;
    if (!std::all_of(plans.begin(), plans.end(), [](const TransporterPlan& p) { return p.energy.feasible; })) continue;
    ++res.feasible;
    std::vector<int> slots;
    for (const auto& p : plans) slots.push_back(p.tour.rtt_slots);
    const double cost = evaluate_cost(kind, a.counts(), slots);
    if (cost < res.best_cost) {
      res.best_cost = cost;
      res.best = a;
    }
  }
  return res;
}

PlanResult plan_scenario(const Scenario& sc, const Topology& topo) {
  TspCache cache(topo, sc.tsp, sc.tsp_restarts, sc.seeds.tsp);
  RouteContext ctx(topo, sc.radio, sc.transporters, sc.slot_s, cache);
  GibbsConfig cfg;
  cfg.iterations = sc.gibbs_iterations;
  cfg.q0 = sc.gibbs_q0;
  cfg.decay = sc.gibbs_decay;
  cfg.seed = sc.seeds.carp;
  PlanResult out;
  out.carp = run_carp(ctx, sc.cost, cfg);
  out.routes = make_sim_scenario(ctx, out.carp.plans);
  if (sc.exhaustive_check) out.exhaustive = exhaustive_search(ctx, sc.cost);
  out.tsp_cache_size = cache.size();
  out.tsp_cache_hits = cache.hits();
  return out;
}

PlanResult plan_from_orders(const Scenario& sc, const Topology& topo, const std::vector<std::vector<int>>& orders) {
  const int K = static_cast<int>(sc.transporters.size());
  if (static_cast<int>(orders.size()) != K) {
    throw InputError("plan has " + std::to_string(orders.size()) + " transporters, scenario has " + std::to_string(K));
  }
  TspCache cache(topo, sc.tsp, sc.tsp_restarts, sc.seeds.tsp);
  RouteContext ctx(topo, sc.radio, sc.transporters, sc.slot_s, cache);
  std::vector<int> of(static_cast<std::size_t>(topo.num_clients()), -1);
  PlanResult out;
  std::vector<int> slots;
  for (int k = 0; k < K; ++k) {
    const auto& order = orders[static_cast<std::size_t>(k)];
    TransporterPlan p;
    const auto& prof = ctx.profile(k);
    if (order.empty()) {
      p.energy.budget = prof.budget_j;
    } else {
      const RadioParams radio = ctx.radio_for(k);
      p.tour = tour_from_order(topo, radio, prof.propulsion, order, sc.slot_s);
      p.energy = tour_energy_report(radio, prof.propulsion, p.tour.length_m, static_cast<int>(order.size()), prof.budget_j);
    }
    for (int c : order) {
      if (of[static_cast<std::size_t>(c - 1)] != -1) throw InputError("client " + std::to_string(c) + " appears in two tours");
      of[static_cast<std::size_t>(c - 1)] = k;
    }
    slots.push_back(p.tour.rtt_slots);
    out.carp.plans.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < of.size(); ++i) {
    if (of[i] == -1) throw InputError("client " + std::to_string(i + 1) + " is in no tour");
  }
  out.carp.initial = out.carp.best = Assignment(K, of);
  out.carp.best_cost = evaluate_cost(sc.cost, out.carp.best.counts(), slots);
  out.routes = make_sim_scenario(ctx, out.carp.plans);
  return out;
}

std::unique_ptr<Task> build_task(const Scenario& sc, const Topology& topo) {
  const Dataset data = generate_synthetic_dataset(sc.task.dataset, sc.seeds.data);
  PartitionSpec ps = sc.partition;
  ps.seed = sc.seeds.partition;
  const Shards shards = partition_data(data, ps, topo);
  if (sc.task.kind == TaskKind::quadratic) {
    return make_quadratic_task(data, shards, sc.task.noise, sc.task.clip, sc.seeds.task);
  }
  return std::make_unique<LogisticTask>(data, shards, sc.task.l2, sc.task.batch, sc.task.clip);
}

bool SimulationResult::all_verified() const {
  return std::all_of(reports.begin(), reports.end(), [](const VerificationReport& r) { return r.all_passed(); });
}

SimulationResult simulate_scenario(const Scenario& sc, const Task& task, const SimScenario& routes) {
  SimulationResult res;
  res.eta = sc.eta ? *sc.eta : auto_learning_rate(task.num_clients(), task.constants().L, sc.total_slots);
  std::vector<std::future<std::pair<SimTrace, VerificationReport>>> jobs;
  for (int r = 0; r < sc.replications; ++r) {
    SimConfig cfg{sc.mode, sc.total_slots, res.eta, sc.seeds.replications[static_cast<std::size_t>(r)]};
    jobs.push_back(std::async(std::launch::async, [&task, &routes, cfg] {
      SimTrace tr = simulate(task, routes, cfg);
      VerificationReport rep = verify_trace(tr, routes, task);
      return std::make_pair(std::move(tr), std::move(rep));
    }));
  }
  for (auto& j : jobs) {
    auto [tr, rep] = j.get();
    res.traces.push_back(std::move(tr));
    res.reports.push_back(std::move(rep));
  }
  res.bounds = evaluate_bounds(res.traces, routes, task.constants());
  return res;
}

namespace {

nlohmann::json energy_json(const EnergyReport& e) {
  nlohmann::json j;
  j["e_trans_j"] = e.e_trans;
  j["e_slf_j"] = e.e_slf;
  j["e_hover_j"] = e.e_hover;
  j["e_prop_j"] = e.e_prop;
  j["e_total_j"] = e.e_total;
  j["budget_j"] = std::isfinite(e.budget) ? nlohmann::json(e.budget) : nlohmann::json(nullptr);
  j["feasible"] = e.feasible;
  return j;
}

}  // namespace

void write_plan_json(std::ostream& out, const Scenario& sc, const PlanResult& plan) {
  nlohmann::json j;
  j["scenario"] = sc.name;
  j["cost"] = std::string(to_string(sc.cost));
  j["best_cost"] = plan.carp.best_cost;
  j["transporter_of"] = plan.carp.best.raw();
  j["initial_transporter_of"] = plan.carp.initial.raw();
  j["transporters"] = nlohmann::json::array();
  int sum_rtt = 0;
  for (std::size_t k = 0; k < plan.carp.plans.size(); ++k) {
    const auto& p = plan.carp.plans[k];
    nlohmann::json t;
    t["index"] = k;
    t["clients"] = p.tour.order.size();
    t["order"] = p.tour.order;
    t["visit_offsets"] = plan.routes.routes[k].visit_offsets;
    t["length_m"] = p.tour.length_m;
    t["t_slf_s"] = p.tour.t_slf_s;
    t["t_trans_s"] = p.tour.t_trans_s;
    t["rtt_s"] = p.tour.rtt_s;
    t["rtt_slots"] = p.tour.rtt_slots;
    t["energy"] = energy_json(p.energy);
    j["transporters"].push_back(t);
    sum_rtt += p.tour.rtt_slots;
  }
  j["metrics"] = {{"sum_weighted_sq_rtt", plan.routes.sum_weighted_sq_rtt()},
                  {"max_rtt", plan.routes.max_rtt()},
                  {"sum_rtt", sum_rtt}};
  j["tsp_cache"] = {{"entries", plan.tsp_cache_size}, {"hits", plan.tsp_cache_hits}};
  if (plan.exhaustive) {
    j["exhaustive"] = {{"best_cost", plan.exhaustive->best_cost},
                       {"feasible", plan.exhaustive->feasible},
                       {"enumerated", plan.exhaustive->enumerated},
                       {"matches", plan.exhaustive->best_cost == plan.carp.best_cost}};
  }
  out << j.dump(2) << '\n';
}

std::vector<std::vector<int>> read_plan_orders(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
    std::vector<std::vector<int>> orders;
    for (const auto& t : j.at("transporters")) orders.push_back(t.at("order").get<std::vector<int>>());
    return orders;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed plan: ") + e.what());
  }
}

void write_cost_trace_csv(std::ostream& out, const CarpResult& carp) {
  out << "iteration,client,temperature,cost,best_cost\n";
  for (const auto& r : carp.trace) {
    out << r.iteration << ',' << r.client << ',' << format_double(r.temperature) << ',' << format_double(r.cost) << ','
        << format_double(r.best_cost) << '\n';
  }
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  return out;
}

}  // namespace

void write_plan_artifacts(const std::filesystem::path& dir, const Scenario& sc, const Topology& topo,
                          const PlanResult& plan) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "manifest.yaml");
    write_manifest(out, sc);
  }
  {
    auto out = open_out(dir / "topology.csv");
    write_topology_csv(out, topo);
  }
  {
    auto out = open_out(dir / "plan.json");
    write_plan_json(out, sc, plan);
  }
  {
    auto out = open_out(dir / "cost_trace.csv");
    write_cost_trace_csv(out, plan.carp);
  }
  {
    auto out = open_out(dir / "tours.txt");
    std::vector<Tour> tours;
    for (const auto& p : plan.carp.plans) tours.push_back(p.tour);
    write_tours(out, tours);
  }
}

void write_simulation_artifacts(const std::filesystem::path& dir, const SimulationResult& sim) {
  std::filesystem::create_directories(dir);
  for (std::size_t r = 0; r < sim.traces.size(); ++r) {
    auto trace = open_out(dir / ("trace_rep" + std::to_string(r) + ".csv"));
    write_trace_csv(trace, sim.traces[r]);
    auto ledger = open_out(dir / ("energy_ledger_rep" + std::to_string(r) + ".csv"));
    write_energy_ledger_csv(ledger, sim.traces[r]);
  }
  {
    auto out = open_out(dir / "verification.txt");
    for (std::size_t r = 0; r < sim.reports.size(); ++r) {
      out << "replication=" << r << " seed=" << sim.traces[r].seed << '\n' << sim.reports[r].to_text();
    }
    out << "all_replications=" << (sim.all_verified() ? "pass" : "fail") << '\n';
  }
  {
    auto out = open_out(dir / "bounds.txt");
    out << "eta=" << format_double(sim.eta) << '\n' << sim.bounds.to_text();
  }
}

std::vector<RouteComparisonRow> compare_routes(const Scenario& sc, const Topology& topo,
                                               const std::vector<CostKind>& costs) {
  const auto task = build_task(sc, topo);
  std::vector<RouteComparisonRow> rows;
  for (CostKind kind : costs) {
    Scenario variant = sc;
    variant.cost = kind;
    variant.exhaustive_check = false;
    const PlanResult plan = plan_scenario(variant, topo);
    const SimulationResult sim = simulate_scenario(variant, *task, plan.routes);

    RouteComparisonRow row;
    row.cost = kind;
    row.objective = plan.carp.best_cost;
    row.sum_weighted_sq_rtt = plan.routes.sum_weighted_sq_rtt();
    row.max_rtt = plan.routes.max_rtt();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : plan.carp.plans) {
      row.sum_rtt += p.tour.rtt_slots;
      lo = std::min(lo, p.energy.e_total);
      hi = std::max(hi, p.energy.e_total);
    }
    row.energy_spread_j = hi - lo;

    const auto constants = task->constants();
    const std::size_t T = sim.traces.front().loss.size();
    std::vector<double> mean(T, 0.0);
    for (const auto& tr : sim.traces) {
      for (std::size_t t = 0; t < T; ++t) mean[t] += tr.loss[t] / static_cast<double>(sim.traces.size());
    }
    row.target_loss = constants.f_star + sc.target_fraction * (mean.front() - constants.f_star);
    for (std::size_t t = 0; t < T; ++t) {
      if (mean[t] <= row.target_loss) {
        row.slots_to_target = static_cast<int>(t);
        break;
      }
    }
    row.final_loss = mean.back();
    rows.push_back(row);
  }
  return rows;
}

void write_route_comparison_csv(std::ostream& out, const std::vector<RouteComparisonRow>& rows) {
  out << "cost,objective,sum_weighted_sq_rtt,max_rtt,sum_rtt,energy_spread_j,slots_to_target,target_loss,final_loss\n";
  for (const auto& r : rows) {
    out << to_string(r.cost) << ',' << format_double(r.objective) << ',' << format_double(r.sum_weighted_sq_rtt) << ','
        << r.max_rtt << ',' << r.sum_rtt << ',' << format_double(r.energy_spread_j) << ',' << r.slots_to_target << ','
        << format_double(r.target_loss) << ',' << format_double(r.final_loss) << '\n';
  }
}

std::filesystem::path artifact_root() {
  const char* env = std::getenv("FEDEX_ARTIFACT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("artifacts");
}

}  // namespace fedex
