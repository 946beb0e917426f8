#include "pdra/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "pdra/error.hpp"

namespace pdra {

std::string AttributeConfig::variant_name() const {
  std::string name;
  auto add = [&](const char* part) {
    if (!name.empty()) name += '-';
    name += part;
  };
  if (open_route) add("or");
  if (time_windows) add("tw");
  if (multi_depot) add("md");
  return name.empty() ? "basic" : name;
}

AttributeConfig AttributeConfig::from_variant_name(const std::string& name) {
  for (const auto& v : all_variants()) {
    if (v.variant_name() == name) return v;
  }
  fail(ErrorCode::kInvalidConfig, fmt::format("unknown variant '{}'", name));
}

std::vector<AttributeConfig> all_variants() {
  std::vector<AttributeConfig> out;
  for (int r = 0; r < 8; ++r) out.push_back(AttributeConfig::from_regime(r));
  return out;
}

int Instance::depot_index(int node) const {
  for (std::size_t i = 0; i < depots.size(); ++i) {
    if (depots[i] == node) return static_cast<int>(i);
  }
  return -1;
}

void validate_instance(const Instance& inst) {
  const auto n = inst.network.size();
  if (!(inst.p_max > 0.0)) fail(ErrorCode::kInvalidConfig, "p_max must be positive");
  if (!(inst.battery > 0.0)) fail(ErrorCode::kInvalidConfig, "battery limit must be positive");
  if (inst.drones < 1) fail(ErrorCode::kInvalidConfig, "need at least one drone");
  if (inst.latest.size() != n) {
    fail(ErrorCode::kInvalidConfig,
         fmt::format("{} time windows for {} nodes", inst.latest.size(), n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double l = inst.latest[i];
    if (!(l >= 0.0)) fail(ErrorCode::kInvalidConfig, "time windows must be non-negative");
    if (i < inst.network.original_count() && l != kUnbounded) {
      fail(ErrorCode::kInvalidConfig,
           fmt::format("original node {} has a finite time window", i));
    }
  }
  if (inst.depots.empty()) fail(ErrorCode::kInvalidConfig, "no depot");
  if (inst.depot_capacity.size() != inst.depots.size()) {
    fail(ErrorCode::kInvalidConfig, "one capacity per depot required");
  }
  for (std::size_t i = 0; i < inst.depots.size(); ++i) {
    const int d = inst.depots[i];
    if (d < 0 || static_cast<std::size_t>(d) >= inst.network.original_count()) {
      fail(ErrorCode::kInvalidConfig, fmt::format("depot {} is not an original node", d));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (inst.depots[j] == d) fail(ErrorCode::kInvalidConfig, "duplicate depot");
    }
  }
  if (!inst.attrs.multi_depot && inst.depots.size() != 1) {
    fail(ErrorCode::kInvalidConfig, "single-depot instance with several depots");
  }
  if (inst.attrs.multi_depot) {
    if (inst.depots.size() < 2) fail(ErrorCode::kInvalidConfig, "multi-depot needs |D| >= 2");
    const int total = std::accumulate(inst.depot_capacity.begin(), inst.depot_capacity.end(), 0);
    if (total < inst.drones) {
      fail(ErrorCode::kInvalidConfig,
           fmt::format("depot capacity {} below fleet size {}", total, inst.drones));
    }
  }
}

GenConfig GenConfig::for_total_nodes(int total) {
  GenConfig cfg;
  cfg.grid_side = std::max(2, static_cast<int>(std::lround(std::sqrt(total / 2.0))));
  const int originals = cfg.grid_side * cfg.grid_side;
  const int lattice = 2 * cfg.grid_side * (cfg.grid_side - 1);
  const int target = std::clamp(total - originals, originals - 1, lattice);
  cfg.prune_keep_fraction = static_cast<double>(target) / lattice;
  return cfg;
}

namespace {

void check_gen(const GenConfig& cfg) {
  if (cfg.grid_side < 2) fail(ErrorCode::kInvalidConfig, "grid_side must be >= 2");
  if (!(cfg.prune_keep_fraction > 0.0 && cfg.prune_keep_fraction <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "prune_keep_fraction must lie in (0, 1]");
  }
  if (!(cfg.perturb_magnitude >= 0.0 && cfg.perturb_magnitude < 0.5)) {
    fail(ErrorCode::kInvalidConfig, "perturb_magnitude must lie in [0, 0.5)");
  }
}

}  // namespace

RoadNetwork generate_grid(const GenConfig& cfg) {
  check_gen(cfg);
  const int side = cfg.grid_side;
  const double s = cfg.spacing();
  std::vector<RoadNode> nodes;
  nodes.reserve(static_cast<std::size_t>(side * side));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      // Last row/column pinned to exactly 1.0.
      nodes.push_back({r * side + c, c == side - 1 ? 1.0 : c * s, r == side - 1 ? 1.0 : r * s});
    }
  }
  std::vector<LinkSpec> links;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int id = r * side + c;
      if (c + 1 < side) links.push_back({id, id + 1, s, 0.0});
      if (r + 1 < side) links.push_back({id, id + side, s, 0.0});
    }
  }
  return build_road_network(std::move(nodes), std::move(links));
}

RoadNetwork prune_links(const RoadNetwork& net, const GenConfig& cfg, Rng& rng) {
  check_gen(cfg);
  const auto specs = net.link_specs();
  const std::size_t n = net.node_count();
  const std::size_t m = specs.size();
  const auto wanted = static_cast<std::size_t>(
      std::llround(cfg.prune_keep_fraction * static_cast<double>(m)));
  const std::size_t target = std::clamp(wanted, n - 1, m);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // Spanning tree from the shuffled order, then extras in the same order.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<char> keep(m, 0);
  std::size_t kept = 0;
  for (std::size_t e : order) {
    const auto& l = net.links()[e];
    const int ra = root(l.a);
    const int rb = root(l.b);
    if (ra != rb) {
      parent[ra] = rb;
      keep[e] = 1;
      ++kept;
    }
  }
  for (std::size_t e : order) {
    if (kept >= target) break;
    if (!keep[e]) {
      keep[e] = 1;
      ++kept;
    }
  }
  std::vector<LinkSpec> links;
  links.reserve(kept);
  for (std::size_t e = 0; e < m; ++e) {
    if (keep[e]) links.push_back(specs[e]);
  }
  return build_road_network(net.nodes(), std::move(links));
}

RoadNetwork perturb_nodes(const RoadNetwork& net, const GenConfig& cfg, Rng& rng) {
  check_gen(cfg);
  const double m = cfg.perturb_magnitude * cfg.spacing();
  auto nodes = net.nodes();
  if (m > 0.0) {
    std::uniform_real_distribution<double> noise(-m, m);
    for (auto& node : nodes) {
      node.x = std::clamp(node.x + noise(rng), 0.0, 1.0);
      node.y = std::clamp(node.y + noise(rng), 0.0, 1.0);
    }
  }
  return build_road_network(std::move(nodes), net.link_specs());
}

RoadNetwork assign_attributes(const RoadNetwork& net, const GenConfig& cfg, Rng& rng) {
  check_gen(cfg);
  std::uniform_real_distribution<double> continuous(1.0, 10.0);
  std::uniform_int_distribution<int> discrete(1, 10);
  auto specs = net.link_specs();
  for (std::size_t e = 0; e < specs.size(); ++e) {
    const auto& l = net.links()[e];
    double length = distance(net.coord(l.a), net.coord(l.b));
    if (!(length > 0.0)) length = 1e-9;
    specs[e].length = length;
    specs[e].value = (cfg.integer_values ? discrete(rng) : continuous(rng)) / 10.0;
  }
  return build_road_network(net.nodes(), std::move(specs));
}

Instance make_instance(TransformedNetwork network, const InstanceConfig& cfg, Rng& rng) {
  if (cfg.p_max_choices.empty() || cfg.drone_choices.empty()) {
    fail(ErrorCode::kInvalidConfig, "empty p_max or drone choices");
  }
  if (cfg.depot_count < 1 ||
      static_cast<std::size_t>(cfg.depot_count) > network.original_count()) {
    fail(ErrorCode::kInvalidConfig,
         fmt::format("cannot place {} depots on {} original nodes", cfg.depot_count,
                     network.original_count()));
  }
  Instance inst;
  std::uniform_int_distribution<std::size_t> pick_p(0, cfg.p_max_choices.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_k(0, cfg.drone_choices.size() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  inst.p_max = cfg.p_max ? *cfg.p_max : cfg.p_max_choices[pick_p(rng)];
  inst.drones = cfg.drones ? *cfg.drones : cfg.drone_choices[pick_k(rng)];
  inst.battery = cfg.battery;
  if (cfg.attrs) {
    inst.attrs = *cfg.attrs;
  } else {
    inst.attrs.open_route = coin(rng) < cfg.open_route_probability;
    inst.attrs.time_windows = coin(rng) < cfg.time_window_probability;
    inst.attrs.multi_depot = cfg.depot_count >= 2;
  }
  if (inst.attrs.multi_depot != (cfg.depot_count >= 2)) {
    fail(ErrorCode::kInvalidConfig, "multi-depot attribute requires depot_count >= 2");
  }

  const auto originals = network.original_count();
  if (cfg.depot_count == 1) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(originals) - 1);
    inst.depots = {pick(rng)};
  } else {
    std::vector<int> ids(originals);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    inst.depots.assign(ids.begin(), ids.begin() + cfg.depot_count);
  }
  const int capacity = cfg.depot_capacity > 0 ? cfg.depot_capacity : inst.drones;
  inst.depot_capacity.assign(inst.depots.size(), capacity);

  inst.latest.assign(network.size(), kUnbounded);
  if (inst.attrs.time_windows) {
    std::uniform_real_distribution<double> window(cfg.window_alpha * inst.p_max, inst.p_max);
    for (std::size_t id = originals; id < network.size(); ++id) inst.latest[id] = window(rng);
  }
  inst.network = std::move(network);
  validate_instance(inst);
  return inst;
}

Instance generate_instance(const GenConfig& gen, const InstanceConfig& inst_cfg, Rng& rng) {
  auto net = generate_grid(gen);
  net = prune_links(net, gen, rng);
  net = perturb_nodes(net, gen, rng);
  net = assign_attributes(net, gen, rng);
  return make_instance(transform(net), inst_cfg, rng);
}

}  // namespace pdra
