#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pdra/network.hpp"

namespace pdra {

using Rng = std::mt19937_64;

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

// Slack for budget and window comparisons; absorbs 2t vs t+t rounding.
inline constexpr double kTimeTolerance = 1e-9;

/// Problem attributes. The model input uses O = 0 for open routes and O = 1
/// for closed routes; see route_flag().
struct AttributeConfig {
  bool open_route = false;
  bool time_windows = false;
  bool multi_depot = false;

  double route_flag() const { return open_route ? 0.0 : 1.0; }
  /// Regime index 0..7 (bit 0 open route, bit 1 time windows, bit 2 multi-depot).
  int regime() const {
    return (open_route ? 1 : 0) | (time_windows ? 2 : 0) | (multi_depot ? 4 : 0);
  }
  static AttributeConfig from_regime(int regime) {
    return {(regime & 1) != 0, (regime & 2) != 0, (regime & 4) != 0};
  }
  /// "basic", "or", "tw", "or-tw", "md", ... ("or-tw-md" for all three).
  std::string variant_name() const;
  static AttributeConfig from_variant_name(const std::string& name);

  friend bool operator==(const AttributeConfig&, const AttributeConfig&) = default;
};

/// All eight attribute combinations in regime order.
std::vector<AttributeConfig> all_variants();

struct Instance {
  TransformedNetwork network;
  double p_max = 2.0;
  double battery = 8.0;  // Q
  int drones = 1;        // K
  AttributeConfig attrs;
  std::vector<double> latest;  // l_i per node, kUnbounded when no window
  std::vector<int> depots;     // original node ids
  std::vector<int> depot_capacity;

  double budget() const { return std::min(p_max, battery); }
  int depot_index(int node) const;
  bool is_depot(int node) const { return depot_index(node) >= 0; }
};

/// Throws InvalidConfig when an instance breaks its invariants. Windows are
/// only allowed on artificial nodes; original nodes must carry kUnbounded.
void validate_instance(const Instance& inst);

struct GenConfig {
  int grid_side = 3;
  double prune_keep_fraction = 1.0;
  double perturb_magnitude = 0.3;  // fraction of the grid spacing
  bool integer_values = false;     // values from {1..10}/10 instead of U[1,10]/10
  std::uint64_t seed = 0;

  double spacing() const { return 1.0 / (grid_side - 1); }

  /// Grid and keep fraction for roughly `total` transformed nodes split evenly
  /// between original and artificial nodes.
  static GenConfig for_total_nodes(int total);
};

struct InstanceConfig {
  std::vector<double> p_max_choices{2.0, 3.0, 4.0};
  std::vector<int> drone_choices{2, 3, 4};
  double battery = 8.0;
  double open_route_probability = 0.5;
  double time_window_probability = 0.5;
  double window_alpha = 0.3;  // l_p ~ U[alpha * p_max, p_max]
  int depot_count = 1;        // >= 2 activates multi-depot
  int depot_capacity = 0;     // 0 means K (non-binding)

  // Fixed choices override the sampled ones (training batches share them).
  std::optional<AttributeConfig> attrs;
  std::optional<double> p_max;
  std::optional<int> drones;
};

RoadNetwork generate_grid(const GenConfig& cfg);
RoadNetwork prune_links(const RoadNetwork& net, const GenConfig& cfg, Rng& rng);
RoadNetwork perturb_nodes(const RoadNetwork& net, const GenConfig& cfg, Rng& rng);
RoadNetwork assign_attributes(const RoadNetwork& net, const GenConfig& cfg, Rng& rng);

/// grid -> prune -> perturb -> assign -> transform, then sampled parameters.
Instance generate_instance(const GenConfig& gen, const InstanceConfig& inst_cfg, Rng& rng);

/// Builds an instance around an existing network (ingested or hand-made).
Instance make_instance(TransformedNetwork network, const InstanceConfig& inst_cfg, Rng& rng);

}  // namespace pdra
