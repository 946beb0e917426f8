#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pdra {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

struct RoadNode {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
};

// Link as supplied by a caller: endpoints are external node ids.
struct LinkSpec {
  int from = 0;
  int to = 0;
  double length = 0.0;
  double value = 0.0;
};

// Stored link: endpoints are positions in RoadNetwork::nodes().
struct RoadLink {
  int a = 0;
  int b = 0;
  double length = 0.0;
  double value = 0.0;
};

/// Undirected, connected, simple road graph with coordinates in the unit
/// square. Apart from the empty default, only build_road_network() creates
/// one, so every non-empty network satisfies those invariants.
class RoadNetwork {
 public:
  RoadNetwork() = default;

  const std::vector<RoadNode>& nodes() const { return nodes_; }
  const std::vector<RoadLink>& links() const { return links_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }

  /// Position of the node with external id `id`; throws UnknownNode.
  int index_of(int id) const;
  Point coord(int index) const { return {nodes_[index].x, nodes_[index].y}; }

  /// Links re-expressed with external ids (the input form of build_road_network).
  std::vector<LinkSpec> link_specs() const;

 private:
  friend RoadNetwork build_road_network(std::vector<RoadNode>, std::vector<LinkSpec>);

  std::vector<RoadNode> nodes_;
  std::vector<RoadLink> links_;
};

/// Validates and assembles a road network.
/// Throws DisconnectedGraph, DuplicateLink, SelfLoop, CoordinateOutOfRange,
/// UnknownNode (dangling endpoint) or InvalidNetwork (empty, bad length/value).
RoadNetwork build_road_network(std::vector<RoadNode> nodes, std::vector<LinkSpec> links);

inline constexpr int kNoNode = -1;

struct ArtificialNode {
  int link = 0;    // index into the source network's links
  int a = 0;       // endpoint (original node index)
  int b = 0;       // endpoint (original node index)
  Point position;  // midpoint of the endpoints
  double value = 0.0;
  double half_time = 0.0;
};

/// Node-based form of the dual network. Ids 0..|N|-1 are the original nodes
/// in source order; id |N|+e is the artificial node splitting link e.
///
/// Arcs: every ordered pair of distinct original nodes (straight-line time)
/// and the two half-links (a,p),(p,b) of each artificial node p, usable in
/// both directions. Artificial nodes are never adjacent to each other.
class TransformedNetwork {
 public:
  TransformedNetwork() = default;
  explicit TransformedNetwork(RoadNetwork source);

  const RoadNetwork& source() const { return source_; }
  std::size_t original_count() const { return original_count_; }
  std::size_t artificial_count() const { return artificial_.size(); }
  std::size_t size() const { return original_count_ + artificial_.size(); }

  bool contains(int id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }
  bool is_artificial(int id) const { return static_cast<std::size_t>(id) >= original_count_; }
  const ArtificialNode& artificial(int id) const { return artificial_[id - original_count_]; }
  Point position(int id) const;
  /// Information value: c_p for artificial nodes, 0 for original nodes.
  double value(int id) const;

  /// Artificial nodes adjacent to original node `id`.
  std::span<const int> incident(int id) const;

  /// Arc time, or nullopt when (i, j) is not an arc. Throws UnknownNode.
  std::optional<double> travel_time(int i, int j) const;

  /// Straight-line time between two original nodes (no validation).
  double direct_time(int u, int v) const {
    return distance(position(u), position(v));
  }

  /// Endpoint of artificial node p's link that is not `from`.
  int far_endpoint(int p, int from) const {
    const auto& node = artificial(p);
    return node.a == from ? node.b : node.a;
  }

 private:
  RoadNetwork source_;
  std::size_t original_count_ = 0;
  std::vector<ArtificialNode> artificial_;
  std::vector<int> incident_offsets_;
  std::vector<int> incident_;
};

/// Splits each road link (i,j) with an artificial node p: t_ip = t_pj = t_ij/2, c_p = c_ij.
TransformedNetwork transform(const RoadNetwork& net);

struct TntpOptions {
  std::uint64_t seed = 1;
  double min_value = 0.1;
  double max_value = 1.0;
};

/// Reads a TNTP node table (or a GeoJSON point collection) and a TNTP link
/// file. Coordinates are min-max normalized into the unit square with one
/// shared scale factor and link lengths are divided by the same factor.
/// Reverse arcs collapse into one undirected link. Link values come from a
/// `value` column when the link table has one, else U[min_value, max_value].
RoadNetwork ingest_tntp(std::string_view node_text, std::string_view link_text,
                        const TntpOptions& options = {});

}  // namespace pdra
