#include "pdra/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>
#include <utility>

#include <fmt/core.h>

#include "pdra/error.hpp"

namespace pdra {

double distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

namespace {

int find_root(std::vector<int>& parent, int v) {
  while (parent[v] != v) {
    parent[v] = parent[parent[v]];
    v = parent[v];
  }
  return v;
}

}  // namespace

int RoadNetwork::index_of(int id) const {
  // Node lists are usually sorted by id; fall back to a scan otherwise.
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id,
                             [](const RoadNode& n, int v) { return n.id < v; });
  if (it != nodes_.end() && it->id == id) return static_cast<int>(it - nodes_.begin());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id == id) return static_cast<int>(i);
  }
  fail(ErrorCode::kUnknownNode, fmt::format("node id {} is not in the network", id));
}

std::vector<LinkSpec> RoadNetwork::link_specs() const {
  std::vector<LinkSpec> out;
  out.reserve(links_.size());
  for (const auto& l : links_) {
    out.push_back({nodes_[l.a].id, nodes_[l.b].id, l.length, l.value});
  }
  return out;
}

RoadNetwork build_road_network(std::vector<RoadNode> nodes, std::vector<LinkSpec> links) {
  if (nodes.empty()) fail(ErrorCode::kInvalidNetwork, "network has no nodes");

  std::unordered_map<int, int> index;
  index.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!index.emplace(n.id, static_cast<int>(i)).second) {
      fail(ErrorCode::kInvalidNetwork, fmt::format("duplicate node id {}", n.id));
    }
    if (!(n.x >= 0.0 && n.x <= 1.0 && n.y >= 0.0 && n.y <= 1.0)) {
      fail(ErrorCode::kCoordinateOutOfRange,
           fmt::format("node {} at ({}, {}) is outside [0,1]^2", n.id, n.x, n.y));
    }
  }

  RoadNetwork net;
  net.links_.reserve(links.size());
  std::set<std::pair<int, int>> seen;
  for (const auto& spec : links) {
    auto ia = index.find(spec.from);
    auto ib = index.find(spec.to);
    if (ia == index.end() || ib == index.end()) {
      fail(ErrorCode::kUnknownNode,
           fmt::format("link ({}, {}) references a missing node", spec.from, spec.to));
    }
    if (spec.from == spec.to) {
      fail(ErrorCode::kSelfLoop, fmt::format("self-loop at node {}", spec.from));
    }
    if (!(spec.length > 0.0) || !std::isfinite(spec.length)) {
      fail(ErrorCode::kInvalidNetwork,
           fmt::format("link ({}, {}) has non-positive length {}", spec.from, spec.to, spec.length));
    }
    if (!(spec.value >= 0.0) || !std::isfinite(spec.value)) {
      fail(ErrorCode::kInvalidNetwork,
           fmt::format("link ({}, {}) has invalid value {}", spec.from, spec.to, spec.value));
    }
    const int a = ia->second;
    const int b = ib->second;
    if (!seen.emplace(std::min(a, b), std::max(a, b)).second) {
      fail(ErrorCode::kDuplicateLink,
           fmt::format("link ({}, {}) appears more than once", spec.from, spec.to));
    }
    net.links_.push_back({a, b, spec.length, spec.value});
  }

  std::vector<int> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::size_t components = nodes.size();
  for (const auto& l : net.links_) {
    const int ra = find_root(parent, l.a);
    const int rb = find_root(parent, l.b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  if (components != 1) {
    fail(ErrorCode::kDisconnectedGraph,
         fmt::format("network has {} connected components", components));
  }

  net.nodes_ = std::move(nodes);
  return net;
}

TransformedNetwork::TransformedNetwork(RoadNetwork source)
    : source_(std::move(source)), original_count_(source_.node_count()) {
  const auto& links = source_.links();
  artificial_.reserve(links.size());
  std::vector<int> degree(original_count_, 0);
  for (std::size_t e = 0; e < links.size(); ++e) {
    const auto& l = links[e];
    const Point pa = source_.coord(l.a);
    const Point pb = source_.coord(l.b);
    artificial_.push_back({static_cast<int>(e), l.a, l.b,
                           Point{0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)}, l.value,
                           0.5 * l.length});
    ++degree[l.a];
    ++degree[l.b];
  }
  incident_offsets_.assign(original_count_ + 1, 0);
  for (std::size_t i = 0; i < original_count_; ++i) {
    incident_offsets_[i + 1] = incident_offsets_[i] + degree[i];
  }
  incident_.resize(static_cast<std::size_t>(incident_offsets_.back()));
  std::vector<int> fill(incident_offsets_.begin(), incident_offsets_.end() - 1);
  for (std::size_t e = 0; e < links.size(); ++e) {
    const int p = static_cast<int>(original_count_ + e);
    incident_[fill[links[e].a]++] = p;
    incident_[fill[links[e].b]++] = p;
  }
}

Point TransformedNetwork::position(int id) const {
  if (is_artificial(id)) return artificial(id).position;
  return source_.coord(id);
}

double TransformedNetwork::value(int id) const {
  return is_artificial(id) ? artificial(id).value : 0.0;
}

std::span<const int> TransformedNetwork::incident(int id) const {
  const auto begin = static_cast<std::size_t>(incident_offsets_[id]);
  const auto end = static_cast<std::size_t>(incident_offsets_[id + 1]);
  return std::span<const int>(incident_).subspan(begin, end - begin);
}

std::optional<double> TransformedNetwork::travel_time(int i, int j) const {
  if (!contains(i) || !contains(j)) {
    fail(ErrorCode::kUnknownNode, fmt::format("travel_time({}, {}) outside 0..{}", i, j,
                                              static_cast<long>(size()) - 1));
  }
  const bool ai = is_artificial(i);
  const bool aj = is_artificial(j);
  if (ai && aj) return std::nullopt;
  if (!ai && !aj) {
    if (i == j) return std::nullopt;
    return direct_time(i, j);
  }
  const int p = ai ? i : j;
  const int u = ai ? j : i;
  const auto& node = artificial(p);
  if (node.a == u || node.b == u) return node.half_time;
  return std::nullopt;
}

TransformedNetwork transform(const RoadNetwork& net) { return TransformedNetwork(net); }

}  // namespace pdra
