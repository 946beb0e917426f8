#include "pdra/serialization.hpp"

#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "pdra/error.hpp"

namespace pdra {

using nlohmann::json;

namespace {

json parse(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParseError, fmt::format("{}: {}", what, e.what()));
  }
}

// Wraps nlohmann type/key errors into ParseError.
template <typename F>
auto guarded(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorCode::kParseError, fmt::format("{}: {}", what, e.what()));
  }
}

json network_json(const RoadNetwork& net) {
  json nodes = json::array();
  for (const auto& n : net.nodes()) nodes.push_back({{"id", n.id}, {"x", n.x}, {"y", n.y}});
  json links = json::array();
  for (const auto& l : net.link_specs()) {
    links.push_back({{"from", l.from}, {"to", l.to}, {"length", l.length}, {"value", l.value}});
  }
  return {{"nodes", std::move(nodes)}, {"links", std::move(links)}};
}

RoadNetwork network_from(const json& doc) {
  std::vector<RoadNode> nodes;
  for (const auto& n : doc.at("nodes")) {
    nodes.push_back({n.at("id").get<int>(), n.at("x").get<double>(), n.at("y").get<double>()});
  }
  std::vector<LinkSpec> links;
  for (const auto& l : doc.at("links")) {
    links.push_back({l.at("from").get<int>(), l.at("to").get<int>(), l.at("length").get<double>(),
                     l.value("value", 0.0)});
  }
  return build_road_network(std::move(nodes), std::move(links));
}

}  // namespace

std::string network_to_json(const RoadNetwork& net) {
  json doc = network_json(net);
  doc["format"] = "pdra-network";
  return doc.dump(1) + "\n";
}

RoadNetwork network_from_json(std::string_view text) {
  const json doc = parse(text, "network JSON");
  return guarded("network JSON", [&] { return network_from(doc); });
}

std::string transformed_to_json(const TransformedNetwork& tn, bool include_aux_arcs) {
  json nodes = json::array();
  for (std::size_t i = 0; i < tn.size(); ++i) {
    const int id = static_cast<int>(i);
    const auto pos = tn.position(id);
    json node = {{"id", id}, {"x", pos.x}, {"y", pos.y}, {"value", tn.value(id)}};
    if (tn.is_artificial(id)) {
      const auto& p = tn.artificial(id);
      node["kind"] = "artificial";
      node["link"] = p.link;
      node["endpoints"] = {p.a, p.b};
    } else {
      node["kind"] = "original";
      node["source_id"] = tn.source().nodes()[i].id;
    }
    nodes.push_back(std::move(node));
  }
  json road = json::array();
  for (std::size_t a = 0; a < tn.artificial_count(); ++a) {
    const int p = static_cast<int>(tn.original_count() + a);
    const auto& node = tn.artificial(p);
    road.push_back({{"from", node.a}, {"to", p}, {"time", node.half_time}});
    road.push_back({{"from", p}, {"to", node.b}, {"time", node.half_time}});
  }
  json doc = {{"format", "pdra-transformed-network"},
              {"original_count", tn.original_count()},
              {"artificial_count", tn.artificial_count()},
              {"nodes", std::move(nodes)},
              {"road_arcs", std::move(road)}};
  if (include_aux_arcs) {
    json aux = json::array();
    for (std::size_t u = 0; u < tn.original_count(); ++u) {
      for (std::size_t v = u + 1; v < tn.original_count(); ++v) {
        aux.push_back({{"from", u}, {"to", v},
                       {"time", tn.direct_time(static_cast<int>(u), static_cast<int>(v))}});
      }
    }
    doc["aux_arcs"] = std::move(aux);
  }
  return doc.dump(1) + "\n";
}

std::string instance_to_json(const Instance& inst) {
  json latest = json::array();
  for (double l : inst.latest) {
    if (l == kUnbounded) latest.push_back(nullptr);
    else latest.push_back(l);
  }
  json doc = {{"format", "pdra-instance"},
              {"version", 1},
              {"network", network_json(inst.network.source())},
              {"p_max", inst.p_max},
              {"battery", inst.battery},
              {"drones", inst.drones},
              {"attributes",
               {{"open_route", inst.attrs.open_route},
                {"time_windows", inst.attrs.time_windows},
                {"multi_depot", inst.attrs.multi_depot}}},
              {"variant", inst.attrs.variant_name()},
              {"latest", std::move(latest)},
              {"depots", inst.depots},
              {"depot_capacity", inst.depot_capacity}};
  return doc.dump(1) + "\n";
}

Instance instance_from_json(std::string_view text) {
  const json doc = parse(text, "instance JSON");
  Instance inst;
  RoadNetwork net = guarded("instance JSON", [&] {
    if (doc.value("format", std::string("pdra-instance")) != "pdra-instance") {
      fail(ErrorCode::kParseError, "instance JSON: wrong format tag");
    }
    return network_from(doc.at("network"));
  });
  inst.network = transform(net);
  guarded("instance JSON", [&] {
    inst.p_max = doc.at("p_max").get<double>();
    inst.battery = doc.at("battery").get<double>();
    inst.drones = doc.at("drones").get<int>();
    const auto& a = doc.at("attributes");
    inst.attrs = {a.at("open_route").get<bool>(), a.at("time_windows").get<bool>(),
                  a.at("multi_depot").get<bool>()};
    for (const auto& l : doc.at("latest")) {
      inst.latest.push_back(l.is_null() ? kUnbounded : l.get<double>());
    }
    inst.depots = doc.at("depots").get<std::vector<int>>();
    inst.depot_capacity = doc.at("depot_capacity").get<std::vector<int>>();
    return 0;
  });
  validate_instance(inst);
  return inst;
}

std::string solution_to_json(const Solution& sol) {
  json doc = {{"format", "pdra-solution"},
              {"routes", sol.routes},
              {"route_times", sol.route_times},
              {"value", sol.value}};
  return doc.dump(1) + "\n";
}

Solution solution_from_json(std::string_view text) {
  const json doc = parse(text, "solution JSON");
  return guarded("solution JSON", [&] {
    Solution sol;
    sol.routes = doc.at("routes").get<std::vector<std::vector<int>>>();
    sol.route_times = doc.value("route_times", std::vector<double>{});
    sol.value = doc.value("value", 0.0);
    return sol;
  });
}

std::string report_to_json(const ValidationReport& report) {
  json violations = json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"rule", v.rule}, {"detail", v.detail}});
  }
  json doc = {{"feasible", report.feasible},
              {"violations", std::move(violations)},
              {"value", report.value}};
  return doc.dump(1) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCode::kIoError, fmt::format("short write to {}", path.string()));
}

}  // namespace pdra
