// TNTP network reader (the plain-text format of the TransportationNetworks
// collection). Node coordinates may also come as a GeoJSON point collection.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>
#include <json.hpp>

#include "pdra/error.hpp"
#include "pdra/network.hpp"

namespace pdra {
namespace {

struct Token {
  std::string_view text;
  int column = 0;  // 1-based
};

struct Line {
  std::string_view text;
  int number = 0;  // 1-based
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  int number = 1;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back({line, number++});
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == ';')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != ';') ++j;
    tokens.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
    i = j;
  }
  return tokens;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

[[noreturn]] void parse_error(std::string_view what, int line, int column, std::string_view detail) {
  fail(ErrorCode::kParseError,
       fmt::format("{} line {}, column {}: {}", what, line, column, detail));
}

double to_double(const Token& t, std::string_view what, int line) {
  double v = 0.0;
  const auto* first = t.text.data();
  const auto* last = first + t.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    parse_error(what, line, t.column, fmt::format("expected a number, got '{}'", t.text));
  }
  return v;
}

int to_int(const Token& t, std::string_view what, int line) {
  int v = 0;
  const auto* first = t.text.data();
  const auto* last = first + t.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    parse_error(what, line, t.column, fmt::format("expected an integer, got '{}'", t.text));
  }
  return v;
}

struct RawNode {
  double x = 0.0;
  double y = 0.0;
};

std::map<int, RawNode> read_geojson_nodes(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kParseError, fmt::format("node GeoJSON: {}", e.what()));
  }
  std::map<int, RawNode> nodes;
  if (!doc.contains("features") || !doc["features"].is_array()) {
    fail(ErrorCode::kParseError, "node GeoJSON: missing 'features' array");
  }
  for (const auto& feature : doc["features"]) {
    const auto& props = feature.value("properties", nlohmann::json::object());
    int id = 0;
    if (props.contains("id")) {
      id = props["id"].get<int>();
    } else if (props.contains("node")) {
      id = props["node"].get<int>();
    } else if (feature.contains("id")) {
      id = feature["id"].get<int>();
    } else {
      fail(ErrorCode::kParseError, "node GeoJSON: feature without an id");
    }
    const auto& coords = feature.at("geometry").at("coordinates");
    nodes[id] = RawNode{coords.at(0).get<double>(), coords.at(1).get<double>()};
  }
  return nodes;
}

std::map<int, RawNode> read_node_table(std::string_view text) {
  const auto first = trim(text.substr(0, std::min<std::size_t>(text.size(), 64)));
  if (!first.empty() && first.front() == '{') return read_geojson_nodes(text);

  std::map<int, RawNode> nodes;
  bool header_seen = false;
  for (const auto& line : split_lines(text)) {
    auto body = trim(line.text);
    if (body.empty()) continue;
    if (body.front() == '~') continue;
    auto tokens = tokenize(body);
    if (tokens.empty()) continue;
    const auto head = lower(tokens[0].text);
    if (!header_seen && (head == "node" || head == "nodes" || head == "id")) {
      if (tokens.size() < 3) parse_error("node table", line.number, 1, "header needs node, x, y columns");
      header_seen = true;
      continue;
    }
    if (tokens.size() < 3) {
      parse_error("node table", line.number, tokens.back().column, "expected 'node x y'");
    }
    const int id = to_int(tokens[0], "node table", line.number);
    const double x = to_double(tokens[1], "node table", line.number);
    const double y = to_double(tokens[2], "node table", line.number);
    if (!nodes.emplace(id, RawNode{x, y}).second) {
      parse_error("node table", line.number, tokens[0].column, fmt::format("duplicate node {}", id));
    }
  }
  if (nodes.empty()) fail(ErrorCode::kParseError, "node table: no nodes");
  return nodes;
}

struct RawLink {
  int from = 0;
  int to = 0;
  double length = 0.0;
  std::optional<double> value;
};

std::vector<RawLink> read_link_table(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t cursor = 0;
  std::map<std::string, std::string> metadata;
  bool has_metadata = false;
  bool metadata_closed = false;

  // Metadata block: "<TAG> value" lines up to "<END OF METADATA>".
  for (; cursor < lines.size(); ++cursor) {
    auto body = trim(lines[cursor].text);
    if (body.empty()) continue;
    if (body.front() != '<') break;
    has_metadata = true;
    const auto close = body.find('>');
    if (close == std::string_view::npos) {
      parse_error("link file", lines[cursor].number, static_cast<int>(body.size()),
                  "metadata tag is missing '>'");
    }
    std::string tag(body.substr(1, close - 1));
    std::string value(trim(body.substr(close + 1)));
    if (tag == "END OF METADATA") {
      metadata_closed = true;
      ++cursor;
      break;
    }
    if (tag.empty()) parse_error("link file", lines[cursor].number, 1, "empty metadata tag");
    metadata[tag] = value;
  }
  if (has_metadata && !metadata_closed) {
    fail(ErrorCode::kParseError, "link file: metadata block without <END OF METADATA>");
  }

  // Default TNTP column order.
  int col_from = 0, col_to = 1, col_length = 3, col_value = -1;
  bool header_seen = false;
  std::vector<RawLink> links;
  for (; cursor < lines.size(); ++cursor) {
    const auto& line = lines[cursor];
    auto body = trim(line.text);
    if (body.empty()) continue;
    if (body.front() == '~') {
      if (header_seen) continue;
      header_seen = true;
      auto names = tokenize(body.substr(1));
      col_from = col_to = col_length = -1;
      for (std::size_t c = 0; c < names.size(); ++c) {
        const auto name = lower(names[c].text);
        if (name == "init_node" || name == "from" || name == "a_node") col_from = static_cast<int>(c);
        else if (name == "term_node" || name == "to" || name == "b_node") col_to = static_cast<int>(c);
        else if (name == "length") col_length = static_cast<int>(c);
        else if (name == "value") col_value = static_cast<int>(c);
      }
      if (col_from < 0 || col_to < 0 || col_length < 0) {
        parse_error("link file", line.number, 1,
                    "header must name init_node, term_node and length columns");
      }
      continue;
    }
    if (body.front() == '<') {
      parse_error("link file", line.number, 1, "metadata tag after the data section started");
    }
    auto tokens = tokenize(body);
    const int needed = std::max({col_from, col_to, col_length, col_value}) + 1;
    if (static_cast<int>(tokens.size()) < needed) {
      parse_error("link file", line.number,
                  tokens.empty() ? 1 : tokens.back().column,
                  fmt::format("expected at least {} columns, found {}", needed, tokens.size()));
    }
    RawLink link;
    link.from = to_int(tokens[col_from], "link file", line.number);
    link.to = to_int(tokens[col_to], "link file", line.number);
    link.length = to_double(tokens[col_length], "link file", line.number);
    if (col_value >= 0) link.value = to_double(tokens[col_value], "link file", line.number);
    links.push_back(link);
  }

  if (auto it = metadata.find("NUMBER OF LINKS"); it != metadata.end()) {
    int declared = 0;
    auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), declared);
    if (ec != std::errc()) {
      fail(ErrorCode::kParseError,
           fmt::format("link file: <NUMBER OF LINKS> is not an integer: '{}'", it->second));
    }
    if (declared != static_cast<int>(links.size())) {
      fail(ErrorCode::kParseError,
           fmt::format("link file: <NUMBER OF LINKS> says {} but {} rows were read", declared,
                       links.size()));
    }
  }
  if (links.empty() && !has_metadata && !header_seen) {
    fail(ErrorCode::kParseError, "link file: no links and no header");
  }
  return links;
}

}  // namespace

RoadNetwork ingest_tntp(std::string_view node_text, std::string_view link_text,
                        const TntpOptions& options) {
  const auto raw_nodes = read_node_table(node_text);
  const auto raw_links = read_link_table(link_text);

  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  for (const auto& [id, n] : raw_nodes) {
    min_x = std::min(min_x, n.x);
    max_x = std::max(max_x, n.x);
    min_y = std::min(min_y, n.y);
    max_y = std::max(max_y, n.y);
  }
  double scale = std::max(max_x - min_x, max_y - min_y);
  if (!(scale > 0.0)) scale = 1.0;

  std::vector<RoadNode> nodes;
  nodes.reserve(raw_nodes.size());
  for (const auto& [id, n] : raw_nodes) {
    nodes.push_back({id, std::clamp((n.x - min_x) / scale, 0.0, 1.0),
                     std::clamp((n.y - min_y) / scale, 0.0, 1.0)});
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> value_dist(
      options.min_value, std::nextafter(options.max_value, std::numeric_limits<double>::max()));

  std::map<std::pair<int, int>, bool> seen;
  std::vector<LinkSpec> links;
  for (const auto& l : raw_links) {
    if (l.from == l.to) continue;
    for (int id : {l.from, l.to}) {
      if (!raw_nodes.count(id)) {
        fail(ErrorCode::kParseError, fmt::format("link file: node {} has no coordinates", id));
      }
    }
    const auto key = std::minmax(l.from, l.to);
    if (!seen.emplace(std::pair{key.first, key.second}, true).second) continue;
    double length = l.length / scale;
    if (!(length > 0.0)) {
      const auto& a = raw_nodes.at(l.from);
      const auto& b = raw_nodes.at(l.to);
      length = std::hypot(a.x - b.x, a.y - b.y) / scale;
    }
    if (!(length > 0.0)) length = 1e-9;
    const double value = l.value ? *l.value : value_dist(rng);
    links.push_back({l.from, l.to, length, value});
  }
  return build_road_network(std::move(nodes), std::move(links));
}

}  // namespace pdra
