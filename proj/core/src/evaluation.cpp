#include "pdra/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

#include "pdra/checkpoint.hpp"
#include "pdra/error.hpp"

namespace pdra {

using nlohmann::json;

double gap(double y, double y_other) {
  if (!(y > 0.0)) fail(ErrorCode::kInvalidConfig, fmt::format("gap needs y > 0, got {}", y));
  return (y - y_other) / y;
}

double round_half_even(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = x * scale;
  const double lower = std::floor(scaled);
  const double frac = scaled - lower;
  // Binary noise around .5 counts as a tie.
  double r;
  if (std::abs(frac - 0.5) < 1e-9) {
    r = std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
  } else {
    r = std::round(scaled);
  }
  return r / scale;
}

std::string format_percent(double fraction) {
  double p = round_half_even(fraction * 100.0, 2);
  if (p == 0.0) p = 0.0;  // no "-0.00%"
  return fmt::format("{:.2f}%", p);
}

Method parse_method(std::string_view spec) {
  Method m;
  std::string s(spec);
  std::string name;
  if (auto colon = s.find(':'); colon != std::string::npos) {
    name = s.substr(0, colon);
    s = s.substr(colon + 1);
  }
  std::string kind = s, arg;
  if (auto eq = s.find('='); eq != std::string::npos) {
    kind = s.substr(0, eq);
    arg = s.substr(eq + 1);
  }
  if (kind == "greedy") {
    m.kind = MethodKind::kGreedy;
  } else if (kind == "random") {
    m.kind = MethodKind::kRandom;
  } else if (kind == "oracle") {
    m.kind = MethodKind::kOracle;
  } else if (kind == "neural") {
    if (arg.empty()) fail(ErrorCode::kUsageError, "neural method needs neural=<checkpoint>");
    m.kind = MethodKind::kNeural;
    m.params = std::make_shared<const PolicyParams>(load_checkpoint(arg));
  } else {
    fail(ErrorCode::kUsageError, fmt::format("unknown method '{}'", std::string(spec)));
  }
  if (m.kind != MethodKind::kNeural && !arg.empty()) {
    fail(ErrorCode::kUsageError, fmt::format("method '{}' takes no argument", kind));
  }
  m.name = name.empty() ? kind : name;
  return m;
}

namespace {

double run_method(const Method& m, const Instance& inst, std::uint64_t seed,
                  const OracleLimits& limits) {
  switch (m.kind) {
    case MethodKind::kGreedy:
      return greedy_heuristic(inst).value;
    case MethodKind::kRandom: {
      Rng rng(seed);
      return random_policy_rollout(inst, rng).value;
    }
    case MethodKind::kOracle:
      return exact_oracle(inst, {}, limits).value;
    case MethodKind::kNeural: {
      if (!m.params) fail(ErrorCode::kUsageError, "neural method without parameters");
      Rng rng(seed);
      return rollout(inst, *m.params, DecodeMode::kGreedy, 1, rng).front().solution.value;
    }
  }
  return 0.0;
}

}  // namespace

EvalResult evaluate(const std::vector<Instance>& instances, const std::vector<Method>& methods,
                    const EvalOptions& options) {
  if (instances.empty()) fail(ErrorCode::kInvalidConfig, "evaluation needs at least one instance");
  if (methods.empty()) fail(ErrorCode::kInvalidConfig, "evaluation needs at least one method");
  std::size_t ref = 0;
  if (!options.reference.empty()) {
    ref = methods.size();
    for (std::size_t i = 0; i < methods.size(); ++i) {
      if (methods[i].name == options.reference) ref = i;
    }
    if (ref == methods.size()) {
      fail(ErrorCode::kUsageError, fmt::format("reference method '{}' is not evaluated", options.reference));
    }
  }
  // Variants in first-seen order.
  std::vector<std::string> variants;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto v = instances[i].attrs.variant_name();
    if (!members.count(v)) variants.push_back(v);
    members[v].push_back(i);
  }

  EvalResult result;
  using clock = std::chrono::steady_clock;
  for (const auto& variant : variants) {
    const auto& idx = members[variant];
    std::vector<double> means(methods.size()), times(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
      double total = 0.0, elapsed = 0.0;
      for (std::size_t i : idx) {
        const auto t0 = clock::now();
        const double v = run_method(methods[m], instances[i], options.seed + i, options.oracle_limits);
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        elapsed += dt;
        total += v;
        result.instances.push_back({variant, methods[m].name, static_cast<int>(i), v, dt});
      }
      means[m] = total / static_cast<double>(idx.size());
      times[m] = methods[m].kind == MethodKind::kNeural ? elapsed
                                                         : elapsed / static_cast<double>(idx.size());
    }
    // Reference row first, then the others in input order.
    std::vector<std::size_t> order{ref};
    for (std::size_t m = 0; m < methods.size(); ++m) {
      if (m != ref) order.push_back(m);
    }
    for (std::size_t m : order) {
      GapRecord r;
      r.variant = variant;
      r.method = methods[m].name;
      r.value = means[m];
      r.reference_value = means[ref];
      if (means[ref] > 0.0) r.gap = m == ref ? 0.0 : gap(means[ref], means[m]);
      r.time_s = times[m];
      result.records.push_back(std::move(r));
    }
  }
  return result;
}

std::string gap_table_csv(const std::vector<GapRecord>& records) {
  std::string out = "variant,method,value,gap,time_s\n";
  for (const auto& r : records) {
    out += fmt::format("{},{},{},{},{}\n", r.variant, r.method, r.value,
                       r.gap ? fmt::format("{}", *r.gap) : std::string(), r.time_s);
  }
  return out;
}

namespace {

double parse_number(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorCode::kParseError, fmt::format("gap table line {}: bad number '{}'", line, s));
  }
}

// The first row of each variant is the reference method.
void fill_reference(std::vector<GapRecord>& records) {
  std::map<std::string, double> ref;
  for (auto& r : records) {
    auto [it, inserted] = ref.emplace(r.variant, r.value);
    r.reference_value = it->second;
  }
}

}  // namespace

std::vector<GapRecord> gap_table_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "variant,method,value,gap,time_s") {
    fail(ErrorCode::kParseError, "gap table: missing header");
  }
  std::vector<GapRecord> out;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 5) fail(ErrorCode::kParseError, fmt::format("gap table line {}: {} fields", number, f.size()));
    GapRecord r;
    r.variant = f[0];
    r.method = f[1];
    r.value = parse_number(f[2], number);
    if (!f[3].empty()) r.gap = parse_number(f[3], number);
    r.time_s = parse_number(f[4], number);
    out.push_back(std::move(r));
  }
  fill_reference(out);
  return out;
}

std::string gap_table_json(const std::vector<GapRecord>& records) {
  json rows = json::array();
  for (const auto& r : records) {
    rows.push_back({{"variant", r.variant},
                    {"method", r.method},
                    {"value", r.value},
                    {"reference_value", r.reference_value},
                    {"gap", r.gap ? json(*r.gap) : json(nullptr)},
                    {"time_s", r.time_s}});
  }
  return json{{"format", "pdra-gap-table"}, {"records", std::move(rows)}}.dump(1) + "\n";
}

std::vector<GapRecord> gap_table_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    std::vector<GapRecord> out;
    for (const auto& j : doc.at("records")) {
      GapRecord r;
      r.variant = j.at("variant").get<std::string>();
      r.method = j.at("method").get<std::string>();
      r.value = j.at("value").get<double>();
      r.reference_value = j.at("reference_value").get<double>();
      if (!j.at("gap").is_null()) r.gap = j.at("gap").get<double>();
      r.time_s = j.at("time_s").get<double>();
      out.push_back(std::move(r));
    }
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::kParseError, fmt::format("gap table JSON: {}", e.what()));
  }
}

std::string plot_csv(const std::vector<InstanceRecord>& rows) {
  std::string out = "variant,method,instance,value,time_s\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", r.variant, r.method, r.instance, r.value, r.time_s);
  }
  return out;
}

std::string gap_table_text(const std::vector<GapRecord>& records) {
  std::string out = fmt::format("{:<10} {:<12} {:>10} {:>9} {:>10}\n", "variant", "method", "value",
                                "gap", "time_s");
  for (const auto& r : records) {
    out += fmt::format("{:<10} {:<12} {:>10.4f} {:>9} {:>10.4f}\n", r.variant, r.method, r.value,
                       r.gap ? format_percent(*r.gap) : std::string("n/a"), r.time_s);
  }
  return out;
}

}  // namespace pdra
