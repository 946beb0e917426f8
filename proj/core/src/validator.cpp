#include "pdra/validator.hpp"

#include <optional>

#include <fmt/core.h>

#include "pdra/error.hpp"

namespace pdra {

namespace {

class Checker {
 public:
  Checker(const Instance& inst, const EnvOptions& options)
      : inst_(inst), net_(inst.network), options_(options), budget_(inst.budget()) {}

  // Rule broken by moving cur -> v at `clock`, or nullopt when the move is legal.
  std::optional<Violation> move(int cur, int v, double clock, int start,
                                const std::vector<char>& taken) const {
    const auto t = net_.travel_time(cur, v);
    if (!t) return Violation{"connectivity", fmt::format("no arc {} -> {}", cur, v)};
    if (v != start && inst_.depots.size() > 1 && inst_.depot_index(v) >= 0) {
      return Violation{"depot-return", fmt::format("drone from {} enters foreign depot {}", start, v)};
    }
    const bool art = net_.is_artificial(v);
    if (art && taken[v - net_.original_count()]) {
      return Violation{"exclusivity", fmt::format("node {} assessed twice", v)};
    }
    if (inst_.attrs.time_windows) {
      const double at = clock + (art && options_.tw_on_completion ? 2.0 * *t : *t);
      if (at > inst_.latest[v] + kTimeTolerance) {
        return Violation{"time-window",
                         fmt::format("node {} reached at {} after its window {}", v, at,
                                     inst_.latest[v])};
      }
    }
    double need = clock + (art ? 2.0 * *t : *t);
    if (!inst_.attrs.open_route) {
      const int exit = art ? net_.far_endpoint(v, cur) : v;
      if (exit != start && inst_.depots.size() > 1 && inst_.depot_index(exit) >= 0) {
        return Violation{"depot-return", fmt::format("node {} exits through foreign depot {}", v, exit)};
      }
      if (exit != start) need += net_.direct_time(exit, start);
    }
    if (need > budget_ + kTimeTolerance) {
      return Violation{"budget", fmt::format("move {} -> {} needs {} of budget {}", cur, v, need,
                                             budget_)};
    }
    return std::nullopt;
  }

  bool can_move(int cur, double clock, int start, const std::vector<char>& taken) const {
    for (std::size_t v = 0; v < net_.size(); ++v) {
      if (net_.travel_time(cur, static_cast<int>(v)) &&
          !move(cur, static_cast<int>(v), clock, start, taken)) {
        return true;
      }
    }
    return false;
  }

 private:
  const Instance& inst_;
  const TransformedNetwork& net_;
  EnvOptions options_;
  double budget_;
};

}  // namespace

ValidationReport validate_solution(const Instance& inst, const Solution& sol,
                                   const EnvOptions& options) {
  const auto& net = inst.network;
  for (const auto& route : sol.routes) {
    for (int v : route) {
      if (!net.contains(v)) {
        fail(ErrorCode::kUnknownNode, fmt::format("route references unknown node {}", v));
      }
    }
  }

  ValidationReport report;
  auto flag = [&](std::string rule, std::string detail) {
    report.violations.push_back({std::move(rule), std::move(detail)});
  };
  const Checker check(inst, options);
  const std::size_t total_p = net.artificial_count();
  std::vector<char> taken(total_p, 0);
  std::size_t taken_count = 0;
  std::vector<int> load(inst.depots.size(), 0);

  auto capacity_left = [&] {
    for (std::size_t d = 0; d < inst.depots.size(); ++d) {
      if (load[d] < inst.depot_capacity[d]) return true;
    }
    return false;
  };

  if (sol.routes.size() != static_cast<std::size_t>(inst.drones)) {
    flag("termination", fmt::format("{} routes for {} drones", sol.routes.size(), inst.drones));
  }

  bool over = total_p == 0;
  for (std::size_t k = 0; k < sol.routes.size(); ++k) {
    const auto& route = sol.routes[k];
    if (!over && !capacity_left()) over = true;
    if (route.empty()) {
      if (!over) flag("termination", fmt::format("drone {} idle while nodes remain", k));
      continue;
    }
    if (over) {
      flag("termination", fmt::format("drone {} flies after the mission ended", k));
      continue;
    }
    const int start = route.front();
    const int d = inst.depot_index(start);
    if (d < 0) {
      flag("depot-return", fmt::format("drone {} starts at non-depot node {}", k, start));
      continue;
    }
    if (++load[d] > inst.depot_capacity[d]) {
      flag("depot-capacity", fmt::format("depot {} launches {} drones, capacity {}", start,
                                         load[d], inst.depot_capacity[d]));
    }

    double clock = 0.0;
    int cur = start;
    bool broken = false;
    bool returned = false;
    for (std::size_t i = 1; i < route.size(); ++i) {
      const int v = route[i];
      if (returned) {
        flag("termination", fmt::format("drone {} continues after returning to {}", k, start));
        broken = true;
        break;
      }
      if (inst.attrs.open_route && taken_count == total_p) {
        flag("termination", fmt::format("drone {} continues after the last assessment", k));
        broken = true;
        break;
      }
      if (auto bad = check.move(cur, v, clock, start, taken)) {
        report.violations.push_back(*bad);
        broken = true;
        break;
      }
      clock += *net.travel_time(cur, v);
      cur = v;
      if (net.is_artificial(v)) {
        taken[v - net.original_count()] = 1;
        ++taken_count;
      }
      if (!inst.attrs.open_route && v == start) returned = true;
    }
    if (broken) continue;

    if (clock > inst.budget() + kTimeTolerance) {
      flag("budget", fmt::format("drone {} flies {} of budget {}", k, clock, inst.budget()));
    }
    if (inst.attrs.open_route) {
      if (taken_count < total_p && check.can_move(cur, clock, start, taken)) {
        flag("termination", fmt::format("drone {} stops at {} with feasible moves left", k, cur));
      }
    } else if (route.size() == 1) {
      if (check.can_move(cur, 0.0, start, taken)) {
        flag("termination", fmt::format("drone {} never leaves depot {}", k, start));
      }
    } else if (!returned) {
      flag("depot-return", fmt::format("drone {} ends at {} instead of depot {}", k, cur, start));
    }
    if (taken_count == total_p) over = true;
  }

  report.feasible = report.violations.empty();
  std::vector<char> seen(total_p, 0);
  for (const auto& route : sol.routes) {
    for (int v : route) {
      if (net.is_artificial(v)) seen[v - net.original_count()] = 1;
    }
  }
  report.value = 0.0;
  for (std::size_t a = 0; a < total_p; ++a) {
    if (seen[a]) report.value += net.value(static_cast<int>(net.original_count() + a));
  }
  return report;
}

}  // namespace pdra
