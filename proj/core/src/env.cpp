#include "pdra/env.hpp"

#include <algorithm>

#include <fmt/core.h>

#include "pdra/error.hpp"

namespace pdra {

namespace {

// Hard stop against zero-time loops between coincident original nodes.
constexpr int kStepLimit = 1'000'000;

}  // namespace

double solution_value(const Instance& inst, const Solution& sol) {
  const auto& net = inst.network;
  std::vector<char> seen(net.artificial_count(), 0);
  for (const auto& route : sol.routes) {
    for (int v : route) {
      if (net.contains(v) && net.is_artificial(v)) seen[v - net.original_count()] = 1;
    }
  }
  double total = 0.0;
  for (std::size_t a = 0; a < seen.size(); ++a) {
    if (seen[a]) total += net.value(static_cast<int>(net.original_count() + a));
  }
  return total;
}

Env::Env(const Instance& inst, EnvOptions options) : inst_(&inst), options_(options) {
  validate_instance(inst);
  const auto n = inst.network.original_count();
  depot_time_.resize(inst.depots.size() * n);
  for (std::size_t d = 0; d < inst.depots.size(); ++d) {
    for (std::size_t i = 0; i < n; ++i) {
      depot_time_[d * n + i] =
          inst.depots[d] == static_cast<int>(i)
              ? 0.0
              : inst.network.direct_time(static_cast<int>(i), inst.depots[d]);
    }
  }
}

State Env::reset() const {
  State s;
  s.collected.assign(inst_->network.artificial_count(), 0);
  s.depot_load.assign(inst_->depots.size(), 0);
  settle(s);
  return s;
}

bool Env::allowed(const State& s, int i) const {
  const auto& net = inst_->network;
  if (s.current == kNoNode) {
    const int d = inst_->depot_index(i);
    return d >= 0 && s.depot_load[d] < inst_->depot_capacity[d];
  }
  const auto t = net.travel_time(s.current, i);
  if (!t) return false;
  // A drone only ever enters its own depot (multi-depot launch sites).
  if (i != s.origin && inst_->depots.size() > 1 && inst_->is_depot(i)) return false;
  const bool artificial = net.is_artificial(i);
  if (artificial && s.collected[i - net.original_count()]) return false;
  if (inst_->attrs.time_windows) {
    const double arrival = s.clock + (artificial && options_.tw_on_completion ? 2.0 * *t : *t);
    if (arrival > inst_->latest[i] + kTimeTolerance) return false;
  }
  const double budget = inst_->budget() + kTimeTolerance;
  const double reach = s.clock + (artificial ? 2.0 * *t : *t);
  if (inst_->attrs.open_route) return reach <= budget;
  const auto n = net.original_count();
  const auto base = static_cast<std::size_t>(inst_->depot_index(s.origin)) * n;
  const int exit = artificial ? net.far_endpoint(i, s.current) : i;
  if (exit != s.origin && inst_->depots.size() > 1 && inst_->is_depot(exit)) return false;
  return reach + depot_time_[base + exit] <= budget;
}

int Env::mask_into(const State& s, std::vector<char>& out) const {
  if (s.done) fail(ErrorCode::kTerminalState, "feasible_mask on a terminal state");
  const auto& net = inst_->network;
  out.assign(net.size(), 0);
  int count = 0;
  auto consider = [&](int i) {
    if (allowed(s, i)) {
      out[i] = 1;
      ++count;
    }
  };
  if (s.current == kNoNode) {
    for (int d : inst_->depots) consider(d);
  } else if (net.is_artificial(s.current)) {
    const auto& p = net.artificial(s.current);
    consider(p.a);
    consider(p.b);
  } else {
    for (std::size_t i = 0; i < net.original_count(); ++i) consider(static_cast<int>(i));
    for (int p : net.incident(s.current)) consider(p);
  }
  return count;
}

std::vector<char> Env::feasible_mask(const State& s) const {
  std::vector<char> out;
  mask_into(s, out);
  return out;
}

void Env::launch(State& s, int depot) const {
  const int d = inst_->depot_index(depot);
  ++s.depot_load[d];
  s.current = depot;
  s.origin = depot;
  s.clock = 0.0;
  s.routes.push_back({depot});
}

void Env::end_route(State& s) const {
  s.route_times.push_back(s.clock);
  ++s.drone;
  s.clock = 0.0;
  s.current = kNoNode;
  s.origin = kNoNode;
}

void Env::settle(State& s) const {
  std::vector<char> scratch;
  while (!s.done) {
    if (s.drone >= inst_->drones) {
      s.done = true;
      break;
    }
    if (s.current == kNoNode) {
      // Between routes: nothing left to collect ends the episode.
      if (all_collected(s)) {
        s.done = true;
        break;
      }
      if (inst_->depots.size() == 1) {
        if (s.depot_load[0] >= inst_->depot_capacity[0]) {
          s.done = true;
          break;
        }
        launch(s, inst_->depots[0]);
      } else {
        if (mask_into(s, scratch) == 0) {
          s.done = true;
          break;
        }
        return;
      }
    }
    if (mask_into(s, scratch) > 0) return;
    end_route(s);
  }
  // Undeployed drones keep empty routes.
  while (s.routes.size() < static_cast<std::size_t>(inst_->drones)) {
    s.routes.emplace_back();
    s.route_times.push_back(0.0);
  }
}

void Env::apply(State& s, int action) const {
  if (s.done) fail(ErrorCode::kTerminalState, "step on a terminal state");
  const auto& net = inst_->network;
  if (!net.contains(action) || !allowed(s, action)) {
    fail(ErrorCode::kInfeasibleAction,
         fmt::format("action {} is masked (drone {}, node {}, clock {})", action, s.drone,
                     s.current, s.clock));
  }
  if (++s.steps > kStepLimit) fail(ErrorCode::kInvalidConfig, "episode exceeded the step limit");
  if (s.current == kNoNode) {
    launch(s, action);
    settle(s);
    return;
  }
  s.clock += *net.travel_time(s.current, action);
  s.current = action;
  s.routes.back().push_back(action);
  if (net.is_artificial(action)) {
    s.collected[action - net.original_count()] = 1;
    ++s.collected_count;
  }
  if (!inst_->attrs.open_route && action == s.origin) {
    end_route(s);
    if (all_collected(s)) s.done = true;
  } else if (inst_->attrs.open_route && all_collected(s)) {
    end_route(s);
    s.done = true;
  }
  settle(s);
}

State Env::step(State s, int action) const {
  apply(s, action);
  return s;
}

double Env::reward(const State& s) const {
  const auto& net = inst_->network;
  double total = 0.0;
  for (std::size_t a = 0; a < s.collected.size(); ++a) {
    if (s.collected[a]) total += net.value(static_cast<int>(net.original_count() + a));
  }
  return total;
}

Solution Env::solution(const State& s) const {
  Solution sol;
  sol.routes = s.routes;
  sol.route_times = s.route_times;
  sol.routes.resize(static_cast<std::size_t>(inst_->drones));
  sol.route_times.resize(static_cast<std::size_t>(inst_->drones), 0.0);
  sol.value = reward(s);
  return sol;
}

State replay(const Env& env, const Solution& sol) {
  const auto& inst = env.instance();
  auto bad = [](const std::string& msg) { fail(ErrorCode::kInfeasibleAction, msg); };
  if (sol.routes.size() != static_cast<std::size_t>(inst.drones)) {
    bad(fmt::format("{} routes for {} drones", sol.routes.size(), inst.drones));
  }
  State s = env.reset();
  for (int k = 0; k < inst.drones; ++k) {
    const auto& route = sol.routes[k];
    if (route.empty()) {
      if (!s.done && s.drone <= k) bad(fmt::format("drone {} is idle but the episode continues", k));
      continue;
    }
    const bool stayed = route.size() == 1 &&
                        std::find(inst.depots.begin(), inst.depots.end(), route[0]) != inst.depots.end();
    if (stayed && (s.done || s.drone > k)) continue;  // no move was affordable
    if (s.done || s.drone != k) bad(fmt::format("drone {} has a route after the episode ended", k));
    if (s.awaiting_depot()) {
      env.apply(s, route[0]);
    } else if (s.current != route[0]) {
      bad(fmt::format("drone {} starts at {} instead of depot {}", k, route[0], s.current));
    }
    for (std::size_t i = 1; i < route.size(); ++i) {
      if (s.done || s.drone != k) {
        bad(fmt::format("drone {} route continues after its termination at position {}", k, i));
      }
      env.apply(s, route[i]);
    }
    if (!s.done && s.drone == k) bad(fmt::format("drone {} route stops before termination", k));
  }
  if (!s.done) bad("routes exhausted before the episode ended");
  return s;
}

}  // namespace pdra
