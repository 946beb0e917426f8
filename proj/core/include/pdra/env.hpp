#pragma once

#include <cstdint>
#include <vector>

#include "pdra/instance.hpp"

namespace pdra {

struct EnvOptions {
  // Rule (c) on artificial nodes: false checks arrival d + t <= l_p, true
  // checks link completion d + 2t <= l_p.
  bool tw_on_completion = false;
};

struct Solution {
  std::vector<std::vector<int>> routes;  // one per drone; empty when undeployed
  std::vector<double> route_times;       // elapsed time per route
  double value = 0.0;
};

/// Sum of c_p over the distinct artificial nodes in the routes, in ascending id order.
double solution_value(const Instance& inst, const Solution& sol);

struct State {
  int drone = 0;            // active drone, 0-based; equals K once every drone is spent
  double clock = 0.0;       // d_t, time since the active drone launched
  int current = kNoNode;    // kNoNode while the active drone waits for a depot
  int origin = kNoNode;     // depot of the active drone
  std::vector<char> collected;  // per artificial node (index id - |N|)
  int collected_count = 0;
  std::vector<int> depot_load;  // drones launched per depot
  std::vector<std::vector<int>> routes;
  std::vector<double> route_times;
  int steps = 0;
  bool done = false;

  bool awaiting_depot() const { return !done && current == kNoNode; }
};

class Env {
 public:
  explicit Env(const Instance& inst, EnvOptions options = {});

  const Instance& instance() const { return *inst_; }
  const EnvOptions& options() const { return options_; }

  State reset() const;

  /// Per node id, 1 when selectable. Throws TerminalState on a finished state.
  std::vector<char> feasible_mask(const State& s) const;
  /// Same as feasible_mask, writing into `out` (resized to |N̄|); returns the count.
  int mask_into(const State& s, std::vector<char>& out) const;

  /// Throws InfeasibleAction when `action` is masked.
  State step(State s, int action) const;
  void apply(State& s, int action) const;

  bool is_terminal(const State& s) const { return s.done; }
  /// Terminal reward: collected value, summed in ascending node id order.
  double reward(const State& s) const;
  Solution solution(const State& s) const;

 private:
  bool allowed(const State& s, int i) const;
  void launch(State& s, int depot) const;
  void end_route(State& s) const;
  void settle(State& s) const;
  bool all_collected(const State& s) const {
    return static_cast<std::size_t>(s.collected_count) == inst_->network.artificial_count();
  }

  const Instance* inst_;
  EnvOptions options_;
  std::vector<double> depot_time_;  // straight-line time to each origin candidate, by [depot][node]
};

/// Feeds the routes of `sol` through the env. Throws InfeasibleAction when an
/// action is masked or route boundaries disagree with the env's terminations.
State replay(const Env& env, const Solution& sol);

}  // namespace pdra
