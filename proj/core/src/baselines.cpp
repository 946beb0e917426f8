#include <limits>

#include "pdra/solvers.hpp"

namespace pdra {

namespace {

int pick_depot(const Env& env, const State& s, const std::vector<char>& mask) {
  // Depot closest to any uncollected artificial node.
  const auto& net = env.instance().network;
  int best = kNoNode;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int d : env.instance().depots) {
    if (!mask[d]) continue;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < net.artificial_count(); ++a) {
      if (s.collected[a]) continue;
      const int p = static_cast<int>(net.original_count() + a);
      nearest = std::min(nearest, distance(net.position(d), net.position(p)));
    }
    if (best == kNoNode || nearest < best_dist) {
      best = d;
      best_dist = nearest;
    }
  }
  return best;
}

bool opens_assessment(const Env& env, const State& s, int v, std::vector<char>& scratch) {
  const auto& net = env.instance().network;
  bool any = false;
  for (int p : net.incident(v)) {
    if (!s.collected[p - net.original_count()]) any = true;
  }
  if (!any) return false;
  State next = env.step(s, v);
  if (next.done || next.drone != s.drone) return false;
  env.mask_into(next, scratch);
  for (int p : net.incident(v)) {
    if (scratch[p]) return true;
  }
  return false;
}

}  // namespace

Solution greedy_heuristic(const Instance& inst, const EnvOptions& options) {
  const Env env(inst, options);
  const auto& net = inst.network;
  State s = env.reset();
  std::vector<char> mask;
  std::vector<char> scratch;
  while (!s.done) {
    env.mask_into(s, mask);
    if (s.awaiting_depot()) {
      env.apply(s, pick_depot(env, s, mask));
      continue;
    }
    int choice = kNoNode;
    double best = -1.0;
    for (std::size_t i = net.original_count(); i < net.size(); ++i) {
      const int p = static_cast<int>(i);
      if (!mask[p]) continue;
      const double ratio = net.value(p) / *net.travel_time(s.current, p);
      if (ratio > best) {
        best = ratio;
        choice = p;
      }
    }
    if (choice == kNoNode) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < net.original_count(); ++i) {
        const int v = static_cast<int>(i);
        if (!mask[v] || v == s.origin) continue;
        const double t = *net.travel_time(s.current, v);
        if (t < nearest && opens_assessment(env, s, v, scratch)) {
          nearest = t;
          choice = v;
        }
      }
    }
    if (choice == kNoNode && !inst.attrs.open_route && mask[s.origin]) choice = s.origin;
    if (choice == kNoNode) {
      double nearest = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < net.original_count(); ++i) {
        const int v = static_cast<int>(i);
        if (!mask[v]) continue;
        const double t = *net.travel_time(s.current, v);
        if (t < nearest) {
          nearest = t;
          choice = v;
        }
      }
    }
    env.apply(s, choice);
  }
  return env.solution(s);
}

Solution random_policy_rollout(const Instance& inst, Rng& rng, const EnvOptions& options) {
  const Env env(inst, options);
  State s = env.reset();
  std::vector<char> mask;
  std::vector<int> choices;
  while (!s.done) {
    env.mask_into(s, mask);
    choices.clear();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) choices.push_back(static_cast<int>(i));
    }
    std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
    env.apply(s, choices[pick(rng)]);
  }
  return env.solution(s);
}

}  // namespace pdra
