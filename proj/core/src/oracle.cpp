#include <bit>
#include <cstdint>
#include <unordered_map>

#include <fmt/core.h>

#include "pdra/error.hpp"
#include "pdra/solvers.hpp"

namespace pdra {

namespace {

struct Key {
  int drone;
  int current;
  int origin;
  std::uint64_t clock;
  std::uint64_t collected;
  std::uint64_t loads;

  bool operator==(const Key&) const = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
      h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(static_cast<std::uint64_t>(k.drone));
    mix(static_cast<std::uint64_t>(k.current + 1));
    mix(static_cast<std::uint64_t>(k.origin + 1));
    mix(k.clock);
    mix(k.collected);
    mix(k.loads);
    return static_cast<std::size_t>(h);
  }
};

struct Best {
  double value = 0.0;
  double time = 0.0;  // flight time still to come
  int action = kNoNode;
};

class Search {
 public:
  explicit Search(const Env& env) : env_(env) {}

  Key key(const State& s) const {
    Key k{s.drone, s.current, s.origin, std::bit_cast<std::uint64_t>(s.clock), 0, 0};
    for (std::size_t a = 0; a < s.collected.size(); ++a) {
      if (s.collected[a]) k.collected |= std::uint64_t{1} << a;
    }
    for (int load : s.depot_load) k.loads = k.loads * 64 + static_cast<std::uint64_t>(load);
    return k;
  }

  Best solve(const State& s) {
    if (s.done) return {env_.reward(s), 0.0, kNoNode};
    const Key k = key(s);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
    std::vector<char> mask;
    env_.mask_into(s, mask);
    Best best;
    bool have = false;
    for (std::size_t a = 0; a < mask.size(); ++a) {
      if (!mask[a]) continue;
      const int action = static_cast<int>(a);
      const double dt =
          s.current == kNoNode ? 0.0 : *env_.instance().network.travel_time(s.current, action);
      const Best child = solve(env_.step(s, action));
      const double time = child.time + dt;
      if (!have || child.value > best.value || (child.value == best.value && time < best.time)) {
        best = {child.value, time, action};
        have = true;
      }
    }
    memo_.emplace(k, best);
    return best;
  }

  int action(const State& s) const { return memo_.at(key(s)).action; }

 private:
  const Env& env_;
  std::unordered_map<Key, Best, KeyHash> memo_;
};

}  // namespace

Solution exact_oracle(const Instance& inst, const EnvOptions& options,
                      const OracleLimits& limits) {
  const auto& net = inst.network;
  if (net.artificial_count() > limits.max_artificial || net.original_count() > limits.max_original) {
    fail(ErrorCode::kInstanceTooLarge,
         fmt::format("oracle limited to {} artificial and {} original nodes, got {} and {}",
                     limits.max_artificial, limits.max_original, net.artificial_count(),
                     net.original_count()));
  }
  const Env env(inst, options);
  Search search(env);
  State s = env.reset();
  search.solve(s);
  while (!s.done) env.apply(s, search.action(s));
  return env.solution(s);
}

}  // namespace pdra
