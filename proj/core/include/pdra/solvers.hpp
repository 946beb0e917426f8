#pragma once

#include <cstddef>

#include "pdra/env.hpp"
#include "pdra/instance.hpp"

namespace pdra {

/// Value-density construction: the feasible artificial node with the largest
/// c_p / t, else the nearest original node from which an uncollected
/// artificial node becomes reachable, else the origin depot (closed routes)
/// or the nearest original node (open routes). Ties go to the lowest id.
Solution greedy_heuristic(const Instance& inst, const EnvOptions& options = {});

/// Uniform choice among feasible actions until the episode ends.
Solution random_policy_rollout(const Instance& inst, Rng& rng, const EnvOptions& options = {});

struct OracleLimits {
  std::size_t max_artificial = 6;
  std::size_t max_original = 10;
};

/// Exhaustive search over the env's action space. Among optimal solutions the
/// shortest total flight time wins, then the lexicographically smallest
/// action sequence. Throws InstanceTooLarge beyond `limits`.
Solution exact_oracle(const Instance& inst, const EnvOptions& options = {},
                      const OracleLimits& limits = {});

}  // namespace pdra
