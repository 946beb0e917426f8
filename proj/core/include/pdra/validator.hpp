#pragma once

#include <string>
#include <vector>

#include "pdra/env.hpp"
#include "pdra/instance.hpp"

namespace pdra {

struct Violation {
  // connectivity, exclusivity, time-window, budget, depot-return,
  // depot-capacity or termination.
  std::string rule;
  std::string detail;
};

struct ValidationReport {
  bool feasible = true;
  std::vector<Violation> violations;
  double value = 0.0;  // recomputed from the routes
};

/// Checks a solution against the routing rules without going through Env.
/// Throws UnknownNode when a route references an id outside the network.
ValidationReport validate_solution(const Instance& inst, const Solution& sol,
                                   const EnvOptions& options = {});

}  // namespace pdra
