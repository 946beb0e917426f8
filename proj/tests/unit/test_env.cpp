#include <doctest.h>

#include <algorithm>
#include <set>

#include "pdra/env.hpp"
#include "pdra/error.hpp"
#include "pdra/solvers.hpp"
#include "pdra/validator.hpp"
#include "testkit.hpp"

using namespace pdra;

namespace {

// Unit square 0..3 with links 0-1, 1-2, 2-3, 3-0 (artificial ids 4..7).
Instance square_instance(AttributeConfig attrs = {}, double p_max = 2.0, int drones = 1) {
  const auto net = build_road_network(
      {{0, 0.0, 0.0}, {1, 1.0, 0.0}, {2, 1.0, 1.0}, {3, 0.0, 1.0}},
      {{0, 1, 1.0, 0.2}, {1, 2, 1.0, 0.4}, {2, 3, 1.0, 0.6}, {3, 0, 1.0, 0.8}});
  Instance inst;
  inst.network = transform(net);
  inst.p_max = p_max;
  inst.battery = 8.0;
  inst.drones = drones;
  inst.attrs = attrs;
  inst.latest.assign(inst.network.size(), kUnbounded);
  inst.depots = {0};
  inst.depot_capacity = {drones};
  return inst;
}

std::set<int> allowed(const Env& env, const State& s) {
  std::set<int> out;
  const auto mask = env.feasible_mask(s);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) out.insert(static_cast<int>(i));
  }
  return out;
}

bool has_rule(const ValidationReport& r, const std::string& rule) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}

}  // namespace

TEST_CASE("closed-route masking prices the return trip") {
  const auto inst = square_instance();
  const Env env(inst);
  State s = env.reset();
  CHECK(s.current == 0);
  CHECK(s.origin == 0);
  CHECK(allowed(env, s) == std::set<int>{1, 3, 4, 7});

  env.apply(s, 4);
  CHECK(s.clock == 0.5);
  CHECK(allowed(env, s) == std::set<int>{0, 1});
  env.apply(s, 1);
  CHECK(allowed(env, s) == std::set<int>{0});
  env.apply(s, 0);
  CHECK(s.done);
  CHECK(env.reward(s) == 0.2);
  const auto sol = env.solution(s);
  CHECK(sol.routes == std::vector<std::vector<int>>{{0, 4, 1, 0}});
  CHECK(sol.route_times[0] == 2.0);
  CHECK_THROWS_AS(env.feasible_mask(s), Error);
  CHECK_THROWS_AS(env.step(s, 1), Error);
}

TEST_CASE("infeasible actions are rejected") {
  const auto inst = square_instance();
  const Env env(inst);
  const State s = env.reset();
  try {
    env.step(s, 2);
    FAIL("expected InfeasibleAction");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleAction);
  }
  CHECK_THROWS_AS(env.step(s, 5), Error);   // not adjacent to the depot
  CHECK_THROWS_AS(env.step(s, 99), Error);  // unknown id
}

TEST_CASE("open routes ignore the return leg") {
  const auto inst = square_instance({true, false, false});
  const Env env(inst);
  State s = env.reset();
  CHECK(allowed(env, s) == std::set<int>{1, 2, 3, 4, 7});
  env.apply(s, 4);
  env.apply(s, 1);
  // At clock 1.0 the link 1-2 (1.0 round trip) still fits the 2.0 budget.
  CHECK(allowed(env, s).count(5) == 1);
  env.apply(s, 5);
  CHECK(allowed(env, s) == std::set<int>{1, 2});
  env.apply(s, 2);
  CHECK(s.done);
  CHECK(env.reward(s) == doctest::Approx(0.6));
}

TEST_CASE("open route ends once everything is collected") {
  auto inst = square_instance({true, false, false}, 10.0, 2);
  const Env env(inst);
  State s = env.reset();
  for (int a : {4, 1, 5, 2, 6, 3, 7}) env.apply(s, a);
  CHECK(s.done);
  CHECK(env.solution(s).routes[1].empty());
  CHECK(env.reward(s) == doctest::Approx(2.0));
}

TEST_CASE("time windows") {
  auto inst = square_instance({false, true, false});
  inst.latest[4] = 0.4;
  inst.latest[7] = 0.8;
  SUBCASE("arrival rule") {
    const Env env(inst);
    CHECK(allowed(env, env.reset()) == std::set<int>{1, 3, 7});
  }
  SUBCASE("completion rule") {
    const Env env(inst, EnvOptions{true});
    CHECK(allowed(env, env.reset()) == std::set<int>{1, 3});
  }
}

TEST_CASE("multi-depot launch and foreign depots") {
  auto inst = square_instance({false, false, true}, 4.0, 2);
  inst.depots = {0, 2};
  inst.depot_capacity = {1, 1};
  const Env env(inst);
  State s = env.reset();
  CHECK(s.awaiting_depot());
  CHECK(allowed(env, s) == std::set<int>{0, 2});
  env.apply(s, 0);
  CHECK(s.origin == 0);
  // Depot 2 is in budget but belongs to another launch site.
  CHECK(allowed(env, s).count(2) == 0);
  env.apply(s, 1);
  // Link 1-2 would leave through the foreign depot.
  CHECK(allowed(env, s).count(5) == 0);
  env.apply(s, 0);
  CHECK(s.awaiting_depot());
  CHECK(allowed(env, s) == std::set<int>{2});  // depot 0 is at capacity
  env.apply(s, 2);
  CHECK(s.origin == 2);
  CHECK(s.depot_load == std::vector<int>{1, 1});
}

TEST_CASE("undeployed drones get empty routes") {
  auto inst = square_instance({}, 10.0, 3);
  const Env env(inst);
  State s = env.reset();
  for (int a : {4, 1, 5, 2, 6, 3, 7, 0}) env.apply(s, a);
  CHECK(s.done);
  const auto sol = env.solution(s);
  CHECK(sol.routes.size() == 3);
  CHECK(sol.routes[1].empty());
  CHECK(sol.routes[2].empty());
  CHECK(validate_solution(inst, sol).feasible);
  CHECK_NOTHROW(replay(env, sol));
}

TEST_CASE("validator catches rule breaks") {
  const auto inst = square_instance();
  Solution good;
  good.routes = {{0, 4, 1, 0}};
  good.route_times = {2.0};
  good.value = 0.2;
  const auto ok = validate_solution(inst, good);
  CHECK(ok.feasible);
  CHECK(ok.value == 0.2);

  Solution hop = good;
  hop.routes = {{0, 5, 1, 0}};
  CHECK(has_rule(validate_solution(inst, hop), "connectivity"));

  Solution far = good;
  far.routes = {{0, 2, 0}};
  CHECK(has_rule(validate_solution(inst, far), "budget"));

  auto two = square_instance({}, 2.0, 2);
  Solution twice;
  twice.routes = {{0, 4, 1, 0}, {0, 4, 0}};
  twice.route_times = {2.0, 1.0};
  CHECK(has_rule(validate_solution(two, twice), "exclusivity"));

  Solution open_end = good;
  open_end.routes = {{0, 4, 1}};
  CHECK_FALSE(validate_solution(inst, open_end).feasible);

  Solution unknown = good;
  unknown.routes = {{0, 42, 0}};
  CHECK_THROWS_AS(validate_solution(inst, unknown), Error);

  auto tw = square_instance({false, true, false});
  tw.latest[4] = 0.4;
  CHECK(has_rule(validate_solution(tw, good), "time-window"));
}

TEST_CASE("random rollouts are validator-feasible and replay") {
  Rng rng(17);
  const auto gen = GenConfig::for_total_nodes(20);
  for (int trial = 0; trial < 400; ++trial) {
    InstanceConfig ic;
    ic.attrs = AttributeConfig::from_regime(trial % 8);
    ic.depot_count = ic.attrs->multi_depot ? 2 : 1;
    const auto inst = generate_instance(gen, ic, rng);
    const EnvOptions opt{trial % 3 == 0};
    const auto sol = random_policy_rollout(inst, rng, opt);
    const auto report = validate_solution(inst, sol, opt);
    INFO("trial ", trial, " variant ", inst.attrs.variant_name());
    REQUIRE(report.feasible);
    CHECK(report.value == sol.value);
    CHECK(solution_value(inst, sol) == sol.value);
    const Env env(inst, opt);
    const auto state = replay(env, sol);
    CHECK(env.reward(state) == sol.value);
  }
}

TEST_CASE("replay rejects solutions the env would not produce") {
  const auto inst = square_instance();
  const Env env(inst);
  Solution early;
  early.routes = {{0, 4, 0}};
  early.route_times = {1.0};
  // Returning to the depot ends the only route; this is a complete episode.
  CHECK_NOTHROW(replay(env, early));
  Solution wrong_start;
  wrong_start.routes = {{1, 4, 0}};
  CHECK_THROWS_AS(replay(env, wrong_start), Error);
  Solution too_many;
  too_many.routes = {{0, 4, 0}, {}};
  CHECK_THROWS_AS(replay(env, too_many), Error);
}

TEST_CASE("drones with no affordable move stay at the depot") {
  const auto inst = square_instance({}, 0.4, 2);
  const Env env(inst);
  const State s = env.reset();
  CHECK(s.done);
  const auto sol = env.solution(s);
  CHECK(sol.value == 0.0);
  CHECK(validate_solution(inst, sol).feasible);
  CHECK_NOTHROW(replay(env, sol));
}
