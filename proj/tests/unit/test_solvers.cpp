#include <doctest.h>

#include "pdra/error.hpp"
#include "pdra/milp.hpp"
#include "pdra/solvers.hpp"
#include "pdra/validator.hpp"
#include "testkit.hpp"

using namespace pdra;

TEST_CASE("oracle matches the independent enumerator and dominates the baselines") {
  Rng rng(21);
  for (int trial = 0; trial < 96; ++trial) {
    testkit::TinyOptions opt;
    opt.attrs = AttributeConfig::from_regime(trial % 8);
    opt.originals = 3 + trial % 3;
    const auto inst = testkit::tiny_instance(rng, opt);
    INFO("trial ", trial, " variant ", inst.attrs.variant_name());
    const auto oracle = exact_oracle(inst);
    CHECK(validate_solution(inst, oracle).feasible);
    CHECK(oracle.value == testkit::enumerate_best(inst));
    const auto greedy = greedy_heuristic(inst);
    CHECK(validate_solution(inst, greedy).feasible);
    CHECK(oracle.value >= greedy.value);
    Rng r(trial);
    CHECK(oracle.value >= random_policy_rollout(inst, r).value);
  }
}

TEST_CASE("completion-based windows never help") {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    testkit::TinyOptions opt;
    opt.attrs.time_windows = true;
    opt.attrs.open_route = trial % 2 == 1;
    const auto inst = testkit::tiny_instance(rng, opt);
    const double arrival = exact_oracle(inst).value;
    const double completion = exact_oracle(inst, EnvOptions{true}).value;
    CHECK(completion <= arrival);
    CHECK(completion == testkit::enumerate_best(inst, EnvOptions{true}));
  }
}

TEST_CASE("open routes never lose value") {
  Rng rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    testkit::TinyOptions opt;
    opt.attrs.time_windows = trial % 2 == 1;
    auto closed = testkit::tiny_instance(rng, opt);
    auto open = closed;
    open.attrs.open_route = true;
    CHECK(exact_oracle(open).value >= exact_oracle(closed).value);
  }
}

TEST_CASE("oracle is deterministic and bounded") {
  Rng rng(2);
  const auto inst = testkit::tiny_instance(rng, {});
  const auto a = exact_oracle(inst);
  const auto b = exact_oracle(inst);
  CHECK(a.routes == b.routes);

  const auto big = generate_instance(GenConfig::for_total_nodes(40), {}, rng);
  try {
    exact_oracle(big);
    FAIL("expected InstanceTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInstanceTooLarge);
  }
}

TEST_CASE("greedy heuristic is deterministic and feasible on larger networks") {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    InstanceConfig ic;
    ic.depot_count = trial % 4 == 0 ? 2 : 1;
    const auto inst = generate_instance(GenConfig::for_total_nodes(50), ic, rng);
    const auto g = greedy_heuristic(inst);
    CHECK(validate_solution(inst, g).feasible);
    CHECK(greedy_heuristic(inst).routes == g.routes);
    CHECK(g.value > 0.0);
  }
}

TEST_CASE("MILP constraint families per variant") {
  Rng rng(3);
  for (const auto& attrs : all_variants()) {
    testkit::TinyOptions opt;
    opt.attrs = attrs;
    const auto inst = testkit::tiny_instance(rng, opt);
    const auto exported = export_milp(inst, attrs);
    INFO(attrs.variant_name());
    CHECK(testkit::lp_families(exported.lp) == testkit::expected_families(attrs));
    CHECK(to_lp(build_milp(inst, attrs)) == exported.lp);
    CHECK(exported.lp.find("Maximize") != std::string::npos);
    CHECK(exported.lp.rfind("End") != std::string::npos);
    for (const auto& v : exported.model.vars) {
      if (v.name.rfind("x_", 0) == 0) CHECK(v.type == VarType::kBinary);
      if (v.name.rfind("z_", 0) == 0) CHECK(attrs.multi_depot);
      if (v.name.rfind("a_", 0) == 0) CHECK(attrs.time_windows);
    }
  }
}

TEST_CASE("MILP rejects inconsistent requests") {
  Rng rng(5);
  const auto inst = testkit::tiny_instance(rng, {});
  CHECK_THROWS_AS(build_milp(inst, {false, false, true}), Error);
  CHECK_THROWS_AS(build_milp(inst, {false, true, false}), Error);
  const auto big = generate_instance(GenConfig::for_total_nodes(20), {}, rng);
  try {
    enumerate_milp(build_milp(big, big.attrs));
    FAIL("expected ModelTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kModelTooLarge);
  }
}

TEST_CASE("MILP optimum against the oracle on tiny instances") {
  Rng rng(5);
  for (int i = 0; i < 24; ++i) {
    const auto inst = testkit::milp_tiny_instance(rng, i);
    const auto model = build_milp(inst, inst.attrs);
    const auto milp = enumerate_milp(model);
    const auto oracle = exact_oracle(inst);
    INFO("instance ", i, " variant ", inst.attrs.variant_name());
    REQUIRE(milp.feasible);
    CHECK(milp.objective <= oracle.value + 1e-9);
    if (!testkit::repeats_original(inst, oracle)) CHECK(milp.objective == doctest::Approx(oracle.value).epsilon(1e-9));
  }
}
