#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <functional>
#include <numeric>

#include "pdra/error.hpp"
#include "pdra/training.hpp"
#include "testkit.hpp"

using namespace pdra;

namespace {

PolicyConfig small_policy() {
  PolicyConfig pc;
  pc.encoder.embed_dim = 8;
  pc.encoder.layers = 1;
  pc.encoder.heads = 2;
  pc.encoder.ffn_hidden = 16;
  pc.decoder_heads = 2;
  return pc;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.iterations = 2;
  cfg.batch_size = 2;
  cfg.group_size = 3;
  cfg.network_nodes = 8;
  cfg.heldout_size = 2;
  cfg.policy = small_policy();
  return cfg;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("reward normalization") {
  const RegimeKey key{};
  EmaState ema;
  const std::vector<std::vector<double>> first{{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
  const auto adv = normalize_rewards(first, key, ema, 0.9, 1e-5);
  const auto& e = ema.entries.at(key);
  CHECK(e.initialized);
  CHECK(e.mean == doctest::Approx(3.5));
  CHECK(e.variance == doctest::Approx(17.5 / 6.0));
  REQUIRE(adv.size() == 2);
  for (const auto& g : adv) {
    CHECK(std::accumulate(g.begin(), g.end(), 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  const double sigma = std::sqrt(17.5 / 6.0);
  CHECK(adv[0][2] - adv[0][0] == doctest::Approx(2.0 / (sigma + 1e-5)));

  const std::vector<std::vector<double>> second{{10.0, 10.0}};
  const auto flat = normalize_rewards(second, key, ema, 0.9, 1e-5);
  CHECK(ema.entries.at(key).mean == doctest::Approx(0.9 * 3.5 + 0.1 * 10.0));
  CHECK(ema.entries.at(key).variance == doctest::Approx(0.9 * 17.5 / 6.0));
  CHECK(flat[0][0] == 0.0);

  // Separate statistics per regime.
  const RegimeKey other{true, false, false};
  normalize_rewards(second, other, ema, 0.9, 1e-5);
  CHECK(ema.entries.at(other).mean == 10.0);
  CHECK(ema.entries.size() == 2);
}

TEST_CASE("adam first step and convergence") {
  auto params = init_policy(small_policy(), 3);
  const auto before = params;
  auto slots = params.all();
  std::vector<ad::Matrix> grads;
  for (auto* p : slots) grads.push_back(p->value);
  AdamState adam;
  adam_step(params, grads, adam, 1e-2, 0.0);
  CHECK(adam.step == 1);
  const auto old = before.all();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (Eigen::Index k = 0; k < slots[i]->value.size(); ++k) {
      const double g = old[i]->value(k);
      const double expected = g - 1e-2 * g / (std::abs(g) + adam.eps);
      CHECK(slots[i]->value(k) == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  // Minimise 0.5 * |w|^2.
  auto norm = [&] {
    double s = 0.0;
    for (auto* p : params.all()) s += p->value.squaredNorm();
    return s;
  };
  const double start = norm();
  for (int it = 0; it < 300; ++it) {
    grads.clear();
    for (auto* p : params.all()) grads.push_back(p->value);
    adam_step(params, grads, adam, 1e-2, 0.0);
  }
  CHECK(norm() < 0.05 * start);

  grads[0](0) = std::nan("");
  CHECK(code_of([&] { adam_step(params, grads, adam, 1e-2, 0.0); }) == ErrorCode::kNonFiniteGradient);
  grads.pop_back();
  CHECK(code_of([&] { adam_step(params, grads, adam, 1e-2, 0.0); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  CHECK(cfg.effective_milestones() == std::vector<int>{35, 39});
  cfg.epochs = 100;
  CHECK(cfg.effective_milestones() == std::vector<int>{88, 98});
  cfg.milestones = {5};
  CHECK(cfg.effective_milestones() == std::vector<int>{5});
  const std::vector<int> ms{35, 39};
  CHECK(scheduled_lr(1e-3, 0.1, ms, 0) == 1e-3);
  CHECK(scheduled_lr(1e-3, 0.1, ms, 34) == 1e-3);
  CHECK(scheduled_lr(1e-3, 0.1, ms, 35) == doctest::Approx(1e-4));
  CHECK(scheduled_lr(1e-3, 0.1, ms, 39) == doctest::Approx(1e-5));
}

TEST_CASE("config validation") {
  auto bad = [](auto edit) {
    TrainConfig cfg;
    edit(cfg);
    return code_of([&] { cfg.validate(); });
  };
  CHECK_NOTHROW(TrainConfig{}.validate());
  CHECK(bad([](TrainConfig& c) { c.group_size = 1; }) == ErrorCode::kInvalidConfig);
  CHECK(bad([](TrainConfig& c) { c.milestones = {40}; }) == ErrorCode::kInvalidConfig);
  CHECK(bad([](TrainConfig& c) { c.learning_rate = 0.0; }) == ErrorCode::kInvalidConfig);
  CHECK(bad([](TrainConfig& c) { c.ema_beta = 1.0; }) == ErrorCode::kInvalidConfig);
  CHECK(bad([](TrainConfig& c) { c.batch_size = 0; }) == ErrorCode::kInvalidConfig);
  CHECK(bad([](TrainConfig& c) { c.policy.encoder.heads = 3; }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("config JSON") {
  auto cfg = tiny_config();
  cfg.milestones = {1};
  cfg.policy.encoder.norm = NormKind::kInstance;
  cfg.policy.encoder.ffn = FfnKind::kRelu;
  const auto text = train_config_to_json(cfg);
  const auto back = train_config_from_json(text);
  CHECK(train_config_to_json(back) == text);
  CHECK(back.milestones == cfg.milestones);
  CHECK(back.policy.encoder.norm == NormKind::kInstance);
  CHECK(back.policy.encoder.embed_dim == 8);

  const auto partial = train_config_from_json(R"({"epochs": 3, "group_size": 4})");
  CHECK(partial.epochs == 3);
  CHECK(partial.group_size == 4);
  CHECK(partial.batch_size == TrainConfig{}.batch_size);

  CHECK(code_of([] { train_config_from_json(R"({"epochz": 3})"); }) == ErrorCode::kParseError);
  CHECK(code_of([] { train_config_from_json(R"({"policy": {"norm": "layer"}})"); }) ==
        ErrorCode::kParseError);
  CHECK(code_of([] { train_config_from_json(R"({"group_size": 1})"); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("group rollouts need a homogeneous batch") {
  Rng rng(5);
  testkit::TinyOptions a, b;
  b.attrs.open_route = true;
  std::vector<Instance> batch{testkit::tiny_instance(rng, a), testkit::tiny_instance(rng, a)};
  const auto params = init_policy(small_policy(), 1);
  const auto out = pomo_group_rollout(batch, params, 4, rng);
  REQUIRE(out.rewards.size() == 2);
  CHECK(out.rewards[0].size() == 4);
  for (std::size_t i = 0; i < 2; ++i) {
    for (int g = 0; g < 4; ++g) CHECK(out.rewards[i][g] == out.solutions[i][g].value);
  }
  batch.push_back(testkit::tiny_instance(rng, b));
  CHECK(code_of([&] { pomo_group_rollout(batch, params, 4, rng); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("tiny training run is deterministic") {
  const auto cfg = tiny_config();
  std::vector<int> seen;
  const auto a = train(cfg, [&](int epoch, const std::vector<MetricsRow>&) { seen.push_back(epoch); });
  const auto b = train(cfg);
  CHECK(seen == std::vector<int>{1, 2});
  CHECK(a.metrics.size() == 8);  // 2 epochs x 4 regimes
  const auto pa = a.params.all();
  const auto pb = b.params.all();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  const auto init = init_policy(cfg.policy, cfg.seed);
  CHECK_FALSE(init.all()[0]->value == pa[0]->value);
  for (const auto& row : a.metrics) {
    CHECK(std::isfinite(row.mean_reward));
    CHECK(row.greedy_eval >= 0.0);
  }
  const auto csv = metrics_to_csv(a.metrics);
  CHECK(csv.rfind("epoch,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);

  auto other = cfg;
  other.seed = 2;
  CHECK_FALSE(train(other).params.all()[0]->value == pa[0]->value);
}

TEST_CASE("multi-depot finetuning") {
  auto cfg = tiny_config();
  cfg.epochs = 1;
  const auto pre = train(cfg).params;
  const auto tuned = finetune_md(pre, cfg);
  CHECK(tuned.params.scalar_count() == pre.scalar_count() + 2 * cfg.policy.encoder.embed_dim);
  for (const auto& row : tuned.metrics) CHECK(row.regime.find("md") != std::string::npos);
  CHECK(code_of([&] { finetune_md(tuned.params, cfg); }) == ErrorCode::kAlreadyExpanded);
}
