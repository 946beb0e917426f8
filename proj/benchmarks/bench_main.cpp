#include <benchmark/benchmark.h>

#include <random>

#include "pdra/autodiff.hpp"
#include "pdra/env.hpp"
#include "pdra/instance.hpp"
#include "pdra/policy.hpp"
#include "pdra/solvers.hpp"
#include "pdra/training.hpp"

using namespace pdra;

namespace {

Instance make_instance(int nodes, std::uint64_t seed, AttributeConfig attrs = {}) {
  Rng rng(seed);
  InstanceConfig ic;
  ic.attrs = attrs;
  return generate_instance(GenConfig::for_total_nodes(nodes), ic, rng);
}

ad::Matrix random_matrix(Rng& rng, int r, int c) {
  std::normal_distribution<double> n;
  ad::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

static void BM_Transform(benchmark::State& state) {
  const auto inst = make_instance(static_cast<int>(state.range(0)), 1);
  const auto& net = inst.network.source();
  for (auto _ : state) benchmark::DoNotOptimize(transform(net));
}
BENCHMARK(BM_Transform)->Arg(20)->Arg(100)->Arg(500);

static void BM_RandomRollout(benchmark::State& state) {
  const auto inst = make_instance(static_cast<int>(state.range(0)), 2, {true, true, false});
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(random_policy_rollout(inst, rng));
}
BENCHMARK(BM_RandomRollout)->Arg(20)->Arg(100);

static void BM_GreedyHeuristic(benchmark::State& state) {
  const auto inst = make_instance(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(greedy_heuristic(inst));
}
BENCHMARK(BM_GreedyHeuristic)->Arg(20)->Arg(100);

static void BM_ExactOracle(benchmark::State& state) {
  const auto inst = make_instance(12, 5);
  for (auto _ : state) benchmark::DoNotOptimize(exact_oracle(inst));
}
BENCHMARK(BM_ExactOracle);

static void BM_Attention(benchmark::State& state) {
  Rng rng(6);
  const int n = static_cast<int>(state.range(0));
  const auto q = random_matrix(rng, n, 32), k = random_matrix(rng, n, 32), v = random_matrix(rng, n, 32);
  ad::AttentionOptions opt;
  opt.heads = 4;
  opt.kind = state.range(1) == 0 ? ad::AttentionKind::kStandard : ad::AttentionKind::kBlockwise;
  for (auto _ : state) {
    ad::Tape tape(false);
    benchmark::DoNotOptimize(ad::attention(tape.constant(q), tape.constant(k), tape.constant(v), opt).value());
  }
}
BENCHMARK(BM_Attention)->Args({64, 0})->Args({64, 1})->Args({512, 0})->Args({512, 1});

static void BM_PolicyGreedyRollout(benchmark::State& state) {
  const auto inst = make_instance(20, 7);
  const auto params = init_policy(PolicyConfig{}, 1);
  Rng rng(8);
  for (auto _ : state) benchmark::DoNotOptimize(rollout(inst, params, DecodeMode::kGreedy, 1, rng));
}
BENCHMARK(BM_PolicyGreedyRollout);

static void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.batch_size = 4;
  std::vector<Instance> batch;
  for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(make_instance(20, 100 + i));
  auto params = init_policy(cfg.policy, 1);
  EmaState ema;
  AdamState adam;
  Rng rng(9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(batch, params, ema, adam, cfg, cfg.learning_rate, rng));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
