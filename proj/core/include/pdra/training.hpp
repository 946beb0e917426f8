#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pdra/autodiff.hpp"
#include "pdra/instance.hpp"
#include "pdra/policy.hpp"

namespace pdra {

struct TrainConfig {
  int epochs = 40;
  int iterations = 100;  // per epoch
  int batch_size = 32;
  int group_size = 8;
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  double lr_decay = 0.1;
  std::vector<int> milestones;  // empty: 87.5% and 97.5% of epochs
  double ema_beta = 0.99;
  double ema_eps = 1e-5;
  double grad_clip = 1.0;  // global norm; <= 0 disables

  int network_nodes = 20;
  std::vector<double> p_max_choices{2.0, 3.0, 4.0};
  std::vector<int> drone_choices{2, 3, 4};
  double battery = 8.0;
  double open_route_probability = 0.5;
  double time_window_probability = 0.5;
  int depot_count = 1;  // >= 2 trains on multi-depot instances

  int heldout_size = 200;  // per regime, greedy decoding
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // epochs; 0 disables
  std::filesystem::path checkpoint_dir;
  PolicyConfig policy;

  /// Throws InvalidConfig (G < 2, milestone >= epochs, ...).
  void validate() const;
  std::vector<int> effective_milestones() const;
};

/// Regime key (O, tw, md).
struct RegimeKey {
  bool open_route = false;
  bool time_windows = false;
  bool multi_depot = false;

  static RegimeKey of(const AttributeConfig& a) { return {a.open_route, a.time_windows, a.multi_depot}; }
  friend auto operator<=>(const RegimeKey&, const RegimeKey&) = default;
};

struct EmaEntry {
  double mean = 0.0;
  double variance = 1.0;
  bool initialized = false;
};

/// Running reward statistics, one entry per regime.
struct EmaState {
  std::map<RegimeKey, EmaEntry> entries;
};

/// Updates the regime's EMA with the batch, then returns per-reward
/// advantages r~ - mean_group(r~) with r~ = (r - mu) / (sigma + eps).
/// `rewards` is [instance][member]. The first batch of a regime initializes
/// the statistics directly.
std::vector<std::vector<double>> normalize_rewards(const std::vector<std::vector<double>>& rewards,
                                                   const RegimeKey& regime, EmaState& ema,
                                                   double beta = 0.99, double eps = 1e-5);

/// Adam with L2 weight decay folded into the gradient.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<ad::Matrix> m, v;
};

/// One Adam update; `grads` parallels params.all(). Throws NonFiniteGradient.
void adam_step(PolicyParams& params, const std::vector<ad::Matrix>& grads, AdamState& state,
               double lr, double weight_decay);

/// Learning rate after `epoch` completed milestones: base * decay^passed.
double scheduled_lr(double base, double decay, const std::vector<int>& milestones, int epoch);

struct GroupBatch {
  std::vector<Instance> instances;
  std::vector<std::vector<double>> rewards;
  std::vector<std::vector<Solution>> solutions;
};

/// Samples G solutions per instance; every instance must share its
/// attribute configuration (InvalidConfig otherwise).
GroupBatch pomo_group_rollout(const std::vector<Instance>& batch, const PolicyParams& params,
                              int group, Rng& rng);

struct StepStats {
  double mean_reward = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// One policy-gradient update on a homogeneous batch:
/// loss = -mean(advantage * log_prob).
StepStats train_step(const std::vector<Instance>& batch, PolicyParams& params, EmaState& ema,
                     AdamState& adam, const TrainConfig& cfg, double lr, Rng& rng);

struct MetricsRow {
  int epoch = 0;
  std::string regime;  // variant name
  double mean_reward = 0.0;
  double greedy_eval = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<MetricsRow> metrics;
};

/// Held-out instances of one regime (fixed seed, never regenerated).
std::vector<Instance> heldout_set(const TrainConfig& cfg, const AttributeConfig& attrs, int count,
                                  std::uint64_t seed);

/// Mean value of greedy decoding over `instances`.
double greedy_eval(const std::vector<Instance>& instances, const PolicyParams& params);

using EpochCallback = std::function<void(int epoch, const std::vector<MetricsRow>&)>;

/// Trains from a fresh initialization (seeded by cfg.seed).
TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Trains `start` further on cfg's instance distribution; shared by train()
/// and finetune_md().
TrainResult train_from(PolicyParams start, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// expand_for_md, then training on multi-depot instances (cfg.depot_count is
/// raised to 2 when smaller). All parameters stay trainable.
TrainResult finetune_md(const PolicyParams& pretrained, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {});

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

/// Instance distribution used for training batches and held-out sets.
InstanceConfig train_instance_config(const TrainConfig& cfg);

/// JSON training config. Every key is optional and named after the field
/// ("epochs", "learning_rate", ...); "policy" holds the encoder settings
/// ("embed_dim", "layers", "heads", "ffn_hidden", "norm", "placement", "ffn",
/// "attention", "block_size", "decoder_heads", "tanh_clip"). Unknown keys are
/// rejected with ParseError.
TrainConfig train_config_from_json(std::string_view text);
std::string train_config_to_json(const TrainConfig& cfg);

}  // namespace pdra
