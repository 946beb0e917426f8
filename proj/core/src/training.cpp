#include "pdra/training.hpp"

#include <cmath>
#include <memory>
#include <numeric>

#include <fmt/core.h>
#include <json.hpp>

#include "pdra/checkpoint.hpp"
#include "pdra/error.hpp"

namespace pdra {

using ad::Matrix;

void TrainConfig::validate() const {
  if (epochs < 0 || iterations < 1 || batch_size < 1) {
    fail(ErrorCode::kInvalidConfig, "epochs must be >= 0, iterations and batch size >= 1");
  }
  if (group_size < 2) fail(ErrorCode::kInvalidConfig, "group size must be at least 2");
  if (!(learning_rate > 0.0) || weight_decay < 0.0 || !(lr_decay > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "learning rate and decay must be positive");
  }
  if (ema_beta < 0.0 || ema_beta >= 1.0 || !(ema_eps > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "EMA decay must lie in [0, 1) and eps be positive");
  }
  for (int m : milestones) {
    if (m < 0 || m >= epochs) {
      fail(ErrorCode::kInvalidConfig, fmt::format("milestone {} is outside [0, {})", m, epochs));
    }
  }
  if (p_max_choices.empty() || drone_choices.empty()) {
    fail(ErrorCode::kInvalidConfig, "parameter ranges must not be empty");
  }
  if (network_nodes < 5) fail(ErrorCode::kInvalidConfig, "networks need at least 5 nodes");
  if (heldout_size < 0) fail(ErrorCode::kInvalidConfig, "held-out size must be >= 0");
  policy.encoder.validate();
}

std::vector<int> TrainConfig::effective_milestones() const {
  if (!milestones.empty() || epochs < 2) return milestones;
  std::vector<int> out;
  for (double f : {0.875, 0.975}) {
    const int m = static_cast<int>(std::lround(f * epochs));
    if (m > 0 && m < epochs && (out.empty() || m > out.back())) out.push_back(m);
  }
  return out;
}

std::vector<std::vector<double>> normalize_rewards(const std::vector<std::vector<double>>& rewards,
                                                   const RegimeKey& regime, EmaState& ema,
                                                   double beta, double eps) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& g : rewards) {
    for (double r : g) total += r;
    count += g.size();
  }
  if (count == 0) return {};
  const double mean = total / static_cast<double>(count);
  double var = 0.0;
  for (const auto& g : rewards) {
    for (double r : g) var += (r - mean) * (r - mean);
  }
  var /= static_cast<double>(count);

  auto& e = ema.entries[regime];
  if (!e.initialized) {
    e.mean = mean;
    e.variance = var;
    e.initialized = true;
  } else {
    e.mean = beta * e.mean + (1.0 - beta) * mean;
    e.variance = beta * e.variance + (1.0 - beta) * var;
  }
  const double sigma = std::sqrt(e.variance);

  std::vector<std::vector<double>> adv;
  adv.reserve(rewards.size());
  for (const auto& g : rewards) {
    std::vector<double> z(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) z[i] = (g[i] - e.mean) / (sigma + eps);
    const double base = g.empty() ? 0.0 : std::accumulate(z.begin(), z.end(), 0.0) / z.size();
    for (double& v : z) v -= base;
    adv.push_back(std::move(z));
  }
  return adv;
}

void adam_step(PolicyParams& params, const std::vector<Matrix>& grads, AdamState& state, double lr,
               double weight_decay) {
  auto slots = params.all();
  if (grads.size() != slots.size()) {
    fail(ErrorCode::kShapeMismatch, "gradient list does not match the parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) {
      fail(ErrorCode::kNonFiniteGradient,
           fmt::format("non-finite gradient in {} at step {}", slots[i]->name, state.step + 1));
    }
  }
  if (state.m.size() != slots.size()) {
    state.m.clear();
    state.v.clear();
    for (auto* p : slots) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Matrix& w = slots[i]->value;
    const Matrix g = grads[i] + weight_decay * w;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
    w.array() -= lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + state.eps);
  }
}

double scheduled_lr(double base, double decay, const std::vector<int>& milestones, int epoch) {
  int passed = 0;
  for (int m : milestones) {
    if (epoch >= m) ++passed;
  }
  return base * std::pow(decay, passed);
}

namespace {

void check_homogeneous(const std::vector<Instance>& batch) {
  for (const auto& inst : batch) {
    if (!(inst.attrs == batch.front().attrs)) {
      fail(ErrorCode::kInvalidConfig, "batch mixes attribute configurations");
    }
  }
}

}  // namespace

GroupBatch pomo_group_rollout(const std::vector<Instance>& batch, const PolicyParams& params,
                              int group, Rng& rng) {
  check_homogeneous(batch);
  GroupBatch out;
  out.instances = batch;
  for (const auto& inst : batch) {
    ad::Tape tape(false);
    auto g = rollout_group(tape, inst, params, DecodeMode::kSample, group, rng);
    out.rewards.push_back(std::move(g.rewards));
    out.solutions.push_back(std::move(g.solutions));
  }
  return out;
}

StepStats train_step(const std::vector<Instance>& batch, PolicyParams& params, EmaState& ema,
                     AdamState& adam, const TrainConfig& cfg, double lr, Rng& rng) {
  if (batch.empty()) fail(ErrorCode::kInvalidConfig, "empty training batch");
  check_homogeneous(batch);
  const int group = cfg.group_size;
  std::vector<std::unique_ptr<ad::Tape>> tapes;
  std::vector<GroupRollout> rolls;
  std::vector<std::vector<double>> rewards;
  for (const auto& inst : batch) {
    tapes.push_back(std::make_unique<ad::Tape>());
    rolls.push_back(rollout_group(*tapes.back(), inst, params, DecodeMode::kSample, group, rng));
    rewards.push_back(rolls.back().rewards);
  }
  const auto adv = normalize_rewards(rewards, RegimeKey::of(batch.front().attrs), ema,
                                     cfg.ema_beta, cfg.ema_eps);

  StepStats stats;
  auto slots = params.all();
  std::vector<Matrix> grads;
  for (auto* p : slots) grads.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  const double norm = 1.0 / (static_cast<double>(batch.size()) * group);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Matrix w(group, 1);
    for (int g = 0; g < group; ++g) {
      w(g, 0) = -adv[b][g] * norm;
      stats.mean_reward += rewards[b][g] * norm;
    }
    ad::Var loss = ad::weighted_sum(rolls[b].log_prob, w);
    stats.loss += loss.scalar();
    tapes[b]->backward(loss);
    for (std::size_t i = 0; i < slots.size(); ++i) grads[i] += tapes[b]->grad_of(*slots[i]);
    tapes[b].reset();
  }
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  stats.grad_norm = std::sqrt(sq);
  if (cfg.grad_clip > 0.0 && stats.grad_norm > cfg.grad_clip) {
    for (auto& g : grads) g *= cfg.grad_clip / stats.grad_norm;
  }
  adam_step(params, grads, adam, lr, cfg.weight_decay);
  return stats;
}

InstanceConfig train_instance_config(const TrainConfig& cfg) {
  InstanceConfig ic;
  ic.p_max_choices = cfg.p_max_choices;
  ic.drone_choices = cfg.drone_choices;
  ic.battery = cfg.battery;
  ic.open_route_probability = cfg.open_route_probability;
  ic.time_window_probability = cfg.time_window_probability;
  ic.depot_count = cfg.depot_count;
  return ic;
}

std::vector<Instance> heldout_set(const TrainConfig& cfg, const AttributeConfig& attrs, int count,
                                  std::uint64_t seed) {
  Rng rng(seed);
  const auto gen = GenConfig::for_total_nodes(cfg.network_nodes);
  auto ic = train_instance_config(cfg);
  ic.attrs = attrs;
  std::vector<Instance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(generate_instance(gen, ic, rng));
  return out;
}

double greedy_eval(const std::vector<Instance>& instances, const PolicyParams& params) {
  if (instances.empty()) return 0.0;
  Rng unused(0);
  double total = 0.0;
  for (const auto& inst : instances) {
    total += rollout(inst, params, DecodeMode::kGreedy, 1, unused).front().solution.value;
  }
  return total / static_cast<double>(instances.size());
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "epoch,regime,mean_reward,greedy_eval\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{:.6f},{:.6f}\n", r.epoch, r.regime, r.mean_reward, r.greedy_eval);
  }
  return out;
}

TrainResult train_from(PolicyParams start, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainResult result;
  result.params = std::move(start);
  if (cfg.epochs == 0) return result;
  const bool md = cfg.depot_count >= 2;

  // Held-out sets: one per (O, TW) regime under the configured depot mode.
  std::vector<AttributeConfig> regimes;
  for (int r = 0; r < 4; ++r) {
    auto a = AttributeConfig::from_regime(r);
    a.multi_depot = md;
    regimes.push_back(a);
  }
  std::vector<std::vector<Instance>> heldout;
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    heldout.push_back(heldout_set(cfg, regimes[r], cfg.heldout_size, cfg.seed * 1000003ULL + 17 + r));
  }

  Rng rng(cfg.seed);
  std::bernoulli_distribution open_coin(cfg.open_route_probability);
  std::bernoulli_distribution tw_coin(cfg.time_window_probability);
  std::uniform_int_distribution<std::size_t> pick_p(0, cfg.p_max_choices.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_k(0, cfg.drone_choices.size() - 1);
  const auto gen = GenConfig::for_total_nodes(cfg.network_nodes);
  const auto milestones = cfg.effective_milestones();
  EmaState ema;
  AdamState adam;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg.learning_rate, cfg.lr_decay, milestones, epoch);
    std::map<std::string, std::pair<double, int>> reward_sums;
    for (int it = 0; it < cfg.iterations; ++it) {
      // One attribute and parameter combination per batch.
      auto ic = train_instance_config(cfg);
      AttributeConfig attrs{open_coin(rng), tw_coin(rng), md};
      ic.attrs = attrs;
      ic.p_max = cfg.p_max_choices[pick_p(rng)];
      ic.drones = cfg.drone_choices[pick_k(rng)];
      std::vector<Instance> batch;
      batch.reserve(static_cast<std::size_t>(cfg.batch_size));
      for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(generate_instance(gen, ic, rng));
      const auto stats = train_step(batch, result.params, ema, adam, cfg, lr, rng);
      auto& slot = reward_sums[attrs.variant_name()];
      slot.first += stats.mean_reward;
      slot.second += 1;
    }
    std::vector<MetricsRow> rows;
    for (std::size_t r = 0; r < regimes.size(); ++r) {
      const auto name = regimes[r].variant_name();
      MetricsRow row;
      row.epoch = epoch + 1;
      row.regime = name;
      if (auto it = reward_sums.find(name); it != reward_sums.end()) {
        row.mean_reward = it->second.first / it->second.second;
      }
      row.greedy_eval = greedy_eval(heldout[r], result.params);
      rows.push_back(row);
    }
    result.metrics.insert(result.metrics.end(), rows.begin(), rows.end());
    if (on_epoch) on_epoch(epoch + 1, rows);
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        !cfg.checkpoint_dir.empty()) {
      save_checkpoint(result.params, cfg.checkpoint_dir / fmt::format("epoch_{:04d}.json", epoch + 1));
    }
  }
  return result;
}

TrainResult train(const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  return train_from(init_policy(cfg.policy, cfg.seed), cfg, on_epoch);
}

TrainResult finetune_md(const PolicyParams& pretrained, const TrainConfig& cfg,
                        const EpochCallback& on_epoch) {
  PolicyParams expanded = expand_for_md(pretrained);
  TrainConfig md_cfg = cfg;
  md_cfg.depot_count = std::max(2, cfg.depot_count);
  md_cfg.policy = expanded.config;
  return train_from(std::move(expanded), md_cfg, on_epoch);
}

namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& out, std::vector<std::string>& seen) {
  if (auto it = j.find(key); it != j.end()) {
    out = it->get<T>();
    seen.emplace_back(key);
  }
}

void reject_unknown(const json& j, const std::vector<std::string>& seen, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(seen.begin(), seen.end(), it.key()) == seen.end()) {
      fail(ErrorCode::kParseError, fmt::format("{}: unknown key '{}'", where, it.key()));
    }
  }
}

template <typename E>
E enum_of(const std::string& v, const char* a, E ea, const char* b, E eb) {
  if (v == a) return ea;
  if (v == b) return eb;
  fail(ErrorCode::kParseError, fmt::format("training config: '{}' is neither {} nor {}", v, a, b));
}

}  // namespace

TrainConfig train_config_from_json(std::string_view text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) fail(ErrorCode::kParseError, "training config must be a JSON object");
    std::vector<std::string> seen;
    take(j, "epochs", c.epochs, seen);
    take(j, "iterations", c.iterations, seen);
    take(j, "batch_size", c.batch_size, seen);
    take(j, "group_size", c.group_size, seen);
    take(j, "learning_rate", c.learning_rate, seen);
    take(j, "weight_decay", c.weight_decay, seen);
    take(j, "lr_decay", c.lr_decay, seen);
    take(j, "milestones", c.milestones, seen);
    take(j, "ema_beta", c.ema_beta, seen);
    take(j, "ema_eps", c.ema_eps, seen);
    take(j, "grad_clip", c.grad_clip, seen);
    take(j, "network_nodes", c.network_nodes, seen);
    take(j, "p_max_choices", c.p_max_choices, seen);
    take(j, "drone_choices", c.drone_choices, seen);
    take(j, "battery", c.battery, seen);
    take(j, "open_route_probability", c.open_route_probability, seen);
    take(j, "time_window_probability", c.time_window_probability, seen);
    take(j, "depot_count", c.depot_count, seen);
    take(j, "heldout_size", c.heldout_size, seen);
    take(j, "seed", c.seed, seen);
    take(j, "checkpoint_every", c.checkpoint_every, seen);
    if (auto it = j.find("checkpoint_dir"); it != j.end()) {
      c.checkpoint_dir = it->get<std::string>();
      seen.emplace_back("checkpoint_dir");
    }
    if (auto it = j.find("policy"); it != j.end()) {
      seen.emplace_back("policy");
      const json& p = *it;
      std::vector<std::string> pseen;
      auto& e = c.policy.encoder;
      take(p, "embed_dim", e.embed_dim, pseen);
      take(p, "layers", e.layers, pseen);
      take(p, "heads", e.heads, pseen);
      take(p, "ffn_hidden", e.ffn_hidden, pseen);
      take(p, "block_size", e.block_size, pseen);
      take(p, "decoder_heads", c.policy.decoder_heads, pseen);
      take(p, "tanh_clip", c.policy.tanh_clip, pseen);
      std::string v;
      if (p.contains("norm")) {
        take(p, "norm", v, pseen);
        e.norm = enum_of(v, "rms", NormKind::kRms, "instance", NormKind::kInstance);
      }
      if (p.contains("placement")) {
        take(p, "placement", v, pseen);
        e.placement = enum_of(v, "pre", NormPlacement::kPre, "post", NormPlacement::kPost);
      }
      if (p.contains("ffn")) {
        take(p, "ffn", v, pseen);
        e.ffn = enum_of(v, "sglu", FfnKind::kSglu, "relu", FfnKind::kRelu);
      }
      if (p.contains("attention")) {
        take(p, "attention", v, pseen);
        e.attention = enum_of(v, "blockwise", AttentionKind::kBlockwise, "standard",
                              AttentionKind::kStandard);
      }
      reject_unknown(p, pseen, "training config policy");
    }
    reject_unknown(j, seen, "training config");
  } catch (const json::exception& ex) {
    fail(ErrorCode::kParseError, fmt::format("training config: {}", ex.what()));
  }
  c.validate();
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  const auto& e = c.policy.encoder;
  json j = {{"epochs", c.epochs},
            {"iterations", c.iterations},
            {"batch_size", c.batch_size},
            {"group_size", c.group_size},
            {"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"lr_decay", c.lr_decay},
            {"milestones", c.effective_milestones()},
            {"ema_beta", c.ema_beta},
            {"ema_eps", c.ema_eps},
            {"grad_clip", c.grad_clip},
            {"network_nodes", c.network_nodes},
            {"p_max_choices", c.p_max_choices},
            {"drone_choices", c.drone_choices},
            {"battery", c.battery},
            {"open_route_probability", c.open_route_probability},
            {"time_window_probability", c.time_window_probability},
            {"depot_count", c.depot_count},
            {"heldout_size", c.heldout_size},
            {"seed", c.seed},
            {"checkpoint_every", c.checkpoint_every},
            {"checkpoint_dir", c.checkpoint_dir.string()},
            {"policy",
             {{"embed_dim", e.embed_dim},
              {"layers", e.layers},
              {"heads", e.heads},
              {"ffn_hidden", e.ffn_hidden},
              {"norm", e.norm == NormKind::kRms ? "rms" : "instance"},
              {"placement", e.placement == NormPlacement::kPre ? "pre" : "post"},
              {"ffn", e.ffn == FfnKind::kSglu ? "sglu" : "relu"},
              {"attention", e.attention == AttentionKind::kBlockwise ? "blockwise" : "standard"},
              {"block_size", e.block_size},
              {"decoder_heads", c.policy.decoder_heads},
              {"tanh_clip", c.policy.tanh_clip}}}};
  return j.dump(1) + "\n";
}

}  // namespace pdra
