#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdra/autodiff.hpp"
#include "pdra/env.hpp"
#include "pdra/instance.hpp"

namespace pdra {

enum class NormKind { kRms, kInstance };
enum class NormPlacement { kPre, kPost };
enum class FfnKind { kSglu, kRelu };
using ad::AttentionKind;

struct EncoderConfig {
  int embed_dim = 32;
  int layers = 2;
  int heads = 4;
  int ffn_hidden = 128;
  NormKind norm = NormKind::kRms;
  NormPlacement placement = NormPlacement::kPre;
  FfnKind ffn = FfnKind::kSglu;
  AttentionKind attention = AttentionKind::kBlockwise;
  int block_size = 32;

  /// Throws InvalidConfig (e.g. embed_dim not divisible by heads).
  void validate() const;
};

struct PolicyConfig {
  EncoderConfig encoder;
  int decoder_heads = 4;
  double tanh_clip = 10.0;
  double window_sentinel = 4.0;  // stands in for l_i = inf
  double rms_eps = 1e-8;
};

struct EncoderLayerParams {
  ad::Parameter wq, wk, wv, wo;
  ad::Parameter norm1_gain, norm1_bias, norm2_gain, norm2_bias;  // biases: instance norm only
  ad::Parameter w1, b1, w2, b2;  // w2/b2: gate branch of SGLU only
  ad::Parameter w3, b3;          // down-projection to embed_dim
};

/// All trainable tensors. Unused slots (per the configuration) are 0x0.
struct PolicyParams {
  PolicyConfig config;
  bool md_expanded = false;

  ad::Parameter node_w, node_b;    // [x, y, c, l] -> d
  ad::Parameter depot_w, depot_b;  // [x, y, p_max, Q, K, O] -> d
  std::vector<EncoderLayerParams> layers;
  ad::Parameter ctx_w, ctx_b;      // [h, d_t/p_max, k_t/K (, x_d, y_d)] -> d
  ad::Parameter dec_wq, dec_wk, dec_wv, dec_wo;
  ad::Parameter score_wq, score_wk;

  /// Non-empty parameters in a fixed order.
  std::vector<ad::Parameter*> all();
  std::vector<const ad::Parameter*> all() const;
  std::size_t scalar_count() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, unit norm gains.
PolicyParams init_policy(const PolicyConfig& config, std::uint64_t seed);

/// Token rows: one per depot (in depot order), then one per node of N-bar.
/// Node features [x, y, c, l] with l = inf replaced by the sentinel; depot
/// features [x_o, y_o, p_max, Q, K, O].
ad::Var embed_inputs(ad::Tape& tape, const Instance& inst, const PolicyParams& params);

/// Position-wise FFN of one layer: Swish(xW1 + b1) * (xW2 + b2) for SGLU or
/// ReLU(xW1 + b1), followed by the down-projection W3, b3.
ad::Var feed_forward(ad::Tape& tape, ad::Var x, const EncoderLayerParams& lp, const EncoderConfig& enc);

ad::Var encoder_forward(ad::Tape& tape, ad::Var embeddings, const PolicyParams& params);

/// Per-instance decoder inputs computed once per encoding.
struct DecoderCache {
  ad::Var tokens;        // encoder output
  ad::Var context_rows;  // tokens plus the mean depot token (last row)
  ad::Var glimpse_k, glimpse_v, score_k;
  int depot_tokens = 0;
};

DecoderCache prepare_decoder(ad::Tape& tape, ad::Var encodings, const Instance& inst,
                             const PolicyParams& params);

/// Log-probabilities over node ids for each state (one row each). `masks`
/// holds one feasible-action row per state; rows of finished states are all
/// false and come back as zeros.
ad::Var decode_log_probs(ad::Tape& tape, const DecoderCache& cache, const Instance& inst,
                         const std::vector<const State*>& states, const ad::BoolMatrix& masks,
                         const PolicyParams& params);

/// Probability distribution over node ids for a non-terminal state. Throws
/// AllMasked when nothing is feasible.
std::vector<double> decode_step(const Instance& inst, const PolicyParams& params,
                                const State& state, const EnvOptions& options = {});

enum class DecodeMode { kGreedy, kSample };

struct RolloutResult {
  Solution solution;
  double log_prob = 0.0;
};

/// Complete episodes. Greedy takes the arg max with the lowest node id on ties.
std::vector<RolloutResult> rollout(const Instance& inst, const PolicyParams& params,
                                   DecodeMode mode, int n_samples, Rng& rng,
                                   const EnvOptions& options = {});

/// `group` lockstep episodes on `tape`; log_prob is group x 1.
struct GroupRollout {
  std::vector<Solution> solutions;
  std::vector<double> rewards;
  std::vector<std::vector<int>> actions;  // env actions per episode
  ad::Var log_prob;
};

GroupRollout rollout_group(ad::Tape& tape, const Instance& inst, const PolicyParams& params,
                           DecodeMode mode, int group, Rng& rng, const EnvOptions& options = {});

/// Re-scores fixed action sequences (one episode each) under `params`.
/// Throws InfeasibleAction when a sequence leaves the env's action space.
GroupRollout replay_group(ad::Tape& tape, const Instance& inst, const PolicyParams& params,
                          const std::vector<std::vector<int>>& actions,
                          const EnvOptions& options = {});

/// Appends zero rows for (x_d, y_d) to the context projection. Throws
/// AlreadyExpanded on a second call.
PolicyParams expand_for_md(const PolicyParams& params);

}  // namespace pdra
