#include "pdra/policy.hpp"

#include <cmath>

#include <fmt/core.h>

#include "pdra/error.hpp"

namespace pdra {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

void EncoderConfig::validate() const {
  if (embed_dim < 1 || layers < 0 || heads < 1 || ffn_hidden < 1 || block_size < 1) {
    fail(ErrorCode::kInvalidConfig, "encoder sizes must be positive");
  }
  if (embed_dim % heads != 0) {
    fail(ErrorCode::kInvalidConfig,
         fmt::format("embed_dim {} is not divisible by {} heads", embed_dim, heads));
  }
}

std::vector<Parameter*> PolicyParams::all() {
  std::vector<Parameter*> out;
  auto add = [&](Parameter& p) {
    if (p.value.size() > 0) out.push_back(&p);
  };
  add(node_w);
  add(node_b);
  add(depot_w);
  add(depot_b);
  for (auto& l : layers) {
    for (Parameter* p : {&l.wq, &l.wk, &l.wv, &l.wo, &l.norm1_gain, &l.norm1_bias, &l.norm2_gain,
                         &l.norm2_bias, &l.w1, &l.b1, &l.w2, &l.b2, &l.w3, &l.b3}) {
      add(*p);
    }
  }
  for (Parameter* p : {&ctx_w, &ctx_b, &dec_wq, &dec_wk, &dec_wv, &dec_wo, &score_wq, &score_wk}) {
    add(*p);
  }
  return out;
}

std::vector<const Parameter*> PolicyParams::all() const {
  auto mut = const_cast<PolicyParams*>(this)->all();
  return {mut.begin(), mut.end()};
}

std::size_t PolicyParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto* p : all()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

PolicyParams init_policy(const PolicyConfig& config, std::uint64_t seed) {
  config.encoder.validate();
  const int d = config.encoder.embed_dim;
  if (config.decoder_heads < 1 || d % config.decoder_heads != 0) {
    fail(ErrorCode::kInvalidConfig,
         fmt::format("embed_dim {} is not divisible by {} decoder heads", d, config.decoder_heads));
  }
  Rng rng(seed);
  auto uniform = [&](const std::string& name, int rows, int cols, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Parameter p{name, Matrix(rows, cols)};
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
    return p;
  };
  auto constant = [](const std::string& name, int cols, double v) {
    return Parameter{name, Matrix::Constant(1, cols, v)};
  };

  PolicyParams p;
  p.config = config;
  p.node_w = uniform("node_w", 4, d, 4);
  p.node_b = uniform("node_b", 1, d, 4);
  p.depot_w = uniform("depot_w", 6, d, 6);
  p.depot_b = uniform("depot_b", 1, d, 6);
  const auto& enc = config.encoder;
  const int f = enc.ffn_hidden;
  for (int l = 0; l < enc.layers; ++l) {
    const auto pre = fmt::format("layer{}.", l);
    EncoderLayerParams lp;
    lp.wq = uniform(pre + "wq", d, d, d);
    lp.wk = uniform(pre + "wk", d, d, d);
    lp.wv = uniform(pre + "wv", d, d, d);
    lp.wo = uniform(pre + "wo", d, d, d);
    lp.norm1_gain = constant(pre + "norm1_gain", d, 1.0);
    lp.norm2_gain = constant(pre + "norm2_gain", d, 1.0);
    if (enc.norm == NormKind::kInstance) {
      lp.norm1_bias = constant(pre + "norm1_bias", d, 0.0);
      lp.norm2_bias = constant(pre + "norm2_bias", d, 0.0);
    }
    lp.w1 = uniform(pre + "w1", d, f, d);
    lp.b1 = uniform(pre + "b1", 1, f, d);
    if (enc.ffn == FfnKind::kSglu) {
      lp.w2 = uniform(pre + "w2", d, f, d);
      lp.b2 = uniform(pre + "b2", 1, f, d);
    }
    lp.w3 = uniform(pre + "w3", f, d, f);
    lp.b3 = uniform(pre + "b3", 1, d, f);
    p.layers.push_back(std::move(lp));
  }
  p.ctx_w = uniform("ctx_w", d + 2, d, d + 2);
  p.ctx_b = uniform("ctx_b", 1, d, d + 2);
  p.dec_wq = uniform("dec_wq", d, d, d);
  p.dec_wk = uniform("dec_wk", d, d, d);
  p.dec_wv = uniform("dec_wv", d, d, d);
  p.dec_wo = uniform("dec_wo", d, d, d);
  p.score_wq = uniform("score_wq", d, d, d);
  p.score_wk = uniform("score_wk", d, d, d);
  return p;
}

Var embed_inputs(Tape& tape, const Instance& inst, const PolicyParams& params) {
  const auto& net = inst.network;
  const auto n = static_cast<Eigen::Index>(net.size());
  if (inst.latest.size() != net.size()) {
    fail(ErrorCode::kShapeMismatch, "instance windows do not match the node count");
  }
  if (params.node_w.value.rows() != 4 || params.depot_w.value.rows() != 6) {
    fail(ErrorCode::kShapeMismatch, "embedding weights have the wrong input width");
  }
  Matrix nodes(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int id = static_cast<int>(i);
    const auto pos = net.position(id);
    const double l = inst.latest[i] == kUnbounded ? params.config.window_sentinel : inst.latest[i];
    nodes.row(i) << pos.x, pos.y, net.value(id), l;
  }
  const auto nd = static_cast<Eigen::Index>(inst.depots.size());
  Matrix depots(nd, 6);
  for (Eigen::Index k = 0; k < nd; ++k) {
    const auto pos = net.position(inst.depots[k]);
    depots.row(k) << pos.x, pos.y, inst.p_max, inst.battery, static_cast<double>(inst.drones),
        inst.attrs.route_flag();
  }
  Var hd = ad::add_bias(ad::matmul(tape.constant(std::move(depots)), tape.param(params.depot_w)),
                        tape.param(params.depot_b));
  Var hn = ad::add_bias(ad::matmul(tape.constant(std::move(nodes)), tape.param(params.node_w)),
                        tape.param(params.node_b));
  return ad::concat_rows({hd, hn});
}

namespace {

Var normalize(Tape& tape, Var x, const Parameter& gain, const Parameter& bias,
              const PolicyConfig& cfg) {
  if (cfg.encoder.norm == NormKind::kRms) return ad::rms_norm(x, tape.param(gain), cfg.rms_eps);
  return ad::instance_norm(x, tape.param(gain), tape.param(bias));
}

Var self_attention(Tape& tape, Var x, const EncoderLayerParams& lp, const EncoderConfig& enc) {
  ad::AttentionOptions opt;
  opt.heads = enc.heads;
  opt.kind = enc.attention;
  opt.block_size = enc.block_size;
  Var q = ad::matmul(x, tape.param(lp.wq));
  Var k = ad::matmul(x, tape.param(lp.wk));
  Var v = ad::matmul(x, tape.param(lp.wv));
  return ad::matmul(ad::attention(q, k, v, opt), tape.param(lp.wo));
}

}  // namespace

Var feed_forward(Tape& tape, Var x, const EncoderLayerParams& lp, const EncoderConfig& enc) {
  Var a = ad::add_bias(ad::matmul(x, tape.param(lp.w1)), tape.param(lp.b1));
  Var hidden;
  if (enc.ffn == FfnKind::kSglu) {
    Var gate = ad::add_bias(ad::matmul(x, tape.param(lp.w2)), tape.param(lp.b2));
    hidden = ad::mul(ad::swish(a), gate);
  } else {
    hidden = ad::relu(a);
  }
  return ad::add_bias(ad::matmul(hidden, tape.param(lp.w3)), tape.param(lp.b3));
}

Var encoder_forward(Tape& tape, Var embeddings, const PolicyParams& params) {
  const auto& cfg = params.config;
  const auto& enc = cfg.encoder;
  if (embeddings.cols() != enc.embed_dim) {
    fail(ErrorCode::kShapeMismatch, fmt::format("embeddings have width {}, expected {}",
                                                embeddings.cols(), enc.embed_dim));
  }
  Var h = embeddings;
  for (const auto& lp : params.layers) {
    if (enc.placement == NormPlacement::kPre) {
      h = ad::add(h, self_attention(tape, normalize(tape, h, lp.norm1_gain, lp.norm1_bias, cfg), lp, enc));
      h = ad::add(h, feed_forward(tape, normalize(tape, h, lp.norm2_gain, lp.norm2_bias, cfg), lp, enc));
    } else {
      h = normalize(tape, ad::add(h, self_attention(tape, h, lp, enc)), lp.norm1_gain,
                    lp.norm1_bias, cfg);
      h = normalize(tape, ad::add(h, feed_forward(tape, h, lp, enc)), lp.norm2_gain,
                    lp.norm2_bias, cfg);
    }
  }
  if (!h.value().allFinite()) fail(ErrorCode::kNonFiniteActivation, "encoder output is not finite");
  return h;
}

DecoderCache prepare_decoder(Tape& tape, Var encodings, const Instance& inst,
                             const PolicyParams& params) {
  DecoderCache c;
  c.depot_tokens = static_cast<int>(inst.depots.size());
  if (encodings.rows() != c.depot_tokens + static_cast<Eigen::Index>(inst.network.size())) {
    fail(ErrorCode::kShapeMismatch, "encodings do not match the instance");
  }
  c.tokens = encodings;
  std::vector<int> depot_rows(static_cast<std::size_t>(c.depot_tokens));
  for (int k = 0; k < c.depot_tokens; ++k) depot_rows[k] = k;
  c.context_rows = ad::concat_rows({encodings, ad::mean_rows(ad::gather_rows(encodings, depot_rows))});
  c.glimpse_k = ad::matmul(encodings, tape.param(params.dec_wk));
  c.glimpse_v = ad::matmul(encodings, tape.param(params.dec_wv));
  c.score_k = ad::matmul(encodings, tape.param(params.score_wk));
  return c;
}

Var decode_log_probs(Tape& tape, const DecoderCache& cache, const Instance& inst,
                     const std::vector<const State*>& states, const ad::BoolMatrix& masks,
                     const PolicyParams& params) {
  const auto& net = inst.network;
  const auto rows = static_cast<Eigen::Index>(states.size());
  const auto n = static_cast<Eigen::Index>(net.size());
  const int nd = cache.depot_tokens;
  if (masks.rows() != rows || masks.cols() != n) {
    fail(ErrorCode::kShapeMismatch, "decode masks do not match the states");
  }
  const int d = params.config.encoder.embed_dim;
  const int extra = params.md_expanded ? 4 : 2;
  if (params.ctx_w.value.rows() != d + extra) {
    fail(ErrorCode::kShapeMismatch, "context projection width does not match the expansion flag");
  }

  std::vector<int> source(static_cast<std::size_t>(rows), 0);
  Matrix features = Matrix::Zero(rows, extra);
  ad::BoolMatrix token_mask = ad::BoolMatrix::Constant(rows, nd + n, false);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const State& s = *states[r];
    token_mask.row(r).tail(n) = masks.row(r);
    if (s.done) continue;
    if (s.current == kNoNode) {
      source[r] = nd + static_cast<int>(n);  // mean depot token
    } else if (s.current == s.origin && s.clock == 0.0 && s.routes.back().size() == 1) {
      source[r] = inst.depot_index(s.origin);
    } else {
      source[r] = nd + s.current;
    }
    features(r, 0) = s.clock / inst.p_max;
    features(r, 1) = static_cast<double>(s.drone) / inst.drones;
    if (params.md_expanded && s.origin != kNoNode) {
      const auto pos = net.position(s.origin);
      features(r, 2) = pos.x;
      features(r, 3) = pos.y;
    }
  }

  Var ctx = ad::concat_cols({ad::gather_rows(cache.context_rows, source), tape.constant(std::move(features))});
  Var h = ad::add_bias(ad::matmul(ctx, tape.param(params.ctx_w)), tape.param(params.ctx_b));
  ad::AttentionOptions opt;
  opt.heads = params.config.decoder_heads;
  opt.kind = AttentionKind::kStandard;
  opt.mask = &token_mask;
  Var glimpse = ad::matmul(
      ad::attention(ad::matmul(h, tape.param(params.dec_wq)), cache.glimpse_k, cache.glimpse_v, opt),
      tape.param(params.dec_wo));
  Var u = ad::scale(ad::matmul_nt(ad::matmul(glimpse, tape.param(params.score_wq)), cache.score_k),
                    1.0 / std::sqrt(static_cast<double>(d)));
  Var logits = ad::scale(ad::tanh(u), params.config.tanh_clip);
  return ad::slice_cols(ad::masked_log_softmax(logits, token_mask), nd, n);
}

namespace {

DecoderCache encode(Tape& tape, const Instance& inst, const PolicyParams& params) {
  Var h = encoder_forward(tape, embed_inputs(tape, inst, params), params);
  return prepare_decoder(tape, h, inst, params);
}

}  // namespace

std::vector<double> decode_step(const Instance& inst, const PolicyParams& params,
                                const State& state, const EnvOptions& options) {
  Env env(inst, options);
  std::vector<char> buf;
  if (state.done || env.mask_into(state, buf) == 0) {
    fail(ErrorCode::kAllMasked, "no feasible action in this state");
  }
  const auto n = static_cast<Eigen::Index>(inst.network.size());
  ad::BoolMatrix mask(1, n);
  for (Eigen::Index i = 0; i < n; ++i) mask(0, i) = buf[i] != 0;
  Tape tape(false);
  const DecoderCache cache = encode(tape, inst, params);
  Var lp = decode_log_probs(tape, cache, inst, {&state}, mask, params);
  std::vector<double> p(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask(0, i)) p[i] = std::exp(lp.value()(0, i));
  }
  return p;
}

namespace {

// Shared decoding loop; `forced` (when set) dictates every action.
GroupRollout run_group(Tape& tape, const Instance& inst, const PolicyParams& params,
                       DecodeMode mode, int group, Rng* rng,
                       const std::vector<std::vector<int>>* forced, const EnvOptions& options) {
  if (group < 1) fail(ErrorCode::kInvalidConfig, "rollout needs at least one sample");
  const Env env(inst, options);
  const auto n = static_cast<Eigen::Index>(inst.network.size());
  const DecoderCache cache = encode(tape, inst, params);

  std::vector<State> states(static_cast<std::size_t>(group), env.reset());
  std::vector<const State*> views;
  for (const auto& s : states) views.push_back(&s);
  GroupRollout out;
  out.actions.resize(static_cast<std::size_t>(group));
  Var total = tape.constant(Matrix::Zero(group, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<char> buf;
  ad::BoolMatrix mask(group, n);
  std::vector<int> actions(static_cast<std::size_t>(group));

  while (true) {
    bool active = false;
    for (int g = 0; g < group; ++g) {
      if (states[g].done) {
        mask.row(g).setConstant(false);
        continue;
      }
      active = true;
      env.mask_into(states[g], buf);
      for (Eigen::Index i = 0; i < n; ++i) mask(g, i) = buf[i] != 0;
    }
    if (!active) break;
    Var lp = decode_log_probs(tape, cache, inst, views, mask, params);
    const Matrix& v = lp.value();
    for (int g = 0; g < group; ++g) {
      actions[g] = -1;
      if (states[g].done) continue;
      int pick = -1;
      if (forced) {
        const auto& seq = (*forced)[g];
        const auto step = out.actions[g].size();
        if (step >= seq.size()) {
          fail(ErrorCode::kInfeasibleAction, fmt::format("episode {} ends before its actions", g));
        }
        pick = seq[step];
        if (pick < 0 || pick >= n || !mask(g, pick)) {
          fail(ErrorCode::kInfeasibleAction, fmt::format("action {} of episode {} is masked", pick, g));
        }
      } else if (mode == DecodeMode::kGreedy) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (mask(g, i) && (pick < 0 || v(g, i) > v(g, pick))) pick = static_cast<int>(i);
        }
      } else {
        double u = unit(*rng);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (!mask(g, i)) continue;
          pick = static_cast<int>(i);
          u -= std::exp(v(g, i));
          if (u < 0.0) break;
        }
      }
      actions[g] = pick;
      out.actions[g].push_back(pick);
    }
    total = ad::add(total, ad::pick(lp, actions));
    for (int g = 0; g < group; ++g) {
      if (actions[g] >= 0) env.apply(states[g], actions[g]);
    }
  }
  if (forced) {
    for (int g = 0; g < group; ++g) {
      if (out.actions[g].size() != (*forced)[g].size()) {
        fail(ErrorCode::kInfeasibleAction, fmt::format("episode {} ended before its last action", g));
      }
    }
  }

  out.log_prob = total;
  for (const auto& s : states) {
    out.solutions.push_back(env.solution(s));
    out.rewards.push_back(out.solutions.back().value);
  }
  return out;
}

}  // namespace

GroupRollout rollout_group(Tape& tape, const Instance& inst, const PolicyParams& params,
                           DecodeMode mode, int group, Rng& rng, const EnvOptions& options) {
  return run_group(tape, inst, params, mode, group, &rng, nullptr, options);
}

GroupRollout replay_group(Tape& tape, const Instance& inst, const PolicyParams& params,
                          const std::vector<std::vector<int>>& actions, const EnvOptions& options) {
  return run_group(tape, inst, params, DecodeMode::kGreedy, static_cast<int>(actions.size()),
                   nullptr, &actions, options);
}

std::vector<RolloutResult> rollout(const Instance& inst, const PolicyParams& params,
                                   DecodeMode mode, int n_samples, Rng& rng,
                                   const EnvOptions& options) {
  Tape tape(false);
  GroupRollout g = rollout_group(tape, inst, params, mode, n_samples, rng, options);
  std::vector<RolloutResult> out;
  for (int i = 0; i < n_samples; ++i) {
    out.push_back({std::move(g.solutions[i]), g.log_prob.value()(i, 0)});
  }
  return out;
}

PolicyParams expand_for_md(const PolicyParams& params) {
  if (params.md_expanded) fail(ErrorCode::kAlreadyExpanded, "parameters are already expanded");
  PolicyParams out = params;
  const auto rows = out.ctx_w.value.rows();
  out.ctx_w.value.conservativeResize(rows + 2, Eigen::NoChange);
  out.ctx_w.value.bottomRows(2).setZero();
  out.md_expanded = true;
  return out;
}

}  // namespace pdra
