// Acceptance suite: one pass/fail line per criterion.
//
//   pdra_acceptance [--criterion N]... [--workdir DIR]
//
// Exit status: 1 when any selected criterion fails, 77 when every selected
// criterion was skipped, 0 otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "pdra/autodiff.hpp"
#include "pdra/checkpoint.hpp"
#include "pdra/env.hpp"
#include "pdra/error.hpp"
#include "pdra/evaluation.hpp"
#include "pdra/milp.hpp"
#include "pdra/network.hpp"
#include "pdra/policy.hpp"
#include "pdra/solvers.hpp"
#include "pdra/training.hpp"
#include "pdra/validator.hpp"
#include "testkit.hpp"

using namespace pdra;
namespace fs = std::filesystem;
using ad::Matrix;
using Clock = std::chrono::steady_clock;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kFail;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Status::kPass : Status::kFail, std::move(detail)}; }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

fs::path g_workdir;

fs::path checkpoint_path() { return g_workdir / "desk_policy.json"; }

// 1 ------------------------------------------------------------------------

Outcome transformation() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::uniform_int_distribution<int> size(10, 60);
  int bad = 0;
  std::string first_error;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = generate_instance(GenConfig::for_total_nodes(size(rng)), {}, rng);
    const auto& net = inst.network.source();
    const auto tn = transform(net);
    auto err = testkit::check_transform(net, tn);
    if (tn.size() != net.node_count() + net.link_count()) err += " size";
    if (!err.empty()) {
      if (first_error.empty()) first_error = err;
      ++bad;
    }
  }
  const double t = seconds_since(t0);
  return pass_if(bad == 0 && t < 5.0,
                 fmt::format("1000 networks, {} violations{}, {:.2f} s (limit 5 s)", bad,
                             first_error.empty() ? "" : " (" + first_error + ")", t));
}

// 2 ------------------------------------------------------------------------

std::optional<fs::path> anaheim_dir() {
  std::vector<fs::path> candidates;
  if (const char* env = std::getenv("PDRA_ANAHEIM_DIR")) candidates.emplace_back(env);
  candidates.push_back(fs::path(PDRA_SOURCE_DIR) / "tests" / "data" / "anaheim");
  for (const auto& c : candidates) {
    if (fs::exists(c / "Anaheim_net.tntp") &&
        (fs::exists(c / "anaheim_nodes.geojson") || fs::exists(c / "Anaheim_node.tntp"))) {
      return c;
    }
  }
  return std::nullopt;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome anaheim() {
  const auto dir = anaheim_dir();
  if (!dir) {
    return {Status::kSkip,
            "Anaheim TNTP files not found (set PDRA_ANAHEIM_DIR or add tests/data/anaheim with "
            "Anaheim_net.tntp and anaheim_nodes.geojson or Anaheim_node.tntp)"};
  }
  const auto nodes_file = fs::exists(*dir / "anaheim_nodes.geojson") ? *dir / "anaheim_nodes.geojson"
                                                                      : *dir / "Anaheim_node.tntp";
  const std::string nodes = slurp(nodes_file);
  const std::string links = slurp(*dir / "Anaheim_net.tntp");
  const auto t0 = Clock::now();
  const auto net = ingest_tntp(nodes, links);
  const auto tn = transform(net);
  const double t = seconds_since(t0);
  return pass_if(net.node_count() == 416 && net.link_count() == 914 && tn.size() == 1330 && t < 2.0,
                 fmt::format("{} nodes, {} links, {} transformed nodes, {:.2f} s (limit 2 s)",
                             net.node_count(), net.link_count(), tn.size(), t));
}

// 3 ------------------------------------------------------------------------

Outcome feasibility_fuzz() {
  const auto t0 = Clock::now();
  Rng rng(303);
  std::uniform_int_distribution<int> size(12, 40);
  int infeasible = 0, replay_errors = 0;
  std::map<std::string, int> per_variant;
  for (int i = 0; i < 10000; ++i) {
    InstanceConfig ic;
    ic.attrs = AttributeConfig::from_regime(i % 8);
    ic.depot_count = ic.attrs->multi_depot ? 2 : 1;
    const auto inst = generate_instance(GenConfig::for_total_nodes(size(rng)), ic, rng);
    const EnvOptions opt{i % 5 == 0};
    const auto sol = random_policy_rollout(inst, rng, opt);
    ++per_variant[inst.attrs.variant_name()];
    const auto report = validate_solution(inst, sol, opt);
    if (!report.feasible) {
      ++infeasible;
      continue;
    }
    try {
      const Env env(inst, opt);
      replay(env, sol);
    } catch (const Error&) {
      ++replay_errors;
    }
  }
  const double t = seconds_since(t0);
  return pass_if(infeasible == 0 && replay_errors == 0 && per_variant.size() == 8 && t < 120.0,
                 fmt::format("10000 rollouts over {} variants, {} infeasible, {} replay failures, "
                             "{:.1f} s (limit 120 s)",
                             per_variant.size(), infeasible, replay_errors, t));
}

// 4 ------------------------------------------------------------------------

Outcome oracle_suite() {
  const auto t0 = Clock::now();
  Rng rng(404);
  int below_greedy = 0, below_random = 0, enum_mismatch = 0, open_below = 0, too_big = 0;
  for (int i = 0; i < 200; ++i) {
    testkit::TinyOptions opt;
    opt.attrs = AttributeConfig::from_regime(i % 8);
    opt.originals = 3 + i % 3;
    const auto inst = testkit::tiny_instance(rng, opt);
    if (inst.network.size() - inst.network.original_count() > 5) ++too_big;
    const double best = exact_oracle(inst).value;
    if (best < greedy_heuristic(inst).value) ++below_greedy;
    Rng r(static_cast<std::uint64_t>(i));
    if (best < random_policy_rollout(inst, r).value) ++below_random;
    if (best != testkit::enumerate_best(inst)) ++enum_mismatch;
    auto closed = inst;
    closed.attrs.open_route = false;
    auto open = inst;
    open.attrs.open_route = true;
    if (exact_oracle(open).value < exact_oracle(closed).value) ++open_below;
  }
  const double t = seconds_since(t0);
  const bool ok = below_greedy + below_random + enum_mismatch + open_below + too_big == 0 && t < 300.0;
  return pass_if(ok, fmt::format("200 instances: greedy above oracle {}, random above oracle {}, "
                                 "enumerator mismatches {}, open below closed {}, oversized {}, "
                                 "{:.1f} s (limit 300 s)",
                                 below_greedy, below_random, enum_mismatch, open_below, too_big, t));
}

// 5 ------------------------------------------------------------------------

Outcome milp_checks() {
  const auto t0 = Clock::now();
  Rng rng(505);
  int family_errors = 0;
  for (const auto& attrs : all_variants()) {
    testkit::TinyOptions opt;
    opt.attrs = attrs;
    const auto inst = testkit::tiny_instance(rng, opt);
    if (testkit::lp_families(export_milp(inst, attrs).lp) != testkit::expected_families(attrs)) {
      ++family_errors;
    }
  }
  int above = 0, unequal = 0, checked_equal = 0;
  for (int i = 0; i < 50; ++i) {
    const auto inst = testkit::milp_tiny_instance(rng, i);
    const auto milp = enumerate_milp(build_milp(inst, inst.attrs));
    const auto oracle = exact_oracle(inst);
    if (!milp.feasible || milp.objective > oracle.value + 1e-9) ++above;
    if (!testkit::repeats_original(inst, oracle)) {
      ++checked_equal;
      if (std::abs(milp.objective - oracle.value) > 1e-9) ++unequal;
    }
  }
  const double t = seconds_since(t0);
  return pass_if(family_errors == 0 && above == 0 && unequal == 0 && t < 300.0,
                 fmt::format("family mismatches {}/8, MILP above oracle {}/50, unequal {}/{} "
                             "without repeats, {:.1f} s (limit 300 s)",
                             family_errors, above, unequal, checked_equal, t));
}

// 6 ------------------------------------------------------------------------

Outcome neural_numerics() {
  const auto t0 = Clock::now();
  Rng rng(606);
  std::uniform_int_distribution<int> rows(1, 24);
  std::bernoulli_distribution keep(0.6);
  double worst_sum = 0.0, worst_block = 0.0;
  int masked_nonzero = 0;
  for (int s = 0; s < 10000; ++s) {
    const int nq = rows(rng), nk = rows(rng);
    const int heads = s % 2 == 0 ? 2 : 4;
    const int d = heads * 4;
    const Matrix q = random_matrix(rng, nq, d), k = random_matrix(rng, nk, d), v = random_matrix(rng, nk, d);
    ad::BoolMatrix mask(nq, nk);
    for (int i = 0; i < nq; ++i) {
      for (int j = 0; j < nk; ++j) mask(i, j) = keep(rng);
      mask(i, static_cast<int>(rng() % nk)) = true;
    }
    const Matrix w = ad::attention_weights(q.leftCols(4), k.leftCols(4), &mask);
    for (int i = 0; i < nq; ++i) {
      worst_sum = std::max(worst_sum, std::abs(w.row(i).sum() - 1.0));
      for (int j = 0; j < nk; ++j) {
        if (!mask(i, j) && w(i, j) != 0.0) ++masked_nonzero;
      }
    }
    if (s % 10 == 0) {
      ad::Tape tape(false);
      ad::AttentionOptions standard{heads, ad::AttentionKind::kStandard, 32, &mask};
      ad::AttentionOptions blockwise{heads, ad::AttentionKind::kBlockwise, 1 + s % 7, &mask};
      const Matrix a = ad::attention(tape.constant(q), tape.constant(k), tape.constant(v), standard).value();
      const Matrix b = ad::attention(tape.constant(q), tape.constant(k), tape.constant(v), blockwise).value();
      worst_block = std::max(worst_block, (a - b).cwiseAbs().maxCoeff());
    }
  }

  // Policy decode distributions over reachable states.
  const auto params = init_policy(PolicyConfig{}, 9);
  const auto md_params = expand_for_md(params);
  int decode_states = 0, decode_masked = 0;
  double decode_sum = 0.0;
  for (int i = 0; decode_states < 10000; ++i) {
    InstanceConfig ic;
    ic.attrs = AttributeConfig::from_regime(i % 8);
    ic.depot_count = ic.attrs->multi_depot ? 2 : 1;
    const auto inst = generate_instance(GenConfig::for_total_nodes(20), ic, rng);
    const Env env(inst);
    State s = env.reset();
    const auto& p = ic.attrs->multi_depot ? md_params : params;
    while (!s.done) {
      const auto mask = env.feasible_mask(s);
      const auto probs = decode_step(inst, p, s);
      double total = 0.0;
      std::vector<int> allowed;
      for (std::size_t a = 0; a < probs.size(); ++a) {
        if (!mask[a] && probs[a] != 0.0) ++decode_masked;
        if (mask[a]) allowed.push_back(static_cast<int>(a));
        total += probs[a];
      }
      decode_sum = std::max(decode_sum, std::abs(total - 1.0));
      ++decode_states;
      env.apply(s, allowed[rng() % allowed.size()]);
    }
  }

  ad::Tape tape(false);
  const auto& lp = params.layers[0];
  double worst_sglu = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Matrix in = random_matrix(rng, 1 + s % 20, params.config.encoder.embed_dim);
    const Matrix out = feed_forward(tape, tape.constant(in), lp, params.config.encoder).value();
    const Matrix ref = testkit::naive_sglu(in, lp.w1.value, lp.b1.value, lp.w2.value, lp.b2.value,
                                           lp.w3.value, lp.b3.value);
    worst_sglu = std::max(worst_sglu, (out - ref).cwiseAbs().maxCoeff());
  }
  Matrix x(1, 2);
  x << 3.0, 4.0;
  const Matrix r = ad::rms_norm(tape.constant(x), tape.constant(Matrix::Ones(1, 2))).value();
  const bool rms_ok = std::abs(r(0, 0) - 0.8485) <= 1e-3 && std::abs(r(0, 1) - 1.1314) <= 1e-3;

  const double t = seconds_since(t0);
  const bool ok = worst_sum < 1e-6 && masked_nonzero == 0 && decode_sum < 1e-6 && decode_masked == 0 &&
                  worst_block < 1e-5 && worst_sglu < 1e-6 && rms_ok && t < 60.0;
  return pass_if(ok, fmt::format("10000 attention states: max |row sum - 1| {:.1e}, masked nonzero {}; "
                                 "{} decode states: max |sum - 1| {:.1e}, masked nonzero {}; "
                                 "blockwise vs standard {:.1e}; SGLU {:.1e}; RMS [{:.4f}, {:.4f}]; "
                                 "{:.1f} s (limit 60 s)",
                                 worst_sum, masked_nonzero, decode_states, decode_sum, decode_masked,
                                 worst_block, worst_sglu, r(0, 0), r(0, 1), t));
}

// 7 ------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  PolicyConfig pc;
  pc.encoder.embed_dim = 8;
  pc.encoder.layers = 1;
  pc.encoder.heads = 2;
  pc.encoder.ffn_hidden = 16;
  pc.decoder_heads = 2;
  auto params = init_policy(pc, 77);

  // Triangle road network: 3 original + 3 artificial nodes.
  const auto net = build_road_network({{0, 0.1, 0.1}, {1, 0.7, 0.2}, {2, 0.4, 0.8}},
                                      {{0, 1, 0.65, 0.5}, {1, 2, 0.7, 0.3}, {2, 0, 0.8, 0.9}});
  Instance inst;
  inst.network = transform(net);
  inst.p_max = 2.5;
  inst.battery = 8.0;
  inst.drones = 2;
  inst.latest.assign(inst.network.size(), kUnbounded);
  inst.depots = {0};
  inst.depot_capacity = {2};

  Rng rng(7);
  const int group = 6;
  std::vector<std::vector<int>> actions;
  std::vector<double> rewards;
  {
    ad::Tape tape(false);
    const auto g = rollout_group(tape, inst, params, DecodeMode::kSample, group, rng);
    actions = g.actions;
    rewards = g.rewards;
  }
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / group;
  Matrix weights(group, 1);
  for (int g = 0; g < group; ++g) weights(g, 0) = -((rewards[g] - mean) + 0.1 * (g + 1)) / group;

  auto loss_of = [&](ad::Tape& tape) {
    const auto r = replay_group(tape, inst, params, actions);
    return ad::weighted_sum(r.log_prob, weights);
  };

  ad::Tape tape;
  const auto loss = loss_of(tape);
  tape.backward(loss);
  int total = 0, good = 0;
  double worst = 0.0;
  for (auto* p : params.all()) {
    const Matrix grad = tape.grad_of(*p);
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double fd = testkit::central_difference(
          [&] {
            ad::Tape t(false);
            return loss_of(t).scalar();
          },
          p->value.data()[i], 1e-4);
      const double an = grad.data()[i];
      const double scale = std::max(std::abs(an), std::abs(fd));
      const double rel = scale < 1e-12 ? 0.0 : std::abs(an - fd) / scale;
      ++total;
      if (rel < 1e-4) ++good;
      worst = std::max(worst, rel);
    }
  }
  const double frac = static_cast<double>(good) / total;
  const double t = seconds_since(t0);
  return pass_if(frac >= 0.95 && t < 120.0,
                 fmt::format("{} of {} parameters within 1e-4 relative error ({:.2f}%), max {:.1e}, "
                             "{:.1f} s (limit 120 s)",
                             good, total, 100.0 * frac, worst, t));
}

// 8 ------------------------------------------------------------------------

Outcome adapter_identity() {
  const auto t0 = Clock::now();
  Rng rng(808);
  const auto params = init_policy(PolicyConfig{}, 8);
  const auto expanded = expand_for_md(params);
  double worst = 0.0;
  int states = 0;
  for (int i = 0; i < 100; ++i) {
    InstanceConfig ic;
    ic.attrs = AttributeConfig::from_regime(i % 4);
    const auto inst = generate_instance(GenConfig::for_total_nodes(20), ic, rng);
    const Env env(inst);
    State s = env.reset();
    while (!s.done) {
      const auto a = decode_step(inst, params, s);
      const auto b = decode_step(inst, expanded, s);
      for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
      ++states;
      const auto best = std::max_element(a.begin(), a.end()) - a.begin();
      env.apply(s, static_cast<int>(best));
    }
  }
  const double t = seconds_since(t0);
  return pass_if(worst < 1e-6 && t < 60.0,
                 fmt::format("100 instances, {} states, max |dp| {:.1e}, {:.1f} s (limit 60 s)", states,
                             worst, t));
}

// 9 ------------------------------------------------------------------------

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double greedy_policy_value(const Instance& inst, const PolicyParams& params) {
  Rng unused(0);
  return rollout(inst, params, DecodeMode::kGreedy, 1, unused).front().solution.value;
}

Outcome desk_learning() {
  const auto t0 = Clock::now();
  TrainConfig cfg;  // defaults
  const auto trained = train(cfg);
  const double train_s = seconds_since(t0);
  fs::create_directories(g_workdir);
  save_checkpoint(trained.params, checkpoint_path());

  // Held-out: 50 instances per non-MD regime, disjoint seed from training.
  std::vector<double> policy, random, greedy;
  for (int r = 0; r < 4; ++r) {
    for (const auto& inst : heldout_set(cfg, AttributeConfig::from_regime(r), 50, 90000 + r)) {
      policy.push_back(greedy_policy_value(inst, trained.params));
      Rng rr(policy.size());
      random.push_back(random_policy_rollout(inst, rr).value);
      greedy.push_back(greedy_heuristic(inst).value);
    }
  }
  Rng rng(909);
  std::vector<double> tiny_policy, tiny_oracle;
  for (int i = 0; i < 100; ++i) {
    testkit::TinyOptions opt;
    opt.attrs = AttributeConfig::from_regime(i % 4);
    opt.originals = 4 + i % 2;
    opt.p_max_choices = {1.0, 1.5, 2.0};
    const auto inst = testkit::tiny_instance(rng, opt);
    tiny_policy.push_back(greedy_policy_value(inst, trained.params));
    tiny_oracle.push_back(exact_oracle(inst).value);
  }
  const double vs_random = mean_of(policy) / mean_of(random);
  const double vs_greedy = mean_of(policy) / mean_of(greedy);
  const double vs_oracle = mean_of(tiny_policy) / mean_of(tiny_oracle);
  const bool ok = train_s <= 1800.0 && vs_random >= 1.15 && vs_greedy >= 0.9 && vs_oracle >= 0.85;
  return pass_if(ok, fmt::format("training {:.0f} s (limit 1800 s); held-out 200: policy {:.3f}, "
                                 "random {:.3f} (x{:.3f}, need 1.15), greedy heuristic {:.3f} "
                                 "(x{:.3f}, need 0.9); tiny 100: {:.1f}% of oracle (need 85%)",
                                 train_s, mean_of(policy), mean_of(random), vs_random,
                                 mean_of(greedy), vs_greedy, 100.0 * vs_oracle));
}

// 10 -----------------------------------------------------------------------

Outcome md_finetune() {
  if (!fs::exists(checkpoint_path())) {
    return {Status::kFail, fmt::format("no checkpoint at {} (run criterion 09 first)",
                                       checkpoint_path().string())};
  }
  const auto pretrained = load_checkpoint(checkpoint_path());
  const auto t0 = Clock::now();
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.depot_count = 2;
  cfg.heldout_size = 20;
  cfg.seed = 10;
  const auto tuned = finetune_md(pretrained, cfg);
  const double train_s = seconds_since(t0);
  const auto zero_shot = expand_for_md(pretrained);

  int wins = 0, losses = 0, ties = 0;
  std::vector<double> a, b;
  for (int r = 0; r < 4; ++r) {
    auto attrs = AttributeConfig::from_regime(r);
    attrs.multi_depot = true;
    for (const auto& inst : heldout_set(cfg, attrs, 50, 100000 + r)) {
      const double tuned_v = greedy_policy_value(inst, tuned.params);
      const double zero_v = greedy_policy_value(inst, zero_shot);
      a.push_back(tuned_v);
      b.push_back(zero_v);
      if (tuned_v > zero_v) {
        ++wins;
      } else if (tuned_v < zero_v) {
        ++losses;
      } else {
        ++ties;
      }
    }
  }
  const double p = testkit::sign_test_p(wins, losses);
  const bool ok = mean_of(a) > mean_of(b) && p < 0.05 && train_s <= 600.0;
  return pass_if(ok, fmt::format("finetuned {:.3f} vs zero-shot {:.3f} over 200 paired instances; "
                                 "{} wins, {} losses, {} ties, sign test p = {:.2e} (need < 0.05); "
                                 "finetuning {:.0f} s (limit 600 s)",
                                 mean_of(a), mean_of(b), wins, losses, ties, p, train_s));
}

// 11 -----------------------------------------------------------------------

Outcome gap_formula() {
  const std::string a = format_percent(gap(16.17, 15.45));
  const std::string b = format_percent(gap(16.17, 16.28));
  const std::string c = format_percent(gap(16.17, 16.17));
  return pass_if(a == "4.45%" && b == "-0.68%" && c == "0.00%",
                 fmt::format("16.17 vs 15.45 -> {}, 16.17 vs 16.28 -> {}, self -> {}", a, b, c));
}

struct Criterion {
  int number;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance suite");
  std::vector<std::string> numbers;
  std::string workdir = "acceptance_work";
  app.add_option("--criterion", numbers, "criterion number (repeatable; default all)");
  app.add_option("--workdir", workdir, "directory for checkpoints shared between criteria");
  CLI11_PARSE(app, argc, argv);
  g_workdir = workdir;
  std::vector<int> selected;
  for (const auto& n : numbers) {
    try {
      selected.push_back(std::stoi(n, nullptr, 10));
    } catch (const std::exception&) {
      std::cerr << "--criterion expects a number, got '" << n << "'\n";
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "transformation suite", transformation},
      {2, "Anaheim ingestion", anaheim},
      {3, "feasibility fuzz", feasibility_fuzz},
      {4, "oracle suite", oracle_suite},
      {5, "MILP checks", milp_checks},
      {6, "neural numerics", neural_numerics},
      {7, "gradient check", gradient_check},
      {8, "adapter identity", adapter_identity},
      {9, "desk-scale learning", desk_learning},
      {10, "desk-scale MD finetuning", md_finetune},
      {11, "gap formula", gap_formula},
  };

  int passed = 0, failed = 0, skipped = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.number) == selected.end()) {
      continue;
    }
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kSkip ? "SKIP" : "FAIL";
    fmt::print("[{}] {:02d} {}: {} ({:.2f} s)\n", tag, c.number, c.title, o.detail, seconds_since(t0));
    std::fflush(stdout);
    if (o.status == Status::kPass) ++passed;
    if (o.status == Status::kFail) ++failed;
    if (o.status == Status::kSkip) ++skipped;
  }
  if (failed > 0) return 1;
  if (skipped > 0 && passed == 0) return 77;
  return 0;
}
