#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "pdra/checkpoint.hpp"
#include "pdra/error.hpp"
#include "pdra/evaluation.hpp"
#include "pdra/milp.hpp"
#include "pdra/serialization.hpp"
#include "pdra/solvers.hpp"
#include "pdra/training.hpp"
#include "pdra/validator.hpp"

namespace pdra::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GenerateArgs {
  int nodes = 20;
  int count = 1;
  std::uint64_t seed = 0;
  std::string out;
  std::string variant;
  std::optional<double> p_max;
  std::optional<int> drones;
  int depots = 0;
  bool integer_values = false;
};

struct TransformArgs {
  std::string network;
  std::string out;
  bool no_aux = false;
};

struct IngestArgs {
  std::string nodes;
  std::string links;
  std::string out;
  std::string transformed;
  std::uint64_t seed = 1;
};

struct SolveArgs {
  std::string method = "greedy";
  std::string instance;
  std::string out;
  std::uint64_t seed = 0;
  bool tw_on_completion = false;
};

struct TrainArgs {
  std::string config;
  std::string checkpoint;  // finetune only
  std::string out;
  std::string metrics;
  std::optional<int> epochs;
  std::optional<int> iterations;
  std::optional<int> heldout;
  std::optional<std::uint64_t> seed;
  std::optional<int> depots;
};

struct EvalArgs {
  std::vector<std::string> instances;
  std::vector<std::string> methods;
  std::string reference;
  std::string out;
  std::string json_out;
  std::string plot;
  std::uint64_t seed = 0;
};

struct MilpArgs {
  std::string instance;
  std::string variant;
  std::string out;
};

AttributeConfig parse_variant(const std::string& name) {
  try {
    return AttributeConfig::from_variant_name(name);
  } catch (const Error&) {
    fail(ErrorCode::kUsageError, fmt::format("unknown variant '{}'", name));
  }
}

int run_generate(const GenerateArgs& a, std::ostream& out) {
  if (a.count < 1) fail(ErrorCode::kUsageError, "--count must be >= 1");
  auto gen = GenConfig::for_total_nodes(a.nodes);
  gen.integer_values = a.integer_values;
  gen.seed = a.seed;
  InstanceConfig ic;
  if (!a.variant.empty()) ic.attrs = parse_variant(a.variant);
  ic.p_max = a.p_max;
  ic.drones = a.drones;
  ic.depot_count = a.depots > 0 ? a.depots : (ic.attrs && ic.attrs->multi_depot ? 2 : 1);
  Rng rng(a.seed);
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    const auto inst = generate_instance(gen, ic, rng);
    const auto path = fs::path(a.out) / fmt::format("instance_{:04d}.json", i);
    write_file(path, instance_to_json(inst));
    out << path.string() << "\n";
  }
  return 0;
}

int run_transform(const TransformArgs& a, std::ostream& out) {
  const auto net = network_from_json(read_file(a.network));
  const auto tn = transform(net);
  write_file(a.out, transformed_to_json(tn, !a.no_aux));
  out << json{{"original_nodes", tn.original_count()}, {"nodes", tn.size()}}.dump() << "\n";
  return 0;
}

int run_ingest(const IngestArgs& a, std::ostream& out) {
  TntpOptions opt;
  opt.seed = a.seed;
  const auto net = ingest_tntp(read_file(a.nodes), read_file(a.links), opt);
  write_file(a.out, network_to_json(net));
  const auto tn = transform(net);
  if (!a.transformed.empty()) write_file(a.transformed, transformed_to_json(tn));
  out << json{{"nodes", net.nodes().size()}, {"links", net.links().size()}, {"transformed_nodes", tn.size()}}
             .dump()
      << "\n";
  return 0;
}

int run_solve(const SolveArgs& a, std::ostream& out) {
  const auto inst = instance_from_json(read_file(a.instance));
  const auto method = parse_method(a.method);
  EnvOptions env;
  env.tw_on_completion = a.tw_on_completion;
  Rng rng(a.seed);
  const auto t0 = std::chrono::steady_clock::now();
  Solution sol;
  switch (method.kind) {
    case MethodKind::kGreedy:
      sol = greedy_heuristic(inst, env);
      break;
    case MethodKind::kRandom:
      sol = random_policy_rollout(inst, rng, env);
      break;
    case MethodKind::kOracle:
      sol = exact_oracle(inst, env);
      break;
    case MethodKind::kNeural:
      sol = rollout(inst, *method.params, DecodeMode::kGreedy, 1, rng).front().solution;
      break;
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto report = validate_solution(inst, sol, env);
  if (!a.out.empty()) write_file(a.out, solution_to_json(sol));
  out << json{{"method", method.name},
              {"value", sol.value},
              {"feasible", report.feasible},
              {"time_s", elapsed}}
             .dump()
      << "\n";
  return 0;
}

TrainConfig load_train_config(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = train_config_from_json(read_file(a.config));
  if (a.epochs) {
    cfg.epochs = *a.epochs;
    if (!cfg.milestones.empty() && a.config.empty()) cfg.milestones.clear();
  }
  if (a.iterations) cfg.iterations = *a.iterations;
  if (a.heldout) cfg.heldout_size = *a.heldout;
  if (a.seed) cfg.seed = *a.seed;
  if (a.depots) cfg.depot_count = *a.depots;
  cfg.validate();
  return cfg;
}

EpochCallback progress(std::ostream& out) {
  return [&out](int epoch, const std::vector<MetricsRow>& rows) {
    std::string line = fmt::format("epoch {}", epoch);
    for (const auto& r : rows) line += fmt::format("  {} {:.4f}", r.regime, r.greedy_eval);
    out << line << "\n" << std::flush;
  };
}

int finish_training(const TrainResult& result, const TrainArgs& a) {
  save_checkpoint(result.params, a.out);
  if (!a.metrics.empty()) write_file(a.metrics, metrics_to_csv(result.metrics));
  return 0;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  const auto cfg = load_train_config(a);
  return finish_training(train(cfg, progress(out)), a);
}

int run_finetune(const TrainArgs& a, std::ostream& out) {
  const auto start = load_checkpoint(a.checkpoint);
  const auto cfg = load_train_config(a);
  return finish_training(finetune_md(start, cfg, progress(out)), a);
}

std::vector<fs::path> expand_paths(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  return files;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<Instance> instances;
  for (const auto& f : expand_paths(a.instances)) instances.push_back(instance_from_json(read_file(f)));
  std::vector<Method> methods;
  for (const auto& m : a.methods) methods.push_back(parse_method(m));
  EvalOptions opt;
  opt.reference = a.reference;
  opt.seed = a.seed;
  const auto result = evaluate(instances, methods, opt);
  if (!a.out.empty()) write_file(a.out, gap_table_csv(result.records));
  if (!a.json_out.empty()) write_file(a.json_out, gap_table_json(result.records));
  if (!a.plot.empty()) write_file(a.plot, plot_csv(result.instances));
  out << gap_table_text(result.records);
  return 0;
}

int run_export_milp(const MilpArgs& a, std::ostream& out) {
  const auto inst = instance_from_json(read_file(a.instance));
  const auto attrs = a.variant.empty() ? inst.attrs : parse_variant(a.variant);
  const auto exported = export_milp(inst, attrs);
  if (a.out.empty()) {
    out << exported.lp;
  } else {
    write_file(a.out, exported.lp);
    out << json{{"variables", exported.model.vars.size()}, {"constraints", exported.model.rows.size()}}.dump()
        << "\n";
  }
  return 0;
}

void report(std::ostream& err, std::string_view kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << "\n";
}

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "training config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "checkpoint path")->required();
  cmd->add_option("--metrics", a.metrics, "per-epoch metrics CSV");
  cmd->add_option("--epochs", a.epochs);
  cmd->add_option("--iterations", a.iterations, "iterations per epoch");
  cmd->add_option("--heldout", a.heldout, "held-out instances per regime");
  cmd->add_option("--seed", a.seed);
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-disaster road assessment routing toolkit", "pdra"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "generate random instances");
  generate->add_option("--nodes", gen.nodes, "approximate transformed node count");
  generate->add_option("--count", gen.count);
  generate->add_option("--seed", gen.seed);
  generate->add_option("--out", gen.out, "output directory")->required();
  generate->add_option("--variant", gen.variant, "fix the attributes (basic, or, tw, or-tw, md, ...)");
  generate->add_option("--p-max", gen.p_max, "fixed flight-time limit");
  generate->add_option("--drones", gen.drones, "fixed drone count");
  generate->add_option("--depots", gen.depots, "depot count (default 1, or 2 for md variants)");
  generate->add_flag("--integer-values", gen.integer_values, "link values from {1..10}/10");

  TransformArgs tr;
  auto* transform_cmd = app.add_subcommand("transform", "road network JSON to transformed network JSON");
  transform_cmd->add_option("--network", tr.network)->required()->check(CLI::ExistingFile);
  transform_cmd->add_option("--out", tr.out)->required();
  transform_cmd->add_flag("--no-aux", tr.no_aux, "omit the auxiliary arcs");

  IngestArgs ing;
  auto* ingest = app.add_subcommand("ingest", "read TNTP node and link files");
  ingest->add_option("--nodes", ing.nodes, "node table (TNTP or GeoJSON)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--links", ing.links, "link table")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", ing.out, "road network JSON")->required();
  ingest->add_option("--transformed", ing.transformed, "also write the transformed network");
  ingest->add_option("--seed", ing.seed, "seed for sampled link values");

  SolveArgs sv;
  auto* solve = app.add_subcommand("solve", "solve one instance");
  solve->add_option("--method", sv.method, "greedy, random, oracle or neural=<checkpoint>");
  solve->add_option("--instance", sv.instance)->required()->check(CLI::ExistingFile);
  solve->add_option("--out", sv.out, "solution JSON");
  solve->add_option("--seed", sv.seed);
  solve->add_flag("--tw-on-completion", sv.tw_on_completion, "windows bound link completion");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a policy from scratch");
  add_train_options(train_cmd, ta);

  TrainArgs fa;
  auto* finetune = app.add_subcommand("finetune", "multi-depot finetuning of a checkpoint");
  add_train_options(finetune, fa);
  finetune->add_option("--checkpoint", fa.checkpoint)->required()->check(CLI::ExistingFile);
  finetune->add_option("--depots", fa.depots, "depots per instance (>= 2)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "gap table over a set of instances");
  eval->add_option("--instances", ev.instances, "instance files or directories")->required();
  eval->add_option("--method", ev.methods, "repeatable; [name:]greedy|random|oracle|neural=<ckpt>")
      ->required();
  eval->add_option("--reference", ev.reference, "reference method name (default: first)");
  eval->add_option("--out", ev.out, "gap table CSV");
  eval->add_option("--json", ev.json_out, "gap table JSON");
  eval->add_option("--plot", ev.plot, "long-format CSV");
  eval->add_option("--seed", ev.seed);

  MilpArgs ma;
  auto* milp = app.add_subcommand("export-milp", "write the MILP model as LP text");
  milp->add_option("--instance", ma.instance)->required()->check(CLI::ExistingFile);
  milp->add_option("--variant", ma.variant, "constraint set (default: the instance's)");
  milp->add_option("--out", ma.out, "LP file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report(err, error_name(ErrorCode::kUsageError), e.what());
    return 2;
  }

  try {
    if (generate->parsed()) return run_generate(gen, out);
    if (transform_cmd->parsed()) return run_transform(tr, out);
    if (ingest->parsed()) return run_ingest(ing, out);
    if (solve->parsed()) return run_solve(sv, out);
    if (train_cmd->parsed()) return run_train(ta, out);
    if (finetune->parsed()) return run_finetune(fa, out);
    if (eval->parsed()) return run_eval(ev, out);
    if (milp->parsed()) return run_export_milp(ma, out);
  } catch (const Error& e) {
    report(err, error_name(e.code()), e.what());
    return e.code() == ErrorCode::kUsageError ? 2 : 1;
  } catch (const fs::filesystem_error& e) {
    report(err, error_name(ErrorCode::kIoError), e.what());
    return 1;
  } catch (const std::exception& e) {
    report(err, "InternalError", e.what());
    return 1;
  }
  return 2;
}

}  // namespace pdra::cli
