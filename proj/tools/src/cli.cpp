#include <algorithm>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>

#include "opcagent/app/commands.hpp"
#include "opcagent/app/manifest.hpp"
#include "opcagent/error.hpp"

namespace opcagent::app {

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string layer;
  int max_steps = 0;
  std::string kernel_file;
  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* layer_opt = nullptr;
  CLI::Option* steps_opt = nullptr;
  CLI::Option* kernel_opt = nullptr;

  void add(CLI::App& app) {
    config_opt = app.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    seed_opt = app.add_option("--seed", seed, "RNG and policy init seed");
    layer_opt = app.add_option("--layer", layer, "via or metal")
                    ->check(CLI::IsMember({"via", "metal"}));
    steps_opt = app.add_option("--max-steps", max_steps, "steps per episode")
                    ->check(CLI::PositiveNumber);
    kernel_opt = app.add_option("--kernel-file", kernel_file, "SOCS kernel file")
                     ->check(CLI::ExistingFile);
  }

  CommonOptions get() const {
    CommonOptions o;
    if (config_opt->count()) o.config = config;
    if (seed_opt->count()) o.seed = seed;
    if (layer_opt->count()) o.layer = layer_from_string(layer);
    if (steps_opt->count()) o.max_steps = max_steps;
    if (kernel_opt->count()) o.kernel_file = kernel_file;
    return o;
  }
};

void print_rows(std::ostream& out, const std::vector<CaseResult>& rows) {
  for (const auto& r : rows) {
    out << r.name << " " << r.method << " epe " << std::fixed << std::setprecision(2)
        << r.init_epe << " -> " << r.epe_total << " pvb " << std::setprecision(0) << r.pvb
        << " steps " << r.steps << (r.error.empty() ? "" : " error: " + r.error) << "\n";
    out.unsetf(std::ios::floatfield);
  }
}

// Stored arguments with --out replaced, when a new directory is given.
std::vector<std::string> replay_args(std::vector<std::string> args, const std::string& out) {
  if (out.empty()) return args;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" && i + 1 < args.size()) {
      args[i + 1] = out;
      return args;
    }
    if (args[i].rfind("--out=", 0) == 0) {
      args[i] = "--out=" + out;
      return args;
    }
  }
  args.push_back("--out");
  args.push_back(out);
  return args;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Segment-level mask correction with a learned policy", "opcagent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  GenOptions gen;
  std::string gen_layer = "via";
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "generate synthetic clips");
  gen_cmd->add_option("--layer", gen_layer, "via or metal")->check(CLI::IsMember({"via", "metal"}));
  gen_cmd->add_option("--count", gen.count, "number of clips")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", gen.seed, "dataset seed");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  TrainOptions train;
  CommonFlags train_common;
  std::string train_data, train_out;
  bool train_no_timing = false;
  auto* train_cmd = app.add_subcommand("train", "imitation then policy-gradient training");
  train_common.add(*train_cmd);
  train_cmd->add_option("--data", train_data, "directory of clip files")->required();
  train_cmd->add_option("--out", train_out, "run directory")->required();
  train_cmd->add_flag("--resume", train.resume, "continue from checkpoints/latest.ckpt");
  train_cmd->add_flag("--no-timing", train_no_timing, "write wall_time as 0");

  OpcOptions opc;
  CommonFlags opc_common;
  std::string opc_ckpt, opc_out;
  std::vector<std::string> opc_layouts;
  bool opc_no_timing = false;
  auto* opc_cmd = app.add_subcommand("opc", "correct layouts with a trained policy");
  opc_common.add(*opc_cmd);
  auto* opc_ckpt_opt =
      opc_cmd->add_option("--checkpoint", opc_ckpt, "policy checkpoint")->check(CLI::ExistingFile);
  opc_cmd->add_option("--layout", opc_layouts, "layout file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  opc_cmd->add_option("--out", opc_out, "output directory")->required();
  opc_cmd->add_flag("--greedy", opc.greedy, "use the greedy teacher instead of the policy");
  opc_cmd->add_flag("--no-modulator", opc.no_modulator, "act on the bare policy output");
  opc_cmd->add_flag("--no-timing", opc_no_timing, "report runtime as 0");

  EvalOptions eval;
  CommonFlags eval_common;
  std::string eval_ckpt, eval_data, eval_out;
  bool eval_no_timing = false;
  auto* eval_cmd = app.add_subcommand("eval", "agent versus greedy on a clip directory");
  eval_common.add(*eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_ckpt, "policy checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data, "directory of clip files")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_flag("--no-modulator", eval.no_modulator, "act on the bare policy output");
  eval_cmd->add_flag("--no-timing", eval_no_timing, "report runtime as 0");

  RenderOptions render;
  CommonFlags render_common;
  std::string render_in, render_out;
  auto* render_cmd = app.add_subcommand("render", "PNG panels of a layout or corrected mask");
  render_common.add(*render_cmd);
  render_cmd->add_option("--input", render_in, "layout or mask file")
      ->required()
      ->check(CLI::ExistingFile);
  render_cmd->add_option("--out", render_out, "output directory")->required();

  std::string rerun_manifest, rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "replay the command recorded in a manifest");
  rerun_cmd->add_option("manifest", rerun_manifest, "manifest.json")
      ->required()
      ->check(CLI::ExistingFile);
  rerun_cmd->add_option("--out", rerun_out, "write to this directory instead");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) {
      gen.layer = layer_from_string(gen_layer);
      gen.out = gen_out;
      const auto written = cmd_gen(gen, args);
      out << "wrote " << written.size() << " clips to " << gen.out.string() << "\n";
    } else if (*train_cmd) {
      train.common = train_common.get();
      train.data = train_data;
      train.out = train_out;
      train.timing = !train_no_timing;
      const auto s = cmd_train(train, args);
      out << "phase 1: " << s.phase1_epochs << " epochs, phase 2: " << s.phase2_epochs
          << " epochs, " << s.metric_rows << " metric rows\n";
    } else if (*opc_cmd) {
      opc.common = opc_common.get();
      if (opc_ckpt_opt->count()) opc.checkpoint = opc_ckpt;
      for (const auto& l : opc_layouts) opc.layouts.emplace_back(l);
      opc.out = opc_out;
      opc.timing = !opc_no_timing;
      print_rows(out, cmd_opc(opc, args));
    } else if (*eval_cmd) {
      eval.common = eval_common.get();
      eval.checkpoint = eval_ckpt;
      eval.data = eval_data;
      eval.out = eval_out;
      eval.timing = !eval_no_timing;
      print_rows(out, cmd_eval(eval, args));
    } else if (*render_cmd) {
      render.common = render_common.get();
      render.input = render_in;
      render.out = render_out;
      const auto s = cmd_render(render, args);
      out << "epe " << s.epe_total << " pvb " << s.pvb << " (" << s.cols << "x" << s.rows
          << " px)\n";
    } else if (*rerun_cmd) {
      const RunManifest m = read_manifest(rerun_manifest);
      if (m.args.empty() || m.args.front() == "rerun") {
        throw ParseError(rerun_manifest + ": no replayable command");
      }
      return run_cli(replay_args(m.args, rerun_out), out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  }
  return 0;
}

}  // namespace opcagent::app
