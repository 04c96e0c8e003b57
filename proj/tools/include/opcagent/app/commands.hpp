#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "opcagent/config.hpp"

namespace opcagent::app {

namespace fs = std::filesystem;

// Flags shared by every command that simulates.
struct CommonOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;  // sets rl.seed and policy.seed
  std::optional<LayerKind> layer;
  std::optional<int> max_steps;
  std::optional<fs::path> kernel_file;  // switches the litho model to SOCS
};

// Config file (or layer defaults) with flag overrides applied. `data_layer`
// is the layer of the inputs; a config or --layer that disagrees with it is
// a ConfigError.
RunConfig resolve_config(const CommonOptions& opts, std::optional<LayerKind> data_layer);

// Clip files of a data directory: *.json except manifest.json, by name.
std::vector<fs::path> list_clips(const fs::path& dir);

struct GenOptions {
  LayerKind layer = LayerKind::via;
  int count = 10;
  std::uint64_t seed = 1;
  fs::path out;
};
// Writes clip_0000.json ... and returns their paths.
std::vector<fs::path> cmd_gen(const GenOptions& opts, const std::vector<std::string>& args);

struct TrainOptions {
  CommonOptions common;
  fs::path data;
  fs::path out;
  bool resume = false;
  bool timing = true;  // false writes wall_time = 0 so metrics.csv is reproducible
};

struct TrainSummary {
  int phase1_epochs = 0;
  int phase2_epochs = 0;
  std::size_t metric_rows = 0;  // rows written by this invocation
};

// Phase 1 then phase 2 over the clips of opts.data. Writes
//   checkpoints/latest.ckpt (every epoch), phase1.ckpt, phase2.ckpt, final.ckpt
//   transcripts/phase1.jsonl, transcripts/phase2.jsonl
//   metrics.csv, config.json, manifest.json
// With `resume`, continues from checkpoints/latest.ckpt and appends.
TrainSummary cmd_train(const TrainOptions& opts, const std::vector<std::string>& args);

struct CaseResult {
  std::string name;
  std::string method;  // "agent" or "greedy"
  int targets = 0;
  int segments = 0;
  int steps = 0;
  double init_epe = 0.0;
  double init_pvb = 0.0;
  double epe_total = 0.0;
  double pvb = 0.0;
  double runtime_s = 0.0;
  std::string error;
};

struct OpcOptions {
  CommonOptions common;
  std::optional<fs::path> checkpoint;  // required unless greedy
  std::vector<fs::path> layouts;
  fs::path out;
  bool greedy = false;
  bool no_modulator = false;
  bool timing = true;
};
// Argmax inference per layout. Writes <stem>.mask.json, <stem>.transcript.json,
// results.csv, results.txt and manifest.json.
std::vector<CaseResult> cmd_opc(const OpcOptions& opts, const std::vector<std::string>& args);

struct EvalOptions {
  CommonOptions common;
  fs::path checkpoint;
  fs::path data;
  fs::path out;
  bool no_modulator = false;
  bool timing = true;
};
// Greedy and agent rows for every clip of opts.data, as results.csv and an
// aligned results.txt with totals.
std::vector<CaseResult> cmd_eval(const EvalOptions& opts, const std::vector<std::string>& args);

struct RenderOptions {
  CommonOptions common;
  fs::path input;  // layout or mask file
  fs::path out;
};

struct RenderSummary {
  double epe_total = 0.0;
  double pvb = 0.0;
  int rows = 0;
  int cols = 0;
};
// target.png, mask.png, contour.png, pvband.png and render.json in opts.out.
RenderSummary cmd_render(const RenderOptions& opts, const std::vector<std::string>& args);

// Process exit status for an exception escaping a command:
// 3 parse, 4 config, 5 numeric, 6 generation, 7 geometry, 8 encoding, 1 other.
int exit_code(const std::exception& e);

// Full command line (without the program name). Returns the exit status;
// usage errors give 2.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace opcagent::app
