#include "opcagent/app/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "opcagent/app/generate.hpp"
#include "opcagent/app/manifest.hpp"
#include "opcagent/app/mask_io.hpp"
#include "opcagent/app/render.hpp"
#include "opcagent/checkpoint.hpp"
#include "opcagent/encode.hpp"
#include "opcagent/error.hpp"
#include "opcagent/layout_io.hpp"
#include "opcagent/litho.hpp"
#include "opcagent/rl.hpp"

namespace opcagent::app {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
  std::ofstream out(path, std::ios::binary | std::ios::out | mode);
  if (!out) throw ParseError(path.string() + ": cannot open file for writing");
  return out;
}

// One LithoModel per clip size.
class SimulatorCache {
public:
  explicit SimulatorCache(LithoConfig cfg) : cfg_(std::move(cfg)) {}

  const LithoModel& get(std::int32_t width, std::int32_t height) {
    auto& slot = models_[{width, height}];
    if (!slot) slot = std::make_unique<LithoModel>(cfg_, width, height);
    return *slot;
  }

private:
  LithoConfig cfg_;
  std::map<std::pair<std::int32_t, std::int32_t>, std::unique_ptr<LithoModel>> models_;
};

LayerKind common_layer(const std::vector<Layout>& layouts, const std::vector<fs::path>& paths) {
  if (layouts.empty()) throw ConfigError("no input clips");
  for (std::size_t i = 1; i < layouts.size(); ++i) {
    if (layouts[i].layer != layouts[0].layer) {
      throw ConfigError(paths[i].string() + " is a " + std::string(to_string(layouts[i].layer)) +
                        " clip but " + paths[0].string() + " is " +
                        std::string(to_string(layouts[0].layer)));
    }
  }
  return layouts[0].layer;
}

std::vector<Layout> read_all(const std::vector<fs::path>& paths) {
  std::vector<Layout> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(read_layout(p));
  return out;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

void check_shape(const PolicyParams& params, LayerKind layer) {
  if (params.shape.feature_size != feature_size(layer)) {
    throw ConfigError("checkpoint was trained on " + std::to_string(params.shape.feature_size) +
                      "px features; " + std::string(to_string(layer)) + " clips use " +
                      std::to_string(feature_size(layer)) + "px");
  }
}

std::string rng_note(const Rng& rng) {
  std::ostringstream os;
  os << "rng " << rng;
  return os.str();
}

void restore_rng(Rng& rng, const std::string& note, const std::string& source) {
  std::istringstream is(note);
  std::string tag;
  is >> tag >> rng;
  if (tag != "rng" || !is) throw ParseError(source + ": checkpoint carries no RNG state");
}

json metrics_json(const StepMetrics& m) { return {{"epe_total", m.epe_total}, {"pvb", m.pvb}}; }

json episode_json(const Episode& ep) {
  json t = json::array();
  for (const auto& tr : ep.transitions) {
    std::vector<int> moves;
    for (int a : tr.actions) moves.push_back(kMovements[static_cast<std::size_t>(a)]);
    t.push_back({{"step", tr.step},
                 {"moves_nm", moves},
                 {"reward", tr.reward},
                 {"before", metrics_json(tr.before)},
                 {"after", metrics_json(tr.after)}});
  }
  return {{"initial", metrics_json(ep.initial)},
          {"exited_early", ep.exited_early},
          {"error", ep.error},
          {"transitions", t}};
}

const char* kResultHeader =
    "case,method,targets,segments,steps,init_epe,init_pvb,epe_total,pvb,runtime_s,error";

std::string csv_row(const CaseResult& r) {
  std::ostringstream os;
  os << r.name << ',' << r.method << ',' << r.targets << ',' << r.segments << ',' << r.steps
     << ',' << num(r.init_epe) << ',' << num(r.init_pvb) << ',' << num(r.epe_total) << ','
     << num(r.pvb) << ',' << num(r.runtime_s) << ',' << '"' << r.error << '"';
  return os.str();
}

void write_results(const fs::path& dir, const std::vector<CaseResult>& rows) {
  {
    auto csv = open_out(dir / "results.csv");
    csv << kResultHeader << "\n";
    for (const auto& r : rows) csv << csv_row(r) << "\n";
  }
  auto txt = open_out(dir / "results.txt");
  std::size_t w = 4;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  txt << std::left << std::setw(static_cast<int>(w)) << "case" << std::right << std::setw(8)
      << "method" << std::setw(8) << "steps" << std::setw(12) << "init EPE" << std::setw(12)
      << "EPE (nm)" << std::setw(14) << "PVB (nm^2)" << std::setw(12) << "time (s)" << "\n";
  std::map<std::string, std::array<double, 5>> totals;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    txt << std::left << std::setw(static_cast<int>(w)) << r.name << std::right << std::setw(8)
        << r.method << std::setw(8) << r.steps << std::fixed << std::setprecision(2)
        << std::setw(12) << r.init_epe << std::setw(12) << r.epe_total << std::setw(14)
        << std::setprecision(0) << r.pvb << std::setprecision(3) << std::setw(12) << r.runtime_s
        << (r.error.empty() ? "" : "  error: " + r.error) << "\n";
    txt.unsetf(std::ios::floatfield);
    if (!totals.count(r.method)) order.push_back(r.method);
    auto& t = totals[r.method];
    t[0] += r.init_epe;
    t[1] += r.epe_total;
    t[2] += r.pvb;
    t[3] += r.runtime_s;
    t[4] += 1.0;
  }
  for (const auto& m : order) {
    const auto& t = totals[m];
    txt << std::left << std::setw(static_cast<int>(w)) << "sum" << std::right << std::setw(8) << m
        << std::setw(8) << "" << std::fixed << std::setprecision(2) << std::setw(12) << t[0]
        << std::setw(12) << t[1] << std::setw(14) << std::setprecision(0) << t[2]
        << std::setprecision(3) << std::setw(12) << t[3] << "\n";
    txt.unsetf(std::ios::floatfield);
  }
}

void finish_manifest(RunManifest m, const fs::path& dir) {
  m.version = version_string();
  m.finished_utc = utc_now();
  write_manifest(m, dir);
}

std::string config_snapshot(const RunConfig& cfg) { return format_config(cfg); }

struct Inference {
  CaseResult row;
  Episode episode;
};

Inference infer(const fs::path& path, const Layout& layout, const RunConfig& cfg,
                SimulatorCache& sims, const PolicyParams* params, bool use_modulator, bool timing,
                const fs::path& out_dir) {
  auto base = std::make_shared<const SegmentedLayout>(layout);
  RlConfig rl = cfg.rl;
  rl.use_modulator = use_modulator;
  OpcEnvironment env(base, sims.get(layout.width, layout.height), rl);
  Rng rng(rl.rng_seed);
  const auto t0 = Clock::now();
  Inference inf;
  inf.episode = params ? run_episode(env, *params, rl, DecideMode::argmax, rng)
                       : run_greedy(env, rl);
  const double runtime = timing ? seconds_since(t0) : 0.0;
  const std::string stem = path.stem().string();
  auto& r = inf.row;
  r.name = stem;
  r.method = params ? "agent" : "greedy";
  r.targets = static_cast<int>(layout.targets.size());
  r.segments = static_cast<int>(base->size());
  r.steps = static_cast<int>(inf.episode.transitions.size());
  r.init_epe = inf.episode.initial.epe_total;
  r.init_pvb = inf.episode.initial.pvb;
  r.epe_total = env.metrics().epe_total;
  r.pvb = env.metrics().pvb;
  r.runtime_s = runtime;
  r.error = inf.episode.error;
  if (!out_dir.empty()) {
    write_mask(env.mask(), out_dir / (stem + ".mask.json"), rl.offset_bound);
    json doc = episode_json(inf.episode);
    doc["case"] = stem;
    doc["method"] = r.method;
    auto t = open_out(out_dir / (stem + ".transcript.json"));
    t << doc.dump(2) << "\n";
  }
  return inf;
}

}  // namespace

RunConfig resolve_config(const CommonOptions& o, std::optional<LayerKind> data_layer) {
  const LayerKind layer = o.layer ? *o.layer : data_layer.value_or(LayerKind::via);
  RunConfig c = o.config ? read_config(*o.config, layer) : RunConfig::defaults(layer);
  if (o.layer && c.layer != *o.layer) {
    throw ConfigError("--layer " + std::string(to_string(*o.layer)) + " contradicts the config (" +
                      std::string(to_string(c.layer)) + ")");
  }
  if (data_layer && c.layer != *data_layer) {
    throw ConfigError("configured for " + std::string(to_string(c.layer)) +
                      " but the inputs are " + std::string(to_string(*data_layer)) + " clips");
  }
  if (o.seed) {
    c.rl.rng_seed = *o.seed;
    c.policy_seed = *o.seed;
  }
  if (o.max_steps) c.rl.max_steps = *o.max_steps;
  if (o.kernel_file) {
    c.litho.kernel = KernelKind::socs;
    c.litho.kernel_file = *o.kernel_file;
  }
  c.rl.validate();
  return c;
}

std::vector<fs::path> list_clips(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    if (e.path().filename() == "manifest.json") continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> cmd_gen(const GenOptions& o, const std::vector<std::string>& args) {
  if (o.count < 0) throw ConfigError("--count must be non-negative");
  RunManifest man{"gen", args, {}, o.seed, {}, {}, utc_now(), {}};
  fs::create_directories(o.out);
  std::vector<fs::path> written;
  for (int i = 0; i < o.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%04d.json", i);
    const auto path = o.out / name;
    write_layout(generate_clip(o.layer, o.seed, i), path);
    written.push_back(path);
  }
  man.config_json = json{{"layer", std::string(to_string(o.layer))},
                         {"count", o.count},
                         {"seed", o.seed}}
                        .dump();
  finish_manifest(man, o.out);
  return written;
}

TrainSummary cmd_train(const TrainOptions& o, const std::vector<std::string>& args) {
  const auto t0 = Clock::now();
  const auto clips = list_clips(o.data);
  if (clips.empty()) throw ConfigError("no clip files in " + o.data.string());
  const auto layouts = read_all(clips);
  const LayerKind layer = common_layer(layouts, clips);
  const RunConfig cfg = resolve_config(o.common, layer);
  RunManifest man{"train", args, config_snapshot(cfg), cfg.rl.rng_seed, path_strings(clips),
                  {}, utc_now(), {}};

  const auto ckpt_dir = o.out / "checkpoints";
  const auto tr_dir = o.out / "transcripts";
  fs::create_directories(ckpt_dir);
  fs::create_directories(tr_dir);
  {
    auto c = open_out(o.out / "config.json");
    c << format_config(cfg);
  }

  SimulatorCache sims(cfg.litho);
  std::vector<std::unique_ptr<OpcEnvironment>> envs;
  std::vector<Environment*> env_ptrs;
  for (const auto& l : layouts) {
    envs.push_back(std::make_unique<OpcEnvironment>(std::make_shared<const SegmentedLayout>(l),
                                                    sims.get(l.width, l.height), cfg.rl));
    env_ptrs.push_back(envs.back().get());
  }

  const PolicyShape shape = PolicyShape::for_feature_size(feature_size(layer));
  PolicyParams params = init_params(shape, cfg.policy_seed);
  Rng rng(cfg.rl.rng_seed);
  int phase = 1;
  int first_epoch = 0;
  const auto latest = ckpt_dir / "latest.ckpt";
  const bool resuming = o.resume && fs::exists(latest);
  if (resuming) {
    Checkpoint ck = load_checkpoint(latest);
    if (!(ck.params.shape == shape)) {
      throw ConfigError(latest.string() + " does not match the policy shape for " +
                        std::string(to_string(layer)) + " clips");
    }
    params = std::move(ck.params);
    restore_rng(rng, ck.note, latest.string());
    if (ck.phase == 2) {
      phase = 2;
      first_epoch = ck.epoch;
    } else if (ck.phase == 1 && ck.epoch >= cfg.rl.phase1_epochs) {
      phase = 2;
    } else {
      first_epoch = ck.epoch;
    }
  }

  const auto mode = resuming ? std::ios::app : std::ios::trunc;
  const bool fresh_metrics = !resuming || !fs::exists(o.out / "metrics.csv");
  auto metrics = open_out(o.out / "metrics.csv", mode);
  if (fresh_metrics) metrics << "phase,epoch,case,step,epe_total,pvb,reward,wall_time\n";
  auto tr1 = open_out(tr_dir / "phase1.jsonl", mode);
  auto tr2 = open_out(tr_dir / "phase2.jsonl", mode);

  TrainSummary summary;
  TrainHooks hooks;
  const bool record_teacher = phase == 1 && first_epoch == 0;
  hooks.on_episode = [&](const EpisodeRecord& rec) {
    if (rec.phase == 1 && !record_teacher) return;
    for (const auto& t : rec.episode.transitions) {
      metrics << rec.phase << ',' << rec.epoch << ',' << clips[static_cast<std::size_t>(rec.case_index)].stem().string()
              << ',' << t.step << ',' << num(t.after.epe_total) << ',' << num(t.after.pvb) << ','
              << num(t.reward) << ',' << num(o.timing ? seconds_since(t0) : 0.0) << "\n";
      ++summary.metric_rows;
    }
    json doc = episode_json(rec.episode);
    doc["phase"] = rec.phase;
    doc["epoch"] = rec.epoch;
    doc["case"] = clips[static_cast<std::size_t>(rec.case_index)].stem().string();
    (rec.phase == 1 ? tr1 : tr2) << doc.dump() << "\n";
  };
  hooks.on_epoch = [&](int ph, int epoch, const PolicyParams& p) {
    save_checkpoint(latest, Checkpoint{p, ph, epoch, rng_note(rng)});
    if (epoch % 50 == 0) {
      std::cerr << "phase " << ph << " epoch " << epoch << "/"
                << (ph == 1 ? cfg.rl.phase1_epochs : cfg.rl.phase2_epochs) << "\n";
    }
  };

  try {
    if (phase == 1) {
      train_phase1(env_ptrs, params, cfg.rl, hooks, first_epoch);
      save_checkpoint(ckpt_dir / "phase1.ckpt",
                      Checkpoint{params, 1, cfg.rl.phase1_epochs, rng_note(rng)});
      phase = 2;
      first_epoch = 0;
    }
    train_phase2(env_ptrs, params, cfg.rl, rng, hooks, first_epoch);
    summary.phase1_epochs = cfg.rl.phase1_epochs;
    summary.phase2_epochs = cfg.rl.phase2_epochs;
    if (cfg.rl.phase2_epochs > 0) {
      save_checkpoint(ckpt_dir / "phase2.ckpt",
                      Checkpoint{params, 2, cfg.rl.phase2_epochs, rng_note(rng)});
    }
  } catch (const NumericError&) {
    save_checkpoint(ckpt_dir / "diverged.ckpt", Checkpoint{params, phase, 0, rng_note(rng)});
    metrics.flush();
    throw;
  }
  save_checkpoint(ckpt_dir / "final.ckpt",
                  Checkpoint{params, cfg.rl.phase2_epochs > 0 ? 2 : 1,
                             cfg.rl.phase2_epochs > 0 ? cfg.rl.phase2_epochs
                                                      : cfg.rl.phase1_epochs,
                             rng_note(rng)});
  finish_manifest(man, o.out);
  return summary;
}

std::vector<CaseResult> cmd_opc(const OpcOptions& o, const std::vector<std::string>& args) {
  if (o.layouts.empty()) throw ConfigError("no layouts given");
  if (!o.greedy && !o.checkpoint) throw ConfigError("--checkpoint is required unless --greedy");
  const auto layouts = read_all(o.layouts);
  const LayerKind layer = common_layer(layouts, o.layouts);
  const RunConfig cfg = resolve_config(o.common, layer);
  std::optional<Checkpoint> ck;
  if (!o.greedy) {
    ck = load_checkpoint(*o.checkpoint);
    check_shape(ck->params, layer);
  }
  auto inputs = path_strings(o.layouts);
  if (o.checkpoint) inputs.push_back(o.checkpoint->string());
  RunManifest man{"opc", args, config_snapshot(cfg), cfg.rl.rng_seed, inputs, {}, utc_now(), {}};
  fs::create_directories(o.out);
  SimulatorCache sims(cfg.litho);
  std::vector<CaseResult> rows;
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    rows.push_back(infer(o.layouts[i], layouts[i], cfg, sims, ck ? &ck->params : nullptr,
                         cfg.rl.use_modulator && !o.no_modulator, o.timing, o.out)
                       .row);
  }
  write_results(o.out, rows);
  finish_manifest(man, o.out);
  return rows;
}

std::vector<CaseResult> cmd_eval(const EvalOptions& o, const std::vector<std::string>& args) {
  const auto clips = list_clips(o.data);
  if (clips.empty()) throw ConfigError("no clip files in " + o.data.string());
  const auto layouts = read_all(clips);
  const LayerKind layer = common_layer(layouts, clips);
  const RunConfig cfg = resolve_config(o.common, layer);
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  check_shape(ck.params, layer);
  auto inputs = path_strings(clips);
  inputs.push_back(o.checkpoint.string());
  RunManifest man{"eval", args, config_snapshot(cfg), cfg.rl.rng_seed, inputs, {}, utc_now(), {}};
  fs::create_directories(o.out);
  SimulatorCache sims(cfg.litho);
  std::vector<CaseResult> rows;
  const bool mod = cfg.rl.use_modulator && !o.no_modulator;
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    rows.push_back(infer(clips[i], layouts[i], cfg, sims, nullptr, mod, o.timing, {}).row);
    rows.push_back(infer(clips[i], layouts[i], cfg, sims, &ck.params, mod, o.timing, {}).row);
  }
  write_results(o.out, rows);
  finish_manifest(man, o.out);
  return rows;
}

RenderSummary cmd_render(const RenderOptions& o, const std::vector<std::string>& args) {
  const MaskFile file = read_mask(o.input);
  const RunConfig cfg = resolve_config(o.common, file.layout.layer);
  RunManifest man{"render", args, config_snapshot(cfg), cfg.rl.rng_seed, {o.input.string()},
                  {}, utc_now(), {}};
  const MaskState mask = mask_state(file);
  const Layout& l = file.layout;
  const LithoModel sim(cfg.litho, l.width, l.height);
  const int px = cfg.litho.pixel_nm;
  const BinaryGrid target = rasterize(l.targets, l.width, l.height, px);
  const auto polys = materialize(mask, cfg.rl.offset_bound).all();
  const BinaryGrid mask_grid = rasterize(polys, l.width, l.height, px);
  const LithoResult result = sim.simulate(polys, measure_sites(*mask.base));
  const RenderSet panels = render_panels(target, mask_grid, result);
  fs::create_directories(o.out);
  write_png(panels.target, o.out / "target.png");
  write_png(panels.mask, o.out / "mask.png");
  write_png(panels.contour, o.out / "contour.png");
  write_png(panels.pvband, o.out / "pvband.png");
  RenderSummary s{result.epe_total, result.pvb, target.rows(), target.cols()};
  {
    auto j = open_out(o.out / "render.json");
    j << json{{"epe_total", s.epe_total},
              {"pvb", s.pvb},
              {"pixel_nm", px},
              {"rows", s.rows},
              {"cols", s.cols}}
             .dump(2)
      << "\n";
  }
  finish_manifest(man, o.out);
  return s;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return 3;
  if (dynamic_cast<const ConfigError*>(&e)) return 4;
  if (dynamic_cast<const NumericError*>(&e)) return 5;
  if (dynamic_cast<const GenerationError*>(&e)) return 6;
  if (dynamic_cast<const GeometryError*>(&e)) return 7;
  if (dynamic_cast<const EncodingError*>(&e)) return 8;
  return 1;
}

}  // namespace opcagent::app
