#include "opcagent/rl.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "opcagent/encode.hpp"
#include "opcagent/error.hpp"

namespace opcagent {

RlConfig RlConfig::defaults(LayerKind layer) {
  RlConfig c;
  c.layer = layer;
  if (layer == LayerKind::metal) {
    c.max_steps = 15;
    c.early_exit_nm = 1.0;
  }
  return c;
}

void RlConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("rl config: " + what); };
  if (max_steps <= 0) fail("max_steps must be positive");
  if (!(early_exit_nm > 0.0)) fail("early_exit_nm must be positive");
  if (init_offset < -offset_bound || init_offset > offset_bound) {
    fail("init_offset must lie within offset_bound");
  }
  if (offset_bound <= 0) fail("offset_bound must be positive");
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (!(beta >= 0.0)) fail("beta must be non-negative");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be positive");
  if (!(gamma > 0.0) || gamma > 1.0) fail("gamma must be in (0, 1]");
  if (phase1_epochs < 0 || phase2_epochs < 0) fail("epoch counts must be non-negative");
  if (phase1_steps <= 0) fail("phase1_steps must be positive");
  if (modulator.n < 0 || !std::isfinite(modulator.k) || !std::isfinite(modulator.b)) {
    fail("modulator parameters must be finite with n >= 0");
  }
}

double reward(double epe_t, double epe_next, double pvb_t, double pvb_next,
              const RlConfig& cfg) {
  if (!(pvb_t > 0.0)) {
    throw ConfigError("reward undefined: PV band of the current mask is " +
                      std::to_string(pvb_t) +
                      " nm^2; check the dose corners and the initial offset");
  }
  return (epe_t - epe_next) / (epe_t + cfg.epsilon) + cfg.beta * (pvb_t - pvb_next) / pvb_t;
}

namespace {

// Movement-magnitude-then-inward preference for breaking exact ties.
constexpr std::array<int, kActionCount> kTieOrder{2, 1, 3, 0, 4};

int argmax_index(const Preference& q) {
  int best = kTieOrder[0];
  for (int idx : kTieOrder) {
    if (q[static_cast<std::size_t>(idx)] > q[static_cast<std::size_t>(best)]) best = idx;
  }
  return best;
}

}  // namespace

std::vector<int> decide(const ActionDistribution& dist, std::span<const double> epes,
                        DecideMode mode, Rng& rng,
                        const std::optional<ModulatorParams>& modulator) {
  const int n = dist.rows();
  if (static_cast<int>(epes.size()) != n) {
    throw ConfigError("decide: " + std::to_string(epes.size()) + " EPE values for " +
                      std::to_string(n) + " segments");
  }
  std::vector<int> actions(static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    Preference q = dist.row(i);
    if (modulator) {
      const Preference p = modulate(epes[static_cast<std::size_t>(i)], *modulator);
      for (std::size_t a = 0; a < q.size(); ++a) q[a] *= p[a];
    }
    int chosen = 0;
    if (mode == DecideMode::argmax) {
      chosen = argmax_index(q);
    } else {
      double total = 0.0;
      for (double v : q) total += v;
      const double u = unit(rng) * total;
      double acc = 0.0;
      chosen = kActionCount - 1;
      for (int a = 0; a < kActionCount; ++a) {
        acc += q[static_cast<std::size_t>(a)];
        if (u < acc) {
          chosen = a;
          break;
        }
      }
      while (q[static_cast<std::size_t>(chosen)] <= 0.0 && chosen > 0) --chosen;
    }
    actions[static_cast<std::size_t>(i)] = chosen;
  }
  return actions;
}

std::vector<int> greedy_teacher(std::span<const double> epes) {
  std::vector<int> out;
  out.reserve(epes.size());
  for (double e : epes) {
    const double m = std::clamp(std::round(-e), -2.0, 2.0);
    out.push_back(static_cast<int>(m) + 2);
  }
  return out;
}

OpcEnvironment::OpcEnvironment(std::shared_ptr<const SegmentedLayout> base,
                               const Simulator& sim, const RlConfig& cfg)
    : sim_(sim), cfg_(cfg), graph_(base->segments), sites_(measure_sites(*base)) {
  cfg_.validate();
  if (base->layout.layer != cfg_.layer) {
    throw ConfigError("layout layer " + std::string(to_string(base->layout.layer)) +
                      " does not match the configured layer " +
                      std::string(to_string(cfg_.layer)));
  }
  std::vector<int> site_index(base->size(), -1);
  for (std::size_t k = 0; k < base->measured_segments.size(); ++k) {
    site_index[static_cast<std::size_t>(base->measured_segments[k])] = static_cast<int>(k);
  }
  site_of_segment_.resize(base->size(), -1);
  for (std::size_t s = 0; s < base->size(); ++s) {
    const int src = base->epe_source[s];
    if (src >= 0) site_of_segment_[s] = site_index[static_cast<std::size_t>(src)];
  }
  mask_ = MaskState::uniform(std::move(base), cfg_.init_offset);
  simulate_current();
}

void OpcEnvironment::reset() {
  mask_ = MaskState::uniform(mask_.base, cfg_.init_offset);
  rejected_ = 0;
  simulate_current();
}

void OpcEnvironment::simulate_current() {
  const auto polys = materialize(mask_, cfg_.offset_bound).all();
  result_ = sim_.simulate(polys, sites_);
  if (result_.epe.size() != sites_.size()) {
    throw GeometryError("simulator returned " + std::to_string(result_.epe.size()) +
                        " EPE samples for " + std::to_string(sites_.size()) + " measure sites");
  }
}

std::vector<EmbedInput> OpcEnvironment::observe(const PolicyShape& shape) const {
  const auto features = encode_mask(mask_, shape.feature_size);
  return prepare_inputs(features, shape);
}

std::vector<double> OpcEnvironment::segment_epes() const {
  std::vector<double> out(site_of_segment_.size(), 0.0);
  for (std::size_t s = 0; s < out.size(); ++s) {
    const int k = site_of_segment_[s];
    if (k >= 0) out[s] = result_.epe[static_cast<std::size_t>(k)].epe;
  }
  return out;
}

void OpcEnvironment::apply(std::span<const int> actions) {
  const auto& base = *mask_.base;
  if (actions.size() != base.size()) {
    throw ConfigError("expected " + std::to_string(base.size()) + " actions, got " +
                      std::to_string(actions.size()));
  }
  std::vector<int> next = mask_.offsets;
  for (std::size_t i = 0; i < next.size(); ++i) {
    const int a = actions[i];
    if (a < 0 || a >= kActionCount) throw ConfigError("action index out of range");
    next[i] = std::clamp(next[i] + kMovements[static_cast<std::size_t>(a)], -cfg_.offset_bound,
                         cfg_.offset_bound);
  }
  rejected_ = 0;
  const int polygons = static_cast<int>(base.polygon_begin.size()) - 1;
  for (int p = 0; p < polygons; ++p) {
    try {
      materialize_polygon(base, p, next);
    } catch (const GeometryError&) {
      const int b = base.polygon_begin[static_cast<std::size_t>(p)];
      const int e = base.polygon_begin[static_cast<std::size_t>(p) + 1];
      std::copy(mask_.offsets.begin() + b, mask_.offsets.begin() + e, next.begin() + b);
      ++rejected_;
    }
  }
  mask_.offsets = std::move(next);
  simulate_current();
}

bool OpcEnvironment::converged() const {
  const auto& base = *mask_.base;
  const std::size_t count =
      cfg_.layer == LayerKind::via ? base.layout.targets.size() : sites_.size();
  if (count == 0) return true;
  return result_.epe_total / static_cast<double>(count) < cfg_.early_exit_nm;
}

double Episode::return_value(double gamma) const {
  double r = 0.0;
  double w = 1.0;
  for (const auto& t : transitions) {
    r += w * t.reward;
    w *= gamma;
  }
  return r;
}

Episode run_loop(Environment& env, const RlConfig& cfg, const ChooseFn& choose,
                 const StepFn& on_step) {
  Episode ep;
  env.reset();
  ep.initial = env.metrics();
  if (cfg.early_exit && env.converged()) {
    ep.exited_early = true;
    return ep;
  }
  for (int step = 1; step <= cfg.max_steps; ++step) {
    Transition t;
    t.step = step;
    t.before = env.metrics();
    // A policy can shrink the mask until nothing prints; the reward is then
    // undefined, so the episode ends. At step 1 this is a setup problem and
    // reward() reports it.
    if (step > 1 && !(t.before.pvb > 0.0)) {
      ep.error = "mask stopped printing after step " + std::to_string(step - 1);
      return ep;
    }
    try {
      t.actions = choose(env);
      env.apply(t.actions);
    } catch (const EncodingError& e) {
      ep.error = e.what();
      return ep;
    } catch (const GeometryError& e) {
      ep.error = e.what();
      return ep;
    }
    t.after = env.metrics();
    t.reward = reward(t.before.epe_total, t.after.epe_total, t.before.pvb, t.after.pvb, cfg);
    ep.transitions.push_back(std::move(t));
    if (on_step) on_step(ep.transitions.back());
    if (cfg.early_exit && env.converged()) {
      ep.exited_early = true;
      break;
    }
  }
  return ep;
}

namespace {

std::optional<ModulatorParams> modulator_of(const RlConfig& cfg) {
  if (!cfg.use_modulator) return std::nullopt;
  return cfg.modulator;
}

}  // namespace

Episode run_episode(Environment& env, const PolicyParams& params, const RlConfig& cfg,
                    DecideMode mode, Rng& rng) {
  const auto mod = modulator_of(cfg);
  return run_loop(env, cfg, [&](Environment& e) {
    const auto inputs = e.observe(params.shape);
    const auto dist = forward(std::span<const EmbedInput>(inputs), e.graph(), params);
    const auto epes = e.segment_epes();
    return decide(dist, epes, mode, rng, mod);
  });
}

Episode run_greedy(Environment& env, const RlConfig& cfg) {
  return run_loop(env, cfg, [](Environment& e) { return greedy_teacher(e.segment_epes()); });
}

std::vector<std::vector<TeacherStep>> collect_teacher(std::span<Environment* const> envs,
                                                      const RlConfig& cfg,
                                                      const PolicyShape& shape,
                                                      TrainReport* report,
                                                      const TrainHooks& hooks) {
  RlConfig teach = cfg;
  teach.max_steps = cfg.phase1_steps;
  teach.early_exit = false;
  std::vector<std::vector<TeacherStep>> out(envs.size());
  for (std::size_t i = 0; i < envs.size(); ++i) {
    Environment& env = *envs[i];
    auto& steps = out[i];
    std::vector<EmbedInput> pending;
    Episode ep = run_loop(
        env, teach,
        [&](Environment& e) {
          pending = e.observe(shape);
          return greedy_teacher(e.segment_epes());
        },
        [&](const Transition& t) {
          steps.push_back({&env.graph(), std::move(pending), t.actions, t.reward});
        });
    const double ret = ep.return_value(cfg.gamma);
    for (auto& st : steps) {
      st.credit = cfg.phase1_credit == Phase1Credit::reward ? st.reward : ret;
    }
    EpisodeRecord rec{1, 0, static_cast<int>(i), std::move(ep)};
    if (hooks.on_episode) hooks.on_episode(rec);
    if (report) report->episodes.push_back(std::move(rec));
  }
  return out;
}

TrainReport train_phase1(std::span<Environment* const> envs, PolicyParams& params,
                         const RlConfig& cfg, const TrainHooks& hooks, int first_epoch) {
  cfg.validate();
  TrainReport report;
  if (first_epoch >= cfg.phase1_epochs) {
    report.epochs_completed = cfg.phase1_epochs;
    return report;
  }
  const auto trajectories = collect_teacher(envs, cfg, params.shape, &report, hooks);
  for (int epoch = first_epoch; epoch < cfg.phase1_epochs; ++epoch) {
    for (const auto& traj : trajectories) {
      for (const auto& step : traj) {
        const auto g = logprob_grad(std::span<const EmbedInput>(step.inputs), *step.graph,
                                    params, step.actions, step.credit);
        apply_update(params, cfg.alpha, g);
      }
    }
    report.epochs_completed = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(1, epoch + 1, params);
  }
  return report;
}

TrainReport train_phase2(std::span<Environment* const> envs, PolicyParams& params,
                         const RlConfig& cfg, Rng& rng, const TrainHooks& hooks,
                         int first_epoch) {
  cfg.validate();
  TrainReport report;
  report.epochs_completed = std::max(first_epoch, 0);
  const auto mod = modulator_of(cfg);
  for (int epoch = first_epoch; epoch < cfg.phase2_epochs; ++epoch) {
    for (std::size_t i = 0; i < envs.size(); ++i) {
      Environment& env = *envs[i];
      std::vector<EmbedInput> inputs;
      Episode ep = run_loop(
          env, cfg,
          [&](Environment& e) {
            inputs = e.observe(params.shape);
            const auto dist = forward(std::span<const EmbedInput>(inputs), e.graph(), params);
            return decide(dist, e.segment_epes(), DecideMode::sample, rng, mod);
          },
          [&](const Transition& t) {
            const auto g = logprob_grad(std::span<const EmbedInput>(inputs), env.graph(),
                                        params, t.actions, t.reward);
            apply_update(params, cfg.alpha, g);
          });
      EpisodeRecord rec{2, epoch + 1, static_cast<int>(i), std::move(ep)};
      if (hooks.on_episode) hooks.on_episode(rec);
      report.episodes.push_back(std::move(rec));
    }
    report.epochs_completed = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(2, epoch + 1, params);
  }
  return report;
}

Agreement teacher_agreement(std::span<const std::vector<TeacherStep>> trajectories,
                            const PolicyParams& params) {
  Agreement a;
  Rng unused;
  for (const auto& traj : trajectories) {
    for (const auto& step : traj) {
      const auto dist = forward(std::span<const EmbedInput>(step.inputs), *step.graph, params);
      const std::vector<double> zeros(step.actions.size(), 0.0);
      const auto picked = decide(dist, zeros, DecideMode::argmax, unused, std::nullopt);
      for (std::size_t k = 0; k < picked.size(); ++k) {
        a.agree += picked[k] == step.actions[k] ? 1 : 0;
        ++a.total;
      }
    }
  }
  return a;
}

void apply_update(PolicyParams& params, double alpha, const PolicyGradient& g) {
  if (!params.axpy_is_finite(alpha, g)) {
    throw NumericError("parameter update would produce non-finite weights");
  }
  params.axpy(alpha, g);
}

}  // namespace opcagent
