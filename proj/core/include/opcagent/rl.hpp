#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "opcagent/graph.hpp"
#include "opcagent/layout.hpp"
#include "opcagent/litho.hpp"
#include "opcagent/modulator.hpp"
#include "opcagent/policy.hpp"

namespace opcagent {

// Weight of each teacher step's log-likelihood gradient in phase 1.
enum class Phase1Credit {
  reward,          // immediate reward r_t
  episode_return,  // trajectory return R = sum_t gamma^(t-1) r_t
};

struct RlConfig {
  LayerKind layer = LayerKind::via;
  int max_steps = 10;
  // Early exit when epe_total / n_targets (via) or epe_total / n_measure_points
  // (metal) drops below this many nm.
  double early_exit_nm = 4.0;
  bool early_exit = true;
  int init_offset = 3;
  int offset_bound = kDefaultOffsetBound;
  double epsilon = 0.1;
  double beta = 1.0;
  double alpha = 3e-4;
  double gamma = 1.0;  // return bookkeeping only
  int phase1_epochs = 500;
  int phase1_steps = 5;
  Phase1Credit phase1_credit = Phase1Credit::episode_return;
  int phase2_epochs = 10;
  bool use_modulator = true;
  ModulatorParams modulator;
  std::uint64_t rng_seed = 1;

  static RlConfig defaults(LayerKind layer);
  void validate() const;  // throws ConfigError

  friend bool operator==(const RlConfig&, const RlConfig&) = default;
};

using Rng = std::mt19937_64;

// (epe_t - epe_next) / (epe_t + epsilon) + beta * (pvb_t - pvb_next) / pvb_t.
// Throws ConfigError when pvb_t is not positive.
double reward(double epe_t, double epe_next, double pvb_t, double pvb_next, const RlConfig& cfg);

enum class DecideMode { argmax, sample };

// Per segment: q = modulate(epe) * dist row (or the bare row when `modulator`
// is empty). argmax picks the largest q, ties going to the smaller movement
// magnitude and then inward; sample draws from q / sum(q). Returns indices
// into kMovements.
std::vector<int> decide(const ActionDistribution& dist, std::span<const double> epes,
                        DecideMode mode, Rng& rng,
                        const std::optional<ModulatorParams>& modulator = ModulatorParams{});

// clamp(round(-epe), -2, 2) per segment, as action indices.
std::vector<int> greedy_teacher(std::span<const double> epes);

struct StepMetrics {
  double epe_total = 0.0;
  double pvb = 0.0;
};

struct Transition {
  int step = 0;              // 1-based
  std::vector<int> actions;  // indices into kMovements
  double reward = 0.0;
  StepMetrics before;
  StepMetrics after;
};

// What an agent interacts with. OpcEnvironment is the real one; tests plug in
// stubs.
class Environment {
public:
  virtual ~Environment() = default;

  // Back to the initial mask, simulated.
  virtual void reset() = 0;
  virtual const SegmentGraph& graph() const = 0;
  // Prepared policy inputs for the current mask, in segment order.
  virtual std::vector<EmbedInput> observe(const PolicyShape& shape) const = 0;
  // EPE that drives each segment's decision.
  virtual std::vector<double> segment_epes() const = 0;
  virtual StepMetrics metrics() const = 0;
  // Moves segments and re-simulates.
  virtual void apply(std::span<const int> actions) = 0;
  // Early-exit criterion on the current mask.
  virtual bool converged() const = 0;
};

class OpcEnvironment final : public Environment {
public:
  OpcEnvironment(std::shared_ptr<const SegmentedLayout> base, const Simulator& sim,
                 const RlConfig& cfg);

  void reset() override;
  const SegmentGraph& graph() const override { return graph_; }
  std::vector<EmbedInput> observe(const PolicyShape& shape) const override;
  std::vector<double> segment_epes() const override;
  StepMetrics metrics() const override { return {result_.epe_total, result_.pvb}; }
  void apply(std::span<const int> actions) override;
  bool converged() const override;

  const MaskState& mask() const { return mask_; }
  const LithoResult& result() const { return result_; }
  const SegmentedLayout& base() const { return *mask_.base; }
  // Polygons whose moves were rejected at the last apply() because they would
  // have self-intersected.
  int rejected_polygons() const { return rejected_; }

private:
  void simulate_current();

  const Simulator& sim_;
  RlConfig cfg_;
  SegmentGraph graph_;
  std::vector<MeasureSite> sites_;
  std::vector<int> site_of_segment_;
  MaskState mask_;
  LithoResult result_;
  int rejected_ = 0;
};

struct Episode {
  StepMetrics initial;
  std::vector<Transition> transitions;
  bool exited_early = false;
  // Set when an encoding or geometry failure cut the episode short; the
  // transitions recorded so far are kept.
  std::string error;

  StepMetrics final_metrics() const {
    return transitions.empty() ? initial : transitions.back().after;
  }
  // sum_t gamma^(t-1) r_t
  double return_value(double gamma) const;
};

using ChooseFn = std::function<std::vector<int>(Environment&)>;
using StepFn = std::function<void(const Transition&)>;

// Resets the environment and steps it until cfg.max_steps or, when
// cfg.early_exit is set, the early-exit criterion, which is also checked
// before the first step. `choose` returns action indices for the current
// state; `on_step` sees every transition as soon as it is recorded.
Episode run_loop(Environment& env, const RlConfig& cfg, const ChooseFn& choose,
                 const StepFn& on_step = {});

// Policy rollout: forward -> decide -> apply -> reward.
Episode run_episode(Environment& env, const PolicyParams& params, const RlConfig& cfg,
                    DecideMode mode, Rng& rng);
Episode run_greedy(Environment& env, const RlConfig& cfg);

struct EpisodeRecord {
  int phase = 0;
  int epoch = 0;
  int case_index = 0;
  Episode episode;
};

struct TrainReport {
  std::vector<EpisodeRecord> episodes;
  int epochs_completed = 0;
};

struct TrainHooks {
  // Called after every recorded episode.
  std::function<void(const EpisodeRecord&)> on_episode;
  // Called after each epoch with the updated parameters.
  std::function<void(int phase, int epoch, const PolicyParams&)> on_epoch;
};

// One teacher trajectory per environment (phase1_steps greedy steps, no early
// exit). Recorded as phase 1, epoch 0.
struct TeacherStep {
  const SegmentGraph* graph = nullptr;
  std::vector<EmbedInput> inputs;
  std::vector<int> actions;
  double reward = 0.0;
  double credit = 0.0;  // coefficient used by train_phase1
};
std::vector<std::vector<TeacherStep>> collect_teacher(std::span<Environment* const> envs,
                                                      const RlConfig& cfg,
                                                      const PolicyShape& shape,
                                                      TrainReport* report = nullptr,
                                                      const TrainHooks& hooks = {});

// Imitation: for each epoch, environment and teacher step,
// params += alpha * grad(c_t * log pi(a_teacher | s_t)) where c_t is r_t or the
// trajectory return, per cfg.phase1_credit. The teacher ignores
// the policy, so trajectories are simulated once and replayed every epoch.
// Epochs [first_epoch, cfg.phase1_epochs) are run. Throws NumericError on a
// non-finite gradient, leaving params at their last finite value.
TrainReport train_phase1(std::span<Environment* const> envs, PolicyParams& params,
                         const RlConfig& cfg, const TrainHooks& hooks = {},
                         int first_epoch = 0);

// Sampling through the modulated distribution, one update per environment
// step with the immediate reward and the unmodulated log-probability.
TrainReport train_phase2(std::span<Environment* const> envs, PolicyParams& params,
                         const RlConfig& cfg, Rng& rng, const TrainHooks& hooks = {},
                         int first_epoch = 0);

struct Agreement {
  std::size_t agree = 0;
  std::size_t total = 0;

  double rate() const {
    return total == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(total);
  }
};

// Segments on which argmax pi (unmodulated) picks the teacher's action, over
// every state of the given teacher trajectories.
Agreement teacher_agreement(std::span<const std::vector<TeacherStep>> trajectories,
                            const PolicyParams& params);

// params += alpha * g, refusing (NumericError, params untouched) when the
// result would not be finite.
void apply_update(PolicyParams& params, double alpha, const PolicyGradient& g);

}  // namespace opcagent
