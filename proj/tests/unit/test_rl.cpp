#include <doctest.h>

#include <cmath>
#include <random>

#include "opcagent/error.hpp"
#include "opcagent/rl.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace opcagent;
using namespace testing;
using testing::ScheduledSimulator;
using testing::segmented;
using testing::via_layout;

namespace {

ActionDistribution rows(std::initializer_list<std::array<double, 5>> r) {
  ActionDistribution d;
  d.probs.resize(static_cast<Eigen::Index>(r.size()), 5);
  int i = 0;
  for (const auto& row : r) {
    for (int a = 0; a < 5; ++a) d.probs(i, a) = row[a];
    ++i;
  }
  return d;
}

Layout metal_clip() {
  return Layout{2000, 2000, LayerKind::metal, {Polygon::rectangle(400, 400, 760, 460)}, {}};
}

// One segment whose EPE drops to zero when the rewarded action is taken.
class BanditEnv final : public Environment {
public:
  BanditEnv(int rewarded, const PolicyShape& shape) : rewarded_(rewarded) {
    NodeFeature f(6, shape.feature_size, shape.feature_size);
    f.at(0, 0, 0) = 1.0;
    f.at(1, 0, 0) = 0.3;
    input_ = prepare_input(f, shape);
  }
  void reset() override { epe_ = 10.0; }
  const SegmentGraph& graph() const override { return graph_; }
  std::vector<EmbedInput> observe(const PolicyShape&) const override { return {input_}; }
  std::vector<double> segment_epes() const override { return {0.0}; }
  StepMetrics metrics() const override { return {epe_, 1000.0}; }
  void apply(std::span<const int> a) override { epe_ = a[0] == rewarded_ ? 0.0 : 10.0; }
  bool converged() const override { return false; }

private:
  int rewarded_;
  double epe_ = 10.0;
  SegmentGraph graph_{1, std::vector<std::pair<int, int>>{}};
  EmbedInput input_;
};

// Teacher sees a constant positive EPE, so it always moves inward by 2nm and
// every step improves the EPE.
class ImprovingEnv final : public Environment {
public:
  explicit ImprovingEnv(const PolicyShape& shape) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 2; ++k) {
      NodeFeature f(6, shape.feature_size, shape.feature_size);
      for (int ch = 0; ch < 6; ++ch)
        for (int r = 0; r < shape.feature_size; ++r)
          for (int c = 0; c < shape.feature_size; ++c) f.at(ch, r, c) = ch % 3 == 0 ? (u(rng) < 0.5) : u(rng);
      inputs_.push_back(prepare_input(f, shape));
    }
  }
  void reset() override { epe_ = 20.0; }
  const SegmentGraph& graph() const override { return graph_; }
  std::vector<EmbedInput> observe(const PolicyShape&) const override { return inputs_; }
  std::vector<double> segment_epes() const override { return {5.0, 5.0}; }
  StepMetrics metrics() const override { return {epe_, 1000.0}; }
  void apply(std::span<const int>) override { epe_ -= 2.0; }
  bool converged() const override { return false; }

private:
  double epe_ = 20.0;
  SegmentGraph graph_{2, std::vector<std::pair<int, int>>{{0, 1}}};
  std::vector<EmbedInput> inputs_;
};

}  // namespace

TEST_SUITE("rl") {
  TEST_CASE("reward examples") {
    const RlConfig cfg;
    CHECK(reward(10, 5, 1000, 900, cfg) == doctest::Approx(5.0 / 10.1 + 0.1).epsilon(1e-12));
    CHECK(std::abs(reward(10, 5, 1000, 900, cfg) - 0.595049504950495) < 1e-9);
    CHECK(reward(7, 7, 500, 500, cfg) == 0.0);
    CHECK(std::abs(reward(5, 10, 1000, 1100, cfg) - (-1.080392156862745)) < 1e-9);
    CHECK_THROWS_AS(reward(5, 4, 0, 10, cfg), ConfigError);
  }

  TEST_CASE("config defaults per layer") {
    const RlConfig via = RlConfig::defaults(LayerKind::via);
    CHECK(via.max_steps == 10);
    CHECK(via.early_exit_nm == 4.0);
    CHECK(via.init_offset == 3);
    CHECK(via.epsilon == 0.1);
    CHECK(via.beta == 1.0);
    CHECK(via.alpha == 3e-4);
    CHECK(via.phase1_epochs == 500);
    CHECK(via.phase1_steps == 5);
    CHECK(via.modulator == ModulatorParams{0.02, 4, 1.0});
    const RlConfig metal = RlConfig::defaults(LayerKind::metal);
    CHECK(metal.max_steps == 15);
    CHECK(metal.early_exit_nm == 1.0);
    RlConfig bad = via;
    bad.max_steps = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = via;
    bad.gamma = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("decide examples") {
    Rng rng(1);
    CHECK(decide(rows({{0.1, 0.2, 0.4, 0.2, 0.1}}), std::vector<double>{0.0}, DecideMode::argmax, rng) ==
          std::vector<int>{2});
    CHECK(decide(rows({{0.2, 0.2, 0.2, 0.2, 0.2}}), std::vector<double>{10.0}, DecideMode::argmax, rng) ==
          std::vector<int>{0});
    CHECK(decide(rows({{0.05, 0.05, 0.3, 0.3, 0.3}}), std::vector<double>{-4.0}, DecideMode::argmax, rng) ==
          std::vector<int>{4});
    // q proportions from the element-wise product.
    const Preference p = modulate(-4.0);
    const std::array<double, 5> d{0.05, 0.05, 0.3, 0.3, 0.3};
    const std::array<double, 5> want{0.000284, 0.000290, 0.002349, 0.008626, 0.285573};
    for (int a = 0; a < 5; ++a) {
      CHECK(p[a] * d[a] / (p[4] * d[4]) == doctest::Approx(want[a] / want[4]).epsilon(3e-3));
    }
    // Without the modulator the bare row decides.
    CHECK(decide(rows({{0.1, 0.2, 0.15, 0.5, 0.05}}), std::vector<double>{10.0}, DecideMode::argmax, rng,
                 std::nullopt) == std::vector<int>{3});
  }

  TEST_CASE("argmax ties go to the smaller movement, then inward") {
    Rng rng(1);
    const auto none = std::optional<ModulatorParams>{};
    CHECK(decide(rows({{0.2, 0.2, 0.2, 0.2, 0.2}}), std::vector<double>{0}, DecideMode::argmax, rng, none) ==
          std::vector<int>{2});
    CHECK(decide(rows({{0.3, 0.1, 0.0, 0.1, 0.3}}), std::vector<double>{0}, DecideMode::argmax, rng, none) ==
          std::vector<int>{0});
    CHECK(decide(rows({{0.1, 0.3, 0.0, 0.3, 0.1}}), std::vector<double>{0}, DecideMode::argmax, rng, none) ==
          std::vector<int>{1});
    CHECK(decide(rows({{0.1, 0.1, 0.0, 0.4, 0.4}}), std::vector<double>{0}, DecideMode::argmax, rng, none) ==
          std::vector<int>{3});
  }

  TEST_CASE("greedy teacher examples") {
    CHECK(greedy_teacher(std::vector<double>{5.0, -1.0, 0.0, 1.4, -1.6, -30.0}) ==
          std::vector<int>{0, 3, 2, 1, 4, 4});
  }

  TEST_CASE("sampling follows the normalized product (chi-square, 1e5 draws)") {
    const auto d = rows({{0.1, 0.25, 0.3, 0.2, 0.15}});
    const double epe = 1.5;
    const Preference p = modulate(epe);
    std::array<double, 5> q{};
    double z = 0;
    for (int a = 0; a < 5; ++a) z += (q[a] = p[a] * d.probs(0, a));
    Rng rng(2024);
    std::array<int, 5> counts{};
    const int n = 100000;
    for (int k = 0; k < n; ++k) ++counts[decide(d, std::vector<double>{epe}, DecideMode::sample, rng)[0]];
    double chi2 = 0;
    for (int a = 0; a < 5; ++a) {
      const double expect = n * q[a] / z;
      chi2 += (counts[a] - expect) * (counts[a] - expect) / expect;
    }
    CHECK(chi2_sf_df4(chi2) > 0.01);
    CHECK(chi2_sf_df4(0.0) == 1.0);
    CHECK(chi2_sf_df4(13.2767) == doctest::Approx(0.01).epsilon(1e-3));
  }

  TEST_CASE("via early exit fires at the first step under 4nm per via") {
    const auto base = segmented(via_layout({{300, 300}, {900, 900}}));
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    // reset, step 1, step 2: per via 4 sites x {2.0, 2.0, 0.75} = {8, 8, 3} nm.
    ScheduledSimulator sim({2.0, 2.0, 0.75, 0.1});
    OpcEnvironment env(base, sim, cfg);
    sim.rewind();
    const Episode ep = run_greedy(env, cfg);
    CHECK(ep.exited_early);
    CHECK(ep.transitions.size() == 2);
    CHECK(ep.transitions.back().after.epe_total == doctest::Approx(2 * 3.0));
  }

  TEST_CASE("exactly 4nm per via does not exit") {
    const auto base = segmented(via_layout({{300, 300}}));
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    ScheduledSimulator sim({2.0, 1.0});
    OpcEnvironment env(base, sim, cfg);
    sim.rewind();
    const Episode ep = run_greedy(env, cfg);
    CHECK_FALSE(ep.exited_early);
    CHECK(ep.transitions.size() == static_cast<std::size_t>(cfg.max_steps));
  }

  TEST_CASE("early exit is checked before the first step") {
    const auto base = segmented(via_layout({{300, 300}}));
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    ScheduledSimulator sim({0.5});
    OpcEnvironment env(base, sim, cfg);
    sim.rewind();
    const Episode ep = run_greedy(env, cfg);
    CHECK(ep.exited_early);
    CHECK(ep.transitions.empty());
    cfg.early_exit = false;
    sim.rewind();
    CHECK(run_greedy(env, cfg).transitions.size() == 10);
  }

  TEST_CASE("metal early exit uses the mean per measure point") {
    const auto base = segmented(metal_clip());
    REQUIRE(base->measured_segments.size() == 12);  // 360nm wire: 6 points per long edge
    RlConfig cfg = RlConfig::defaults(LayerKind::metal);
    ScheduledSimulator sim({3.0, 1.0, 1.0, 0.99, 0.5});
    OpcEnvironment env(base, sim, cfg);
    sim.rewind();
    const Episode ep = run_greedy(env, cfg);
    CHECK(ep.exited_early);
    CHECK(ep.transitions.size() == 3);
  }

  TEST_CASE("an episode ends once the mask stops printing") {
    const auto base = segmented(via_layout({{300, 300}}));
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    ScheduledSimulator sim({9.0}, {1000.0, 800.0, 0.0, 500.0});
    OpcEnvironment env(base, sim, cfg);
    sim.rewind();
    const Episode ep = run_greedy(env, cfg);
    REQUIRE(ep.transitions.size() == 2);
    CHECK(ep.transitions.back().after.pvb == 0.0);
    CHECK(ep.error == "mask stopped printing after step 2");
    CHECK_FALSE(ep.exited_early);
  }

  TEST_CASE("a mask that never prints is a configuration error") {
    const auto base = segmented(via_layout({{300, 300}}));
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    ScheduledSimulator sim({9.0}, {0.0});
    OpcEnvironment env(base, sim, cfg);
    sim.rewind();
    CHECK_THROWS_AS(run_greedy(env, cfg), ConfigError);
  }

  TEST_CASE("no exit means exactly max_steps transitions") {
    const auto base = segmented(via_layout({{300, 300}}));
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    cfg.max_steps = 7;
    ScheduledSimulator sim({9.0});
    OpcEnvironment env(base, sim, cfg);
    const Episode ep = run_greedy(env, cfg);
    REQUIRE(ep.transitions.size() == 7);
    for (int t = 0; t < 7; ++t) CHECK(ep.transitions[t].step == t + 1);
  }

  TEST_CASE("stored rewards are reproducible and offsets stay bounded") {
    const LithoModel model(LithoConfig{}, 1000, 1000);
    const auto base = segmented(via_layout({{300, 300}, {430, 320}, {600, 620}}, 1000));
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    cfg.early_exit = false;
    OpcEnvironment env(base, model, cfg);
    const auto shape = PolicyShape::for_feature_size(128);
    const PolicyParams params = init_params(shape, 3);
    Rng rng(5);
    std::vector<int> prev(base->size(), cfg.init_offset);
    int steps = 0;
    const Episode ep = run_loop(
        env, cfg,
        [&](Environment& e) {
          const auto inputs = e.observe(shape);
          return decide(forward(std::span<const EmbedInput>(inputs), e.graph(), params), e.segment_epes(),
                        DecideMode::sample, rng);
        },
        [&](const Transition&) {
          ++steps;
          for (std::size_t s = 0; s < prev.size(); ++s) {
            CHECK(std::abs(env.mask().offsets[s] - prev[s]) <= 2);
            CHECK(std::abs(env.mask().offsets[s]) <= cfg.init_offset + 2 * steps);
          }
          prev = env.mask().offsets;
        });
    CHECK(ep.error.empty());
    REQUIRE(ep.transitions.size() == 10);
    double ret = 0;
    for (const auto& t : ep.transitions) {
      CHECK(t.reward == reward(t.before.epe_total, t.after.epe_total, t.before.pvb, t.after.pvb, cfg));
      ret += t.reward;
    }
    CHECK(ep.return_value(1.0) == doctest::Approx(ret).epsilon(1e-12));
    CHECK(ep.transitions.front().before.epe_total == ep.initial.epe_total);
  }

  TEST_CASE("argmax episodes are deterministic") {
    const LithoModel model(LithoConfig{}, 1000, 1000);
    const auto base = segmented(via_layout({{300, 300}, {430, 320}}, 1000));
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    cfg.max_steps = 4;
    OpcEnvironment env(base, model, cfg);
    const PolicyParams params = init_params(PolicyShape::for_feature_size(128), 8);
    Rng r1(1), r2(999);
    const Episode a = run_episode(env, params, cfg, DecideMode::argmax, r1);
    const Episode b = run_episode(env, params, cfg, DecideMode::argmax, r2);
    REQUIRE(a.transitions.size() == b.transitions.size());
    for (std::size_t t = 0; t < a.transitions.size(); ++t) {
      CHECK(a.transitions[t].actions == b.transitions[t].actions);
      CHECK(a.transitions[t].reward == b.transitions[t].reward);
    }
  }

  TEST_CASE("environment rejects layer mismatch and bad actions") {
    ScheduledSimulator sim({1.0});
    const RlConfig via = RlConfig::defaults(LayerKind::via);
    CHECK_THROWS_AS(OpcEnvironment(segmented(metal_clip()), sim, via), ConfigError);
    OpcEnvironment env(segmented(via_layout({{300, 300}})), sim, via);
    CHECK_THROWS_AS(env.apply(std::vector<int>{2, 2}), ConfigError);
    CHECK_THROWS_AS(env.apply(std::vector<int>{2, 2, 2, 7}), ConfigError);
  }

  TEST_CASE("moves that would collapse a polygon are rejected for that polygon only") {
    ScheduledSimulator sim({1.0});
    RlConfig cfg = RlConfig::defaults(LayerKind::via);
    cfg.init_offset = -34;
    OpcEnvironment env(segmented(via_layout({{300, 300}, {900, 900}})), sim, cfg);
    env.apply(std::vector<int>{0, 0, 0, 0, 4, 4, 4, 4});
    CHECK(env.rejected_polygons() == 1);
    CHECK(env.mask().offsets == std::vector<int>{-34, -34, -34, -34, -32, -32, -32, -32});
  }

  TEST_CASE("zero epochs leave parameters unchanged") {
    const auto shape = PolicyShape::for_feature_size(8);
    ImprovingEnv env(shape);
    std::vector<Environment*> envs{&env};
    RlConfig cfg;
    cfg.phase1_epochs = 0;
    cfg.phase2_epochs = 0;
    PolicyParams p = init_params(shape, 1);
    const PolicyParams p0 = p;
    train_phase1(envs, p, cfg);
    Rng rng(1);
    train_phase2(envs, p, cfg, rng);
    CHECK(p == p0);
  }

  TEST_CASE("one imitation epoch raises the teacher's log-probability") {
    const auto shape = PolicyShape::for_feature_size(8);
    ImprovingEnv env(shape);
    std::vector<Environment*> envs{&env};
    for (Phase1Credit credit : {Phase1Credit::reward, Phase1Credit::episode_return}) {
      RlConfig cfg;
      cfg.phase1_epochs = 1;
      cfg.phase1_steps = 1;
      cfg.phase1_credit = credit;
      PolicyParams p = init_params(shape, 4);
      const auto traj = collect_teacher(envs, cfg, shape);
      REQUIRE(traj[0].size() == 1);
      const TeacherStep& st = traj[0][0];
      CHECK(st.actions == std::vector<int>{0, 0});
      CHECK(st.reward > 0.0);
      const auto span = std::span<const EmbedInput>(st.inputs);
      const double before = logprob_sum(span, *st.graph, p, st.actions);
      const TrainReport rep = train_phase1(envs, p, cfg);
      CHECK(rep.epochs_completed == 1);
      CHECK(rep.episodes.size() == 1);
      CHECK(logprob_sum(span, *st.graph, p, st.actions) > before);
    }
  }

  TEST_CASE("teacher credit is the reward or the trajectory return") {
    const auto shape = PolicyShape::for_feature_size(8);
    ImprovingEnv env(shape);
    std::vector<Environment*> envs{&env};
    RlConfig cfg;
    cfg.phase1_steps = 3;
    cfg.phase1_credit = Phase1Credit::reward;
    const auto r = collect_teacher(envs, cfg, shape);
    cfg.phase1_credit = Phase1Credit::episode_return;
    const auto R = collect_teacher(envs, cfg, shape);
    REQUIRE(r[0].size() == 3);
    double sum = 0;
    for (const auto& st : r[0]) {
      CHECK(st.credit == st.reward);
      sum += st.reward;
    }
    for (const auto& st : R[0]) CHECK(st.credit == doctest::Approx(sum).epsilon(1e-12));
    // 20 -> 18 -> 16 -> 14
    CHECK(r[0][0].reward == doctest::Approx(2.0 / 20.1));
  }

  TEST_CASE("phase 2 learns the rewarded action on a one-segment bandit") {
    const auto shape = PolicyShape::for_feature_size(8);
    for (int target : {0, 3}) {
      BanditEnv env(target, shape);
      std::vector<Environment*> envs{&env};
      RlConfig cfg;
      cfg.max_steps = 1;
      cfg.early_exit = false;
      cfg.phase2_epochs = 200;
      cfg.alpha = 0.05;
      PolicyParams p = init_params(shape, 10);
      Rng rng(3);
      const TrainReport rep = train_phase2(envs, p, cfg, rng);
      CHECK(rep.episodes.size() == 200);
      const auto inputs = env.observe(shape);
      const auto d = forward(std::span<const EmbedInput>(inputs), env.graph(), p);
      CHECK(d.probs(0, target) > 0.9);
    }
  }

  TEST_CASE("teacher agreement counts argmax matches") {
    const auto shape = PolicyShape::for_feature_size(8);
    ImprovingEnv env(shape);
    std::vector<Environment*> envs{&env};
    RlConfig cfg;
    cfg.phase1_steps = 2;
    const auto traj = collect_teacher(envs, cfg, shape);
    PolicyParams p = PolicyParams::zeros(shape);
    p.head_c(0) = 1.0;
    const Agreement a = teacher_agreement(traj, p);
    CHECK(a.total == 4);
    CHECK(a.agree == 4);
    p.head_c(0) = 0.0;
    CHECK(teacher_agreement(traj, p).agree == 0);  // uniform ties pick 0nm
    CHECK(Agreement{}.rate() == 0.0);
  }

  TEST_CASE("apply_update refuses non-finite results") {
    const auto shape = PolicyShape::for_feature_size(8);
    PolicyParams p = init_params(shape, 1);
    const PolicyParams p0 = p;
    PolicyGradient g = PolicyParams::zeros(shape);
    g.embed_w(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(apply_update(p, 1e-3, g), NumericError);
    CHECK(p == p0);
    g.embed_w(0, 0) = 1.0;
    apply_update(p, 0.5, g);
    CHECK(p.embed_w(0, 0) == p0.embed_w(0, 0) + 0.5);
  }
}
