#include <benchmark/benchmark.h>

#include <memory>

#include "opcagent/app/generate.hpp"
#include "opcagent/encode.hpp"
#include "opcagent/graph.hpp"
#include "opcagent/litho.hpp"
#include "opcagent/policy.hpp"

using namespace opcagent;

namespace {

std::shared_ptr<const SegmentedLayout> clip(LayerKind layer) {
  return std::make_shared<const SegmentedLayout>(app::generate_clip(layer, 1, 0));
}

void BM_Simulate(benchmark::State& state) {
  const auto layer = static_cast<LayerKind>(state.range(0));
  const auto base = clip(layer);
  const LithoModel model(LithoConfig{}, base->layout.width, base->layout.height);
  const MaskState m = MaskState::uniform(base, 3);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(m, model).epe_total);
  state.SetLabel(std::string(to_string(layer)));
}
BENCHMARK(BM_Simulate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Squish(benchmark::State& state) {
  const auto base = clip(LayerKind::metal);
  const auto polys = materialize(MaskState::uniform(base, 3)).all();
  const Window w = Window::centered(base->segments[0].control_point);
  for (auto _ : state) benchmark::DoNotOptimize(squish(polys, w).cells.size());
}
BENCHMARK(BM_Squish);

void BM_EncodeMask(benchmark::State& state) {
  const auto layer = static_cast<LayerKind>(state.range(0));
  const auto base = clip(layer);
  const MaskState m = MaskState::uniform(base, 3);
  for (auto _ : state) benchmark::DoNotOptimize(encode_mask(m, feature_size(layer)).size());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(base->size()));
}
BENCHMARK(BM_EncodeMask)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

struct PolicyFixture {
  std::shared_ptr<const SegmentedLayout> base = clip(LayerKind::via);
  PolicyShape shape = PolicyShape::for_feature_size(128);
  PolicyParams params = init_params(shape, 1);
  SegmentGraph graph{base->segments};
  std::vector<EmbedInput> inputs = prepare_inputs(encode_mask(MaskState::uniform(base, 3), 128), shape);
  std::vector<int> actions = std::vector<int>(base->size(), 2);
};

void BM_PolicyForward(benchmark::State& state) {
  const PolicyFixture f;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(std::span<const EmbedInput>(f.inputs), f.graph, f.params).probs.sum());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.inputs.size()));
}
BENCHMARK(BM_PolicyForward)->Unit(benchmark::kMicrosecond);

void BM_PolicyGradient(benchmark::State& state) {
  const PolicyFixture f;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        logprob_grad(std::span<const EmbedInput>(f.inputs), f.graph, f.params, f.actions, 1.0).head_c.sum());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.inputs.size()));
}
BENCHMARK(BM_PolicyGradient)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
