#pragma once

#include <cstdint>
#include <vector>

#include "opcagent/layout.hpp"

namespace opcagent::app {

inline constexpr std::int32_t kViaClipNm = 2000;
inline constexpr std::int32_t kMetalClipNm = 1500;
inline constexpr double kViaPitchNm = 200.0;
inline constexpr double kMetalSpacingNm = 60.0;

// Clip `index` of the dataset drawn with `seed`. Each clip depends only on
// (seed, index). Throws GenerationError when placement keeps failing.
Layout generate_clip(LayerKind layer, std::uint64_t seed, int index);

std::vector<Layout> generate_clips(LayerKind layer, std::uint64_t seed, int count);

}  // namespace opcagent::app
