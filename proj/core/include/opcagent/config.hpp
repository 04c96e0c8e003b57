#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "opcagent/litho.hpp"
#include "opcagent/rl.hpp"

namespace opcagent {

// Everything a run needs besides its inputs.
struct RunConfig {
  LayerKind layer = LayerKind::via;
  LithoConfig litho;
  RlConfig rl;
  std::uint64_t policy_seed = 1;

  static RunConfig defaults(LayerKind layer);

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// JSON with optional sections "litho", "rl" and "policy" and an optional
// top-level "layer" (default `layer`). Missing keys take the layer defaults;
// unknown keys are rejected. Throws ConfigError.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>",
                       LayerKind layer = LayerKind::via);
RunConfig read_config(const std::filesystem::path& path, LayerKind layer = LayerKind::via);
// Full dump of every field; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);

}  // namespace opcagent
