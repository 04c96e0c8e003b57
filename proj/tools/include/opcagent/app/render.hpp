#pragma once

#include <filesystem>

#include "opcagent/litho.hpp"

namespace opcagent::app {

// One grayscale panel per grid pixel, top row = highest y.
using Panel = Grid<std::uint8_t>;

struct RenderSet {
  Panel target;   // target patterns
  Panel mask;     // corrected mask
  Panel contour;  // nominal printed contour (255) over the target (64)
  Panel pvband;   // outer print XOR inner print (255)
};

// Panels at the litho pixel pitch. Background pixels are 0, so the non-zero
// pixel count of `pvband` times pixel_nm^2 equals result.pvb.
RenderSet render_panels(const BinaryGrid& target, const BinaryGrid& mask,
                        const LithoResult& result);

// 8-bit grayscale PNG; identical panels give identical bytes.
void write_png(const Panel& panel, const std::filesystem::path& path);
// Reads an 8-bit grayscale PNG back into a panel (row 0 = bottom).
Panel read_png(const std::filesystem::path& path);

}  // namespace opcagent::app
