#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "opcagent/geometry.hpp"
#include "opcagent/layout.hpp"

namespace opcagent {

inline constexpr double kWindowNm = 500.0;

// Square sampling window, lower-left corner at `origin`.
struct Window {
  Vec2 origin;
  double size = kWindowNm;

  static Window centered(Vec2 center, double size = kWindowNm) {
    return {{center.x - size / 2, center.y - size / 2}, size};
  }
};

// Lossless grid encoding of the geometry inside a window: scanlines at every
// geometry edge plus the window borders, an occupancy matrix, and the cell
// spacings. Row 0 is the bottom of the window.
struct SquishEncoding {
  Window window;
  std::vector<double> delta_x;       // column widths, sum = window size
  std::vector<double> delta_y;       // row heights, sum = window size
  std::vector<std::uint8_t> cells;   // rows x cols, row-major

  int rows() const { return static_cast<int>(delta_y.size()); }
  int cols() const { return static_cast<int>(delta_x.size()); }
  std::uint8_t at(int r, int c) const {
    return cells[static_cast<std::size_t>(r) * delta_x.size() + c];
  }
};

// Encodes `geometry` clipped to `window`. `extra_x` / `extra_y` add scanlines
// (coordinates outside the open window interval are ignored).
SquishEncoding squish(std::span<const Polygon> geometry, const Window& window,
                      std::span<const double> extra_x = {}, std::span<const double> extra_y = {});

// Occupied cells as absolute-coordinate boxes {x0, y0, x1, y1}.
struct CellBox {
  double x0, y0, x1, y1;
};
std::vector<CellBox> reconstruct(const SquishEncoding& enc);

// Whether point p (inside the window) falls in an occupied cell.
bool occupied_at(const SquishEncoding& enc, Vec2 p);

// channels x rows x cols tensor, channel-major.
struct FeatureTensor {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  FeatureTensor() = default;
  FeatureTensor(int ch, int r, int c)
      : channels(ch), rows(r), cols(c), data(static_cast<std::size_t>(ch) * r * c, 0.0) {}

  double& at(int ch, int r, int c) {
    return data[(static_cast<std::size_t>(ch) * rows + r) * cols + c];
  }
  double at(int ch, int r, int c) const {
    return data[(static_cast<std::size_t>(ch) * rows + r) * cols + c];
  }
  friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;
};

// Per-segment policy input: 6 channels of size x size. Channels 0-2 encode
// the mask geometry, 3-5 the same geometry with extra scanlines at every
// target edge.
using NodeFeature = FeatureTensor;

// Fixed-size tensor from a squish encoding: channel 0 is the occupancy matrix
// centered in the canvas, channel 1 broadcasts delta_y[r] / window along each
// occupied row, channel 2 broadcasts delta_x[c] / window along each occupied
// column. Everything outside the occupied block is zero. Throws EncodingError
// when the encoding has more rows/cols than the canvas.
FeatureTensor adapt(const SquishEncoding& enc, int dx, int dy);

// 128 for via layers, 64 for metal.
int feature_size(LayerKind layer);

NodeFeature node_features(std::span<const Polygon> mask_and_srafs,
                          std::span<const Polygon> targets, const Segment& segment, int size);

// Features for every segment of the mask, in segment order.
std::vector<NodeFeature> encode_mask(const MaskState& mask, int size);

}  // namespace opcagent
