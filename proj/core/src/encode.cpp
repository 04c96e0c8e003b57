#include "opcagent/encode.hpp"

#include <algorithm>
#include <sstream>

#include "opcagent/error.hpp"
#include "opcagent/parallel.hpp"

namespace opcagent {

namespace {

void add_scanline(std::vector<double>& lines, double v, double lo, double hi) {
  if (v > lo && v < hi) lines.push_back(v);
}

void finish_scanlines(std::vector<double>& lines) {
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
}

bool overlaps(const Rect& bb, const Window& w) {
  return bb.x1 > w.origin.x && bb.x0 < w.origin.x + w.size && bb.y1 > w.origin.y &&
         bb.y0 < w.origin.y + w.size;
}

}  // namespace

SquishEncoding squish(std::span<const Polygon> geometry, const Window& window,
                      std::span<const double> extra_x, std::span<const double> extra_y) {
  const double x0 = window.origin.x;
  const double y0 = window.origin.y;
  const double x1 = x0 + window.size;
  const double y1 = y0 + window.size;

  std::vector<const Polygon*> inside;
  for (const auto& poly : geometry) {
    if (overlaps(poly.bbox(), window)) inside.push_back(&poly);
  }

  std::vector<double> xs{x0, x1};
  std::vector<double> ys{y0, y1};
  for (const Polygon* poly : inside) {
    for (const auto& p : poly->vertices()) {
      add_scanline(xs, p.x, x0, x1);
      add_scanline(ys, p.y, y0, y1);
    }
  }
  for (double v : extra_x) add_scanline(xs, v, x0, x1);
  for (double v : extra_y) add_scanline(ys, v, y0, y1);
  finish_scanlines(xs);
  finish_scanlines(ys);

  SquishEncoding enc;
  enc.window = window;
  enc.delta_x.resize(xs.size() - 1);
  enc.delta_y.resize(ys.size() - 1);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) enc.delta_x[i] = xs[i + 1] - xs[i];
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) enc.delta_y[i] = ys[i + 1] - ys[i];
  const std::size_t cols = enc.delta_x.size();
  enc.cells.assign(enc.delta_y.size() * cols, 0);

  // Every cell lies entirely inside or outside the geometry, so testing the
  // cell center is exact. Row by row: intervals from vertical-edge crossings.
  std::vector<double> crossings;
  for (std::size_t r = 0; r < enc.delta_y.size(); ++r) {
    const double yc = 0.5 * (ys[r] + ys[r + 1]);
    for (const Polygon* poly : inside) {
      const Rect bb = poly->bbox();
      if (yc < bb.y0 || yc >= bb.y1) continue;
      crossings.clear();
      const auto& v = poly->vertices();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const Point& a = v[i];
        const Point& b = v[(i + 1) % v.size()];
        if (a.x == b.x && yc >= std::min(a.y, b.y) && yc < std::max(a.y, b.y)) {
          crossings.push_back(a.x);
        }
      }
      std::sort(crossings.begin(), crossings.end());
      for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
        const double lo = crossings[k];
        const double hi = crossings[k + 1];
        for (std::size_t c = 0; c < cols; ++c) {
          const double xc = 0.5 * (xs[c] + xs[c + 1]);
          if (xc >= lo && xc < hi) enc.cells[r * cols + c] = 1;
        }
      }
    }
  }
  return enc;
}

std::vector<CellBox> reconstruct(const SquishEncoding& enc) {
  std::vector<CellBox> boxes;
  double y = enc.window.origin.y;
  for (int r = 0; r < enc.rows(); ++r) {
    double x = enc.window.origin.x;
    for (int c = 0; c < enc.cols(); ++c) {
      if (enc.at(r, c)) boxes.push_back({x, y, x + enc.delta_x[static_cast<std::size_t>(c)],
                                         y + enc.delta_y[static_cast<std::size_t>(r)]});
      x += enc.delta_x[static_cast<std::size_t>(c)];
    }
    y += enc.delta_y[static_cast<std::size_t>(r)];
  }
  return boxes;
}

bool occupied_at(const SquishEncoding& enc, Vec2 p) {
  double y = enc.window.origin.y;
  int row = -1;
  for (int r = 0; r < enc.rows(); ++r) {
    y += enc.delta_y[static_cast<std::size_t>(r)];
    if (p.y < y) {
      row = r;
      break;
    }
  }
  double x = enc.window.origin.x;
  int col = -1;
  for (int c = 0; c < enc.cols(); ++c) {
    x += enc.delta_x[static_cast<std::size_t>(c)];
    if (p.x < x) {
      col = c;
      break;
    }
  }
  return row >= 0 && col >= 0 && enc.at(row, col) != 0;
}

FeatureTensor adapt(const SquishEncoding& enc, int dx, int dy) {
  if (enc.cols() > dx || enc.rows() > dy) {
    std::ostringstream os;
    os << "squish pattern has " << enc.rows() << "x" << enc.cols()
       << " cells, more than the " << dy << "x" << dx << " feature canvas";
    throw EncodingError(os.str());
  }
  FeatureTensor t(3, dy, dx);
  const int r0 = (dy - enc.rows()) / 2;
  const int c0 = (dx - enc.cols()) / 2;
  for (int r = 0; r < enc.rows(); ++r) {
    const double sy = enc.delta_y[static_cast<std::size_t>(r)] / enc.window.size;
    for (int c = 0; c < enc.cols(); ++c) {
      t.at(0, r0 + r, c0 + c) = enc.at(r, c);
      t.at(1, r0 + r, c0 + c) = sy;
      t.at(2, r0 + r, c0 + c) = enc.delta_x[static_cast<std::size_t>(c)] / enc.window.size;
    }
  }
  return t;
}

int feature_size(LayerKind layer) { return layer == LayerKind::via ? 128 : 64; }

NodeFeature node_features(std::span<const Polygon> mask_and_srafs,
                          std::span<const Polygon> targets, const Segment& segment, int size) {
  const Window window = Window::centered(segment.control_point);
  std::vector<double> tx;
  std::vector<double> ty;
  for (const auto& poly : targets) {
    for (const auto& p : poly.vertices()) {
      tx.push_back(p.x);
      ty.push_back(p.y);
    }
  }
  const FeatureTensor a = adapt(squish(mask_and_srafs, window), size, size);
  const FeatureTensor b = adapt(squish(mask_and_srafs, window, tx, ty), size, size);
  NodeFeature out(6, size, size);
  const std::size_t plane = a.data.size();
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(plane));
  return out;
}

std::vector<NodeFeature> encode_mask(const MaskState& mask, int size) {
  const auto geometry = materialize(mask).all();
  const auto& base = *mask.base;
  std::vector<NodeFeature> out(base.size());
  parallel_for(base.size(), [&](std::size_t i) {
    out[i] = node_features(geometry, base.layout.targets, base.segments[i], size);
  });
  return out;
}

}  // namespace opcagent
