#include "opcagent/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "opcagent/error.hpp"

namespace opcagent {

std::string_view to_string(LayerKind kind) {
  return kind == LayerKind::via ? "via" : "metal";
}

LayerKind layer_from_string(std::string_view name) {
  if (name == "via") return LayerKind::via;
  if (name == "metal") return LayerKind::metal;
  throw ConfigError("unknown layer kind '" + std::string(name) + "' (expected via or metal)");
}

namespace {

bool bboxes_touch(const Rect& a, const Rect& b) {
  return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

bool segments_touch(Point a0, Point a1, Point b0, Point b1) {
  const auto lo = [](std::int32_t u, std::int32_t v) { return std::min(u, v); };
  const auto hi = [](std::int32_t u, std::int32_t v) { return std::max(u, v); };
  return lo(a0.x, a1.x) <= hi(b0.x, b1.x) && lo(b0.x, b1.x) <= hi(a0.x, a1.x) &&
         lo(a0.y, a1.y) <= hi(b0.y, b1.y) && lo(b0.y, b1.y) <= hi(a0.y, a1.y);
}

bool polygons_disjoint(const Polygon& a, const Polygon& b) {
  if (!bboxes_touch(a.bbox(), b.bbox())) return true;
  const auto& va = a.vertices();
  const auto& vb = b.vertices();
  for (std::size_t i = 0; i < va.size(); ++i) {
    for (std::size_t j = 0; j < vb.size(); ++j) {
      // Axis-parallel edges: bbox overlap of the two edges is exact contact.
      if (segments_touch(va[i], va[(i + 1) % va.size()], vb[j], vb[(j + 1) % vb.size()])) {
        return false;
      }
    }
  }
  const Vec2 pa{static_cast<double>(va[0].x), static_cast<double>(va[0].y)};
  const Vec2 pb{static_cast<double>(vb[0].x), static_cast<double>(vb[0].y)};
  return !b.contains(pa) && !a.contains(pb);
}

void check_polygon(const Polygon& poly, const Layout& layout, const std::string& label) {
  if (auto problem = rectilinear_problem(poly.vertices()); !problem.empty()) {
    throw GeometryError(label + ": " + problem);
  }
  if (!is_canonical(poly)) {
    throw GeometryError(label + ": vertices must be CCW starting at the leftmost-lowest vertex");
  }
  for (const auto& p : poly.vertices()) {
    if (p.x < 0 || p.y < 0 || p.x > layout.width || p.y > layout.height) {
      std::ostringstream os;
      os << label << ": vertex (" << p.x << "," << p.y << ") outside clip " << layout.width
         << "x" << layout.height;
      throw GeometryError(os.str());
    }
  }
}

}  // namespace

void validate_layout(const Layout& layout) {
  if (layout.width <= 0 || layout.height <= 0) {
    throw GeometryError("clip width and height must be positive");
  }
  for (std::size_t i = 0; i < layout.targets.size(); ++i) {
    const std::string label = "targets[" + std::to_string(i) + "]";
    const Polygon& poly = layout.targets[i];
    check_polygon(poly, layout, label);
    if (layout.layer == LayerKind::via) {
      const Rect bb = poly.bbox();
      if (poly.size() != 4 || bb.x1 - bb.x0 != kViaSize || bb.y1 - bb.y0 != kViaSize) {
        throw GeometryError(label + ": via targets must be 70x70nm squares");
      }
    }
  }
  for (std::size_t i = 0; i < layout.srafs.size(); ++i) {
    check_polygon(layout.srafs[i], layout, "srafs[" + std::to_string(i) + "]");
  }
  for (std::size_t i = 0; i < layout.targets.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.targets.size(); ++j) {
      if (!polygons_disjoint(layout.targets[i], layout.targets[j])) {
        std::ostringstream os;
        os << "targets[" << i << "] and targets[" << j << "] overlap or touch";
        throw GeometryError(os.str());
      }
    }
  }
}

std::int32_t Segment::length() const {
  return std::abs(end.x - start.x) + std::abs(end.y - start.y);
}

Axis primary_axis(const Polygon& poly) {
  const Rect bb = poly.bbox();
  return (bb.y1 - bb.y0) > (bb.x1 - bb.x0) ? Axis::vertical : Axis::horizontal;
}

namespace {

struct Piece {
  std::int32_t lo = 0;  // positions along the edge, measured from its lower/left end
  std::int32_t hi = 0;
  std::optional<double> measure;
};

std::vector<Piece> split_edge(std::int32_t length, LayerKind layer, bool along_primary) {
  if (layer == LayerKind::via) return {{0, length, length / 2.0}};
  if (!along_primary) return {{0, length, std::nullopt}};

  const std::int32_t count = std::max(1, length / kMeasurePitch);
  if (count == 1) return {{0, length, length / 2.0}};

  const std::int32_t remainder = length - kMeasurePitch * count;
  const std::int32_t first_extra = (remainder + 1) / 2;  // odd nm goes to the low end
  std::vector<Piece> pieces(static_cast<std::size_t>(count));
  for (std::int32_t j = 0; j < count; ++j) {
    const std::int32_t lo = j == 0 ? 0 : kMeasurePitch * j + first_extra;
    const std::int32_t hi = j == count - 1 ? length : kMeasurePitch * (j + 1) + first_extra;
    const double measure = length / 2.0 + (j + 1 - (count + 1) / 2.0) * kMeasurePitch;
    pieces[static_cast<std::size_t>(j)] = {lo, hi, measure};
  }
  return pieces;
}

}  // namespace

std::vector<Segment> fragment(const Layout& layout) {
  std::vector<Segment> segments;
  for (std::size_t pid = 0; pid < layout.targets.size(); ++pid) {
    const auto& v = layout.targets[pid].vertices();
    const std::size_t n = v.size();
    const Axis primary = primary_axis(layout.targets[pid]);
    for (std::size_t k = 0; k < n; ++k) {
      // Clockwise walk over a CCW ring: v0, v[n-1], v[n-2], ...
      const Point a = v[(n - k) % n];
      const Point b = v[(n - k - 1) % n];
      const std::int32_t length = std::abs(b.x - a.x) + std::abs(b.y - a.y);
      if (length < kMinEdgeLength) {
        std::ostringstream os;
        os << "targets[" << pid << "]: edge from (" << a.x << "," << a.y << ") to (" << b.x << ","
           << b.y << ") is shorter than " << kMinEdgeLength << "nm";
        throw GeometryError(os.str());
      }
      const Axis axis = a.y == b.y ? Axis::horizontal : Axis::vertical;
      const Direction dir{(b.x > a.x) - (b.x < a.x), (b.y > a.y) - (b.y < a.y)};
      const Direction normal{-dir.dy, dir.dx};
      const Point low = (a.x < b.x || a.y < b.y) ? a : b;
      const Direction up = axis == Axis::horizontal ? Direction{1, 0} : Direction{0, 1};

      auto pieces = split_edge(length, layout.layer, axis == primary);
      const bool descending = low != a;
      if (descending) std::reverse(pieces.begin(), pieces.end());
      for (const auto& piece : pieces) {
        Segment s;
        s.id = static_cast<int>(segments.size());
        s.polygon_id = static_cast<int>(pid);
        s.axis = axis;
        const Point p_lo{low.x + up.dx * piece.lo, low.y + up.dy * piece.lo};
        const Point p_hi{low.x + up.dx * piece.hi, low.y + up.dy * piece.hi};
        s.start = descending ? p_hi : p_lo;
        s.end = descending ? p_lo : p_hi;
        s.control_point = {(s.start.x + s.end.x) / 2.0, (s.start.y + s.end.y) / 2.0};
        s.outward_normal = normal;
        if (piece.measure) {
          s.measure_point = Vec2{low.x + up.dx * *piece.measure, low.y + up.dy * *piece.measure};
        }
        segments.push_back(s);
      }
    }
  }
  return segments;
}

SegmentedLayout::SegmentedLayout(Layout l) : layout(std::move(l)) {
  validate_layout(layout);
  segments = fragment(layout);
  polygon_begin.assign(layout.targets.size() + 1, static_cast<int>(segments.size()));
  for (int i = static_cast<int>(segments.size()) - 1; i >= 0; --i) {
    polygon_begin[static_cast<std::size_t>(segments[static_cast<std::size_t>(i)].polygon_id)] = i;
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].measure_point) measured_segments.push_back(static_cast<int>(i));
  }
  epe_source.resize(segments.size());
  for (std::size_t p = 0; p + 1 < polygon_begin.size(); ++p) {
    const int b = polygon_begin[p];
    const int e = polygon_begin[p + 1];
    for (int i = b; i < e; ++i) {
      const Segment& s = segments[static_cast<std::size_t>(i)];
      if (s.measure_point) {
        epe_source[static_cast<std::size_t>(i)] = i;
        continue;
      }
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = b; j < e; ++j) {
        const auto& m = segments[static_cast<std::size_t>(j)].measure_point;
        if (!m) continue;
        const double d = std::hypot(m->x - s.control_point.x, m->y - s.control_point.y);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      epe_source[static_cast<std::size_t>(i)] = best;
    }
  }
}

MaskState MaskState::uniform(std::shared_ptr<const SegmentedLayout> base, int offset) {
  MaskState m;
  m.offsets.assign(base->size(), offset);
  m.base = std::move(base);
  return m;
}

std::vector<Polygon> MaskGeometry::all() const {
  std::vector<Polygon> out = polygons;
  out.insert(out.end(), srafs.begin(), srafs.end());
  return out;
}

Polygon materialize_polygon(const SegmentedLayout& base, int polygon_id,
                            std::span<const int> offsets) {
  const int b = base.polygon_begin[static_cast<std::size_t>(polygon_id)];
  const int e = base.polygon_begin[static_cast<std::size_t>(polygon_id) + 1];
  const auto shifted = [](Point p, Direction n, int o) {
    return Point{p.x + n.dx * o, p.y + n.dy * o};
  };

  std::vector<Point> ring;
  ring.reserve(static_cast<std::size_t>(2 * (e - b)));
  // Ring index of the vertex that closes each emitted span, with its segment.
  std::vector<std::pair<std::size_t, int>> span_ends;
  for (int i = b; i < e; ++i) {
    const int j = i + 1 < e ? i + 1 : b;
    const Segment& si = base.segments[static_cast<std::size_t>(i)];
    const Segment& sj = base.segments[static_cast<std::size_t>(j)];
    const int oi = offsets[static_cast<std::size_t>(i)];
    const int oj = offsets[static_cast<std::size_t>(j)];
    if (si.outward_normal == sj.outward_normal) {
      if (oi != oj) {  // jog at the shared endpoint
        span_ends.emplace_back(ring.size(), i);
        ring.push_back(shifted(si.end, si.outward_normal, oi));
        ring.push_back(shifted(sj.start, sj.outward_normal, oj));
      }
    } else {
      span_ends.emplace_back(ring.size(), i);
      ring.push_back(shifted(shifted(si.end, si.outward_normal, oi), sj.outward_normal, oj));
    }
  }

  // Every span must keep its traversal direction; shrinking a rectangle past
  // zero flips both axes and would otherwise keep the winding.
  for (const auto& [k, i] : span_ends) {
    const Segment& s = base.segments[static_cast<std::size_t>(i)];
    const Point from = ring[k == 0 ? ring.size() - 1 : k - 1];
    const Point to = ring[k];
    const std::int64_t want = s.axis == Axis::horizontal ? s.end.x - s.start.x : s.end.y - s.start.y;
    const std::int64_t got = s.axis == Axis::horizontal ? to.x - from.x : to.y - from.y;
    if (got == 0 || (got > 0) != (want > 0)) {
      throw SelfIntersectionError(polygon_id, "offsets collapse polygon " +
                                                  std::to_string(polygon_id) + " (edge inverted)");
    }
  }
  // The ring follows the clockwise traversal; a collapsed outline flips sign.
  if (Polygon(ring).signed_area2() >= 0) {
    throw SelfIntersectionError(polygon_id, "offsets collapse polygon " +
                                                std::to_string(polygon_id) + " (outline inverted)");
  }
  try {
    return canonical_polygon(std::move(ring));
  } catch (const GeometryError& err) {
    throw SelfIntersectionError(polygon_id, "offsets make polygon " + std::to_string(polygon_id) +
                                                " self-intersect: " + err.what());
  }
}

MaskGeometry materialize(const MaskState& mask, int offset_bound) {
  const SegmentedLayout& base = *mask.base;
  if (mask.offsets.size() != base.size()) {
    throw GeometryError("offset vector length does not match segment count");
  }
  for (std::size_t i = 0; i < mask.offsets.size(); ++i) {
    if (std::abs(mask.offsets[i]) > offset_bound) {
      throw GeometryError("offset of segment " + std::to_string(i) + " exceeds bound " +
                          std::to_string(offset_bound));
    }
  }
  MaskGeometry geo;
  geo.polygons.reserve(base.layout.targets.size());
  for (std::size_t p = 0; p < base.layout.targets.size(); ++p) {
    geo.polygons.push_back(materialize_polygon(base, static_cast<int>(p), mask.offsets));
  }
  geo.srafs = base.layout.srafs;
  return geo;
}

}  // namespace opcagent
