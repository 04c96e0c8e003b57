#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opcagent/geometry.hpp"

namespace opcagent {

enum class LayerKind { via, metal };

std::string_view to_string(LayerKind kind);
LayerKind layer_from_string(std::string_view name);  // throws ConfigError

inline constexpr std::int32_t kViaSize = 70;
inline constexpr std::int32_t kMeasurePitch = 60;
inline constexpr std::int32_t kMinEdgeLength = 4;
inline constexpr int kDefaultOffsetBound = 40;

// One clip: target patterns plus optional static SRAFs.
struct Layout {
  std::int32_t width = 0;
  std::int32_t height = 0;
  LayerKind layer = LayerKind::via;
  std::vector<Polygon> targets;
  std::vector<Polygon> srafs;

  friend bool operator==(const Layout&, const Layout&) = default;
};

// Throws GeometryError describing the first violated invariant.
void validate_layout(const Layout& layout);

// A piece of a target edge that moves as a unit.
struct Segment {
  int id = 0;
  int polygon_id = 0;
  Axis axis = Axis::horizontal;  // orientation of the span
  Point start;                   // span endpoints in clockwise traversal order
  Point end;
  Vec2 control_point;
  Direction outward_normal;
  std::optional<Vec2> measure_point;

  std::int32_t length() const;
};

// Splits every target boundary into segments in canonical order: polygons by
// index, then clockwise from the leftmost-lowest vertex. Via edges become one
// segment measured at the edge center; metal edges along the polygon's primary
// direction are cut at a 60nm measure pitch. Throws GeometryError for edges
// shorter than 4nm.
std::vector<Segment> fragment(const Layout& layout);

// Axis of the longer bounding-box side; ties go to horizontal.
Axis primary_axis(const Polygon& poly);

// Fragmentation results plus the lookups the engine needs repeatedly.
struct SegmentedLayout {
  Layout layout;
  std::vector<Segment> segments;
  // segments of polygon p occupy [polygon_begin[p], polygon_begin[p+1]).
  std::vector<int> polygon_begin;
  // For every segment, the index of the segment whose measure point supplies
  // its EPE (itself when it has one, else the nearest on the same polygon).
  std::vector<int> epe_source;
  // Segment indices that carry a measure point, in segment order.
  std::vector<int> measured_segments;

  explicit SegmentedLayout(Layout l);
  std::size_t size() const { return segments.size(); }
};

// The mutable optimization state: one signed offset (nm, positive outward)
// per segment.
struct MaskState {
  std::shared_ptr<const SegmentedLayout> base;
  std::vector<int> offsets;

  static MaskState uniform(std::shared_ptr<const SegmentedLayout> base, int offset);
};

struct MaskGeometry {
  std::vector<Polygon> polygons;  // one per target, same order
  std::vector<Polygon> srafs;     // passed through unchanged

  std::vector<Polygon> all() const;
};

// Moves every segment span along its outward normal by its offset and joins
// neighbours with jogs. Throws SelfIntersectionError when a polygon collapses
// and GeometryError when an offset exceeds `offset_bound`.
MaskGeometry materialize(const MaskState& mask, int offset_bound = kDefaultOffsetBound);

// Single-polygon variant used when offsets must be rejected per polygon.
Polygon materialize_polygon(const SegmentedLayout& base, int polygon_id,
                            std::span<const int> offsets);

}  // namespace opcagent
