#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace opcagent {

// Integer nanometer coordinates.
struct Point {
  std::int32_t x = 0;
  std::int32_t y = 0;

  friend auto operator<=>(const Point&, const Point&) = default;
};

// Fractional nanometer coordinates; used where a midpoint of an odd-length
// span has to stay exact (x.5 is representable).
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

enum class Axis { horizontal, vertical };

// Unit axis-parallel direction.
struct Direction {
  int dx = 0;
  int dy = 0;

  friend bool operator==(const Direction&, const Direction&) = default;
};

struct Rect {
  std::int32_t x0 = 0;
  std::int32_t y0 = 0;
  std::int32_t x1 = 0;
  std::int32_t y1 = 0;

  std::int64_t area() const {
    return static_cast<std::int64_t>(x1 - x0) * (y1 - y0);
  }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Rectilinear polygon with counter-clockwise vertices. The constructor does not
// validate; use validate_polygon() or canonical_polygon() for that.
class Polygon {
public:
  Polygon() = default;
  explicit Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {}

  static Polygon rectangle(std::int32_t x0, std::int32_t y0, std::int32_t x1,
                           std::int32_t y1);

  const std::vector<Point>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  const Point& operator[](std::size_t i) const { return vertices_[i]; }

  Rect bbox() const;
  // Twice the signed area; positive for CCW.
  std::int64_t signed_area2() const;
  double area() const { return static_cast<double>(signed_area2()) / 2.0; }
  // Even-odd test; points exactly on the boundary give an unspecified answer.
  bool contains(Vec2 p) const;

  friend bool operator==(const Polygon&, const Polygon&) = default;

private:
  std::vector<Point> vertices_;
};

// Returns an empty string when the vertex ring is a simple rectilinear polygon
// with positive area (either orientation), otherwise a description of the
// first problem found. Consecutive duplicate and collinear vertices are
// reported as problems.
std::string rectilinear_problem(std::span<const Point> ring);

// Drops duplicate and collinear vertices, orients CCW, and rotates so the
// ring starts at the leftmost-lowest vertex. Throws GeometryError when the
// result is not a simple rectilinear polygon.
Polygon canonical_polygon(std::vector<Point> ring);

bool is_canonical(const Polygon& poly);

// Euclidean distance between two closed axis-parallel rectangles (0 when they
// touch or overlap).
double rect_distance(const Rect& a, const Rect& b);

}  // namespace opcagent
