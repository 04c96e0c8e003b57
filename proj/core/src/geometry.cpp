#include "opcagent/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "opcagent/error.hpp"

namespace opcagent {

Polygon Polygon::rectangle(std::int32_t x0, std::int32_t y0, std::int32_t x1,
                           std::int32_t y1) {
  return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

Rect Polygon::bbox() const {
  if (vertices_.empty()) return {};
  Rect r{vertices_[0].x, vertices_[0].y, vertices_[0].x, vertices_[0].y};
  for (const auto& p : vertices_) {
    r.x0 = std::min(r.x0, p.x);
    r.y0 = std::min(r.y0, p.y);
    r.x1 = std::max(r.x1, p.x);
    r.y1 = std::max(r.y1, p.y);
  }
  return r;
}

std::int64_t Polygon::signed_area2() const {
  std::int64_t acc = 0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = vertices_[i];
    const Point& b = vertices_[(i + 1) % n];
    acc += static_cast<std::int64_t>(a.x) * b.y - static_cast<std::int64_t>(b.x) * a.y;
  }
  return acc;
}

bool Polygon::contains(Vec2 p) const {
  bool inside = false;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = vertices_[i];
    const Point& b = vertices_[(i + 1) % n];
    if (a.x != b.x) continue;  // only vertical edges cross a horizontal ray
    const double lo = std::min(a.y, b.y);
    const double hi = std::max(a.y, b.y);
    if (p.y >= lo && p.y < hi && a.x > p.x) inside = !inside;
  }
  return inside;
}

namespace {

struct Edge {
  Point a;
  Point b;
  bool horizontal() const { return a.y == b.y; }
};

bool closed_intervals_overlap(std::int32_t a0, std::int32_t a1, std::int32_t b0,
                              std::int32_t b1) {
  if (a0 > a1) std::swap(a0, a1);
  if (b0 > b1) std::swap(b0, b1);
  return a0 <= b1 && b0 <= a1;
}

bool edges_touch(const Edge& e, const Edge& f) {
  if (e.horizontal() && f.horizontal()) {
    return e.a.y == f.a.y && closed_intervals_overlap(e.a.x, e.b.x, f.a.x, f.b.x);
  }
  if (!e.horizontal() && !f.horizontal()) {
    return e.a.x == f.a.x && closed_intervals_overlap(e.a.y, e.b.y, f.a.y, f.b.y);
  }
  const Edge& h = e.horizontal() ? e : f;
  const Edge& v = e.horizontal() ? f : e;
  return closed_intervals_overlap(h.a.x, h.b.x, v.a.x, v.a.x) &&
         closed_intervals_overlap(v.a.y, v.b.y, h.a.y, h.a.y);
}

}  // namespace

std::string rectilinear_problem(std::span<const Point> ring) {
  const std::size_t n = ring.size();
  if (n < 4) return "polygon has fewer than 4 vertices";
  if (n % 2 != 0) return "rectilinear polygon needs an even vertex count";

  std::vector<Edge> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    edges[i] = {ring[i], ring[(i + 1) % n]};
    const auto& e = edges[i];
    if (e.a == e.b) {
      std::ostringstream os;
      os << "zero-length edge at vertex " << i;
      return os.str();
    }
    if (e.a.x != e.b.x && e.a.y != e.b.y) {
      std::ostringstream os;
      os << "edge " << i << " from (" << e.a.x << "," << e.a.y << ") to (" << e.b.x
         << "," << e.b.y << ") is not axis-parallel";
      return os.str();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (edges[i].horizontal() == edges[(i + 1) % n].horizontal()) {
      std::ostringstream os;
      os << "collinear edges meet at vertex " << (i + 1) % n;
      return os.str();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the wrap
      if (edges_touch(edges[i], edges[j])) {
        std::ostringstream os;
        os << "edges " << i << " and " << j << " intersect";
        return os.str();
      }
    }
  }
  if (Polygon(std::vector<Point>(ring.begin(), ring.end())).signed_area2() == 0) {
    return "polygon has zero area";
  }
  return {};
}

Polygon canonical_polygon(std::vector<Point> ring) {
  // Remove consecutive duplicates (cyclic).
  std::vector<Point> pts;
  pts.reserve(ring.size());
  for (const auto& p : ring) {
    if (pts.empty() || pts.back() != p) pts.push_back(p);
  }
  while (pts.size() > 1 && pts.front() == pts.back()) pts.pop_back();

  // Remove collinear vertices that continue in the same direction; reversals
  // are degenerate spikes and rejected.
  bool changed = true;
  while (changed && pts.size() >= 3) {
    changed = false;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& p = pts[(i + n - 1) % n];
      const Point& v = pts[i];
      const Point& q = pts[(i + 1) % n];
      const bool collinear_x = p.x == v.x && v.x == q.x;
      const bool collinear_y = p.y == v.y && v.y == q.y;
      if (!collinear_x && !collinear_y) continue;
      const std::int64_t d1 = collinear_x ? v.y - p.y : v.x - p.x;
      const std::int64_t d2 = collinear_x ? q.y - v.y : q.x - v.x;
      if (d1 * d2 < 0) throw GeometryError("polygon outline folds back on itself");
      pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
      changed = true;
      break;
    }
  }

  if (auto problem = rectilinear_problem(pts); !problem.empty()) {
    throw GeometryError(problem);
  }
  Polygon tmp(pts);
  if (tmp.signed_area2() < 0) std::reverse(pts.begin(), pts.end());
  const auto start = std::min_element(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  std::rotate(pts.begin(), start, pts.end());
  return Polygon(std::move(pts));
}

bool is_canonical(const Polygon& poly) {
  try {
    return canonical_polygon(poly.vertices()) == poly;
  } catch (const GeometryError&) {
    return false;
  }
}

double rect_distance(const Rect& a, const Rect& b) {
  const double dx = std::max({0, a.x0 - b.x1, b.x0 - a.x1});
  const double dy = std::max({0, a.y0 - b.y1, b.y0 - a.y1});
  return std::hypot(dx, dy);
}

}  // namespace opcagent
