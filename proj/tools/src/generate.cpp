#include "opcagent/app/generate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "opcagent/error.hpp"
#include "opcagent/geometry.hpp"

namespace opcagent::app {
namespace {

constexpr int kAttempts = 2000;

using Rng = std::mt19937_64;

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Layout via_clip(Rng& rng) {
  constexpr int margin = 300;
  constexpr int lo = margin;
  constexpr int hi = kViaClipNm - margin - kViaSize;
  Layout l{kViaClipNm, kViaClipNm, LayerKind::via, {}, {}};
  const int count = uniform(rng, 2, 6);
  std::vector<Point> corners;
  for (int attempt = 0; static_cast<int>(corners.size()) < count; ++attempt) {
    if (attempt == kAttempts) {
      throw GenerationError("could not place " + std::to_string(count) + " vias at " +
                            std::to_string(static_cast<int>(kViaPitchNm)) + " nm pitch");
    }
    Point p{uniform(rng, lo, hi), uniform(rng, lo, hi)};
    // Half the vias land close to an existing one so that neighbours interact.
    if (!corners.empty() && uniform(rng, 0, 1) == 1) {
      const Point& anchor = corners[static_cast<std::size_t>(
          uniform(rng, 0, static_cast<int>(corners.size()) - 1))];
      const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(rng);
      const double dist = std::uniform_real_distribution<double>(kViaPitchNm, 2 * kViaPitchNm)(rng);
      p = {anchor.x + static_cast<int>(std::lround(dist * std::cos(angle))),
           anchor.y + static_cast<int>(std::lround(dist * std::sin(angle)))};
      if (p.x < lo || p.x > hi || p.y < lo || p.y > hi) continue;
    }
    // Keep every vertex on the 2 nm litho pixel grid.
    p.x -= p.x % 2;
    p.y -= p.y % 2;
    bool ok = true;
    for (const Point& q : corners) {
      const double dx = p.x - q.x;
      const double dy = p.y - q.y;
      if (dx * dx + dy * dy < kViaPitchNm * kViaPitchNm) ok = false;
    }
    if (ok) corners.push_back(p);
  }
  for (const Point& c : corners) {
    l.targets.push_back(Polygon::rectangle(c.x, c.y, c.x + kViaSize, c.y + kViaSize));
  }
  return l;
}

// A straight wire, or an L made of two arms.
struct Wire {
  std::vector<Rect> arms;
  Polygon shape;
};

Wire random_wire(Rng& rng) {
  // Even coordinates keep every vertex on the 2 nm litho pixel grid.
  const int w = 2 * uniform(rng, 25, 35);
  const int len = 2 * uniform(rng, 125, 450);
  const int arm = uniform(rng, 0, 9) < 3 ? 2 * uniform(rng, 75, 225) : 0;
  const int x0 = 2 * uniform(rng, 0, kMetalClipNm / 2);
  const int y0 = 2 * uniform(rng, 0, kMetalClipNm / 2);
  // Horizontal bar with an optional arm rising from its right end, then a
  // random mirror / transpose.
  std::vector<Point> ring;
  std::vector<Rect> arms{{x0, y0, x0 + len, y0 + w}};
  if (arm > 0) {
    ring = {{x0, y0},           {x0 + len, y0},     {x0 + len, y0 + arm},
            {x0 + len - w, y0 + arm}, {x0 + len - w, y0 + w}, {x0, y0 + w}};
    arms.push_back({x0 + len - w, y0, x0 + len, y0 + arm});
  } else {
    ring = {{x0, y0}, {x0 + len, y0}, {x0 + len, y0 + w}, {x0, y0 + w}};
  }
  const bool flip_x = uniform(rng, 0, 1) == 1;
  const bool flip_y = uniform(rng, 0, 1) == 1;
  const bool transpose = uniform(rng, 0, 1) == 1;
  auto map = [&](Point p) {
    if (flip_x) p.x = 2 * x0 - p.x;
    if (flip_y) p.y = 2 * y0 - p.y;
    if (transpose) std::swap(p.x, p.y);
    return p;
  };
  Wire wire;
  for (auto& p : ring) p = map(p);
  for (const Rect& r : arms) {
    const Point a = map({r.x0, r.y0});
    const Point b = map({r.x1, r.y1});
    wire.arms.push_back(
        {std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)});
  }
  wire.shape = canonical_polygon(std::move(ring));
  return wire;
}

bool in_clip(const Wire& w) {
  constexpr int margin = 100;
  for (const Rect& r : w.arms) {
    if (r.x0 < margin || r.y0 < margin || r.x1 > kMetalClipNm - margin ||
        r.y1 > kMetalClipNm - margin) {
      return false;
    }
  }
  return true;
}

Layout metal_clip(Rng& rng) {
  Layout l{kMetalClipNm, kMetalClipNm, LayerKind::metal, {}, {}};
  const int count = uniform(rng, 2, 6);
  std::vector<Wire> wires;
  for (int attempt = 0; static_cast<int>(wires.size()) < count; ++attempt) {
    if (attempt == kAttempts) {
      throw GenerationError("could not place " + std::to_string(count) + " wires at " +
                            std::to_string(static_cast<int>(kMetalSpacingNm)) + " nm spacing");
    }
    Wire w = random_wire(rng);
    if (!in_clip(w)) continue;
    bool ok = true;
    for (const Wire& other : wires) {
      for (const Rect& a : w.arms) {
        for (const Rect& b : other.arms) {
          if (rect_distance(a, b) < kMetalSpacingNm) ok = false;
        }
      }
    }
    if (ok) wires.push_back(std::move(w));
  }
  for (auto& w : wires) l.targets.push_back(std::move(w.shape));
  return l;
}

}  // namespace

Layout generate_clip(LayerKind layer, std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(layer)};
  Rng rng(seq);
  Layout l = layer == LayerKind::via ? via_clip(rng) : metal_clip(rng);
  validate_layout(l);
  return l;
}

std::vector<Layout> generate_clips(LayerKind layer, std::uint64_t seed, int count) {
  if (count < 0) throw GenerationError("clip count must be non-negative");
  std::vector<Layout> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(generate_clip(layer, seed, i));
  return out;
}

}  // namespace opcagent::app
