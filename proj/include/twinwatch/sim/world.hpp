#pragma once

#include <vector>

#include "twinwatch/core/errors.hpp"
#include "twinwatch/sim/geometry.hpp"

namespace twinwatch::sim {

/// Obstacle geometry: solid rectangles and circles inside a bounding box.
struct World {
  Rect bounds{-1.0, 30.0, -3.0, 3.0};
  std::vector<Rect> rects;
  std::vector<Circle> circles;

  /// Free distance from `origin` along `dir` to the nearest obstacle surface
  /// or bounding wall.
  double cast_ray(Vec2 origin, Vec2 dir) const {
    double best = ray_rect_inside(origin, dir, bounds);
    for (const auto& r : rects) {
      double t = ray_rect(origin, dir, r);
      if (t < best) best = t;
    }
    for (const auto& c : circles) {
      double t = ray_circle(origin, dir, c);
      if (t < best) best = t;
    }
    return best;
  }

  bool inside_obstacle(Vec2 p) const {
    for (const auto& r : rects)
      if (p.x > r.x_min && p.x < r.x_max && p.y > r.y_min && p.y < r.y_max) return true;
    for (const auto& c : circles) {
      double dx = p.x - c.x, dy = p.y - c.y;
      if (dx * dx + dy * dy < c.r * c.r) return true;
    }
    return false;
  }
};

/// One traction segment along the x axis. Below the breakaway speed the
/// wheels spin in place; above it the commanded speed is scaled by traction.
struct TerrainSegment {
  double x_start = 0.0;
  double x_end = 0.0;
  double traction = 1.0;  // (0, 1]
  double breakaway = 0.0; // m/s
};

struct TerrainProfile {
  std::vector<TerrainSegment> segments;

  void validate() const {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      if (!(s.traction > 0.0 && s.traction <= 1.0))
        throw ConfigError("terrain traction must be in (0, 1]");
      if (s.breakaway < 0.0) throw ConfigError("terrain breakaway must be >= 0");
      if (s.x_end <= s.x_start) throw ConfigError("terrain segment must have x_end > x_start");
      for (std::size_t j = i + 1; j < segments.size(); ++j) {
        const auto& o = segments[j];
        if (s.x_start < o.x_end && o.x_start < s.x_end)
          throw ConfigError("terrain segments must not overlap");
      }
    }
  }

  /// Segment covering x; uncovered ground is ideal (traction 1, breakaway 0).
  TerrainSegment at(double x) const {
    for (const auto& s : segments)
      if (x >= s.x_start && x < s.x_end) return s;
    return TerrainSegment{x, x, 1.0, 0.0};
  }
};

} // namespace twinwatch::sim
