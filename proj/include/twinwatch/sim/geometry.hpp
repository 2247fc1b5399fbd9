#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace twinwatch::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Rect {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;

  bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

struct Circle {
  double x = 0.0, y = 0.0, r = 0.0;
};

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

/// Entry distance of a ray into a solid axis-aligned rectangle (slab method);
/// 0 when the origin is inside, kNoHit when the ray misses.
inline double ray_rect(Vec2 o, Vec2 d, const Rect& r) {
  double t0 = 0.0, t1 = kNoHit;
  for (int axis = 0; axis < 2; ++axis) {
    double oo = axis == 0 ? o.x : o.y;
    double dd = axis == 0 ? d.x : d.y;
    double lo = axis == 0 ? r.x_min : r.y_min;
    double hi = axis == 0 ? r.x_max : r.y_max;
    if (dd == 0.0) {
      if (oo < lo || oo > hi) return kNoHit;
      continue;
    }
    double ta = (lo - oo) / dd;
    double tb = (hi - oo) / dd;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) t0 = ta;
    if (tb < t1) t1 = tb;
    if (t0 > t1) return kNoHit;
  }
  return t0;
}

/// Exit distance of a ray from inside a rectangle (distance to its walls).
inline double ray_rect_inside(Vec2 o, Vec2 d, const Rect& r) {
  double t1 = kNoHit;
  for (int axis = 0; axis < 2; ++axis) {
    double oo = axis == 0 ? o.x : o.y;
    double dd = axis == 0 ? d.x : d.y;
    double lo = axis == 0 ? r.x_min : r.y_min;
    double hi = axis == 0 ? r.x_max : r.y_max;
    if (dd == 0.0) continue;
    double ta = (lo - oo) / dd;
    double tb = (hi - oo) / dd;
    double t_exit = ta > tb ? ta : tb;
    if (t_exit < t1) t1 = t_exit;
  }
  return t1 < 0.0 ? 0.0 : t1;
}

/// Nearest non-negative intersection of a ray with a circle, kNoHit on miss.
inline double ray_circle(Vec2 o, Vec2 d, const Circle& c) {
  double fx = o.x - c.x, fy = o.y - c.y;
  double b = fx * d.x + fy * d.y;
  double q = fx * fx + fy * fy - c.r * c.r;
  if (q <= 0.0) return 0.0; // origin inside or on the circle
  double disc = b * b - q;
  if (disc < 0.0) return kNoHit;
  double root = std::sqrt(disc);
  double t = -b - root;
  if (t >= 0.0) return t;
  t = -b + root;
  return t >= 0.0 ? t : kNoHit;
}

inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a > M_PI) a -= 2.0 * M_PI;
  if (a <= -M_PI) a += 2.0 * M_PI;
  return a;
}

} // namespace twinwatch::sim
