#pragma once

#include <cmath>

#include "twinwatch/messages.hpp"
#include "twinwatch/sim/world.hpp"

namespace twinwatch::sim {

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0; // radians, kept in (-pi, pi]
};

struct RobotParams {
  double wheel_separation = 0.16;
  double v_max = 0.22;       // m/s
  double lidar_min = 0.12;   // m
  double lidar_max = 3.5;    // m
  double lidar_sigma = 0.0;  // m, Gaussian range noise
  double spike_prob = 0.0;   // per beam per scan
  double control_period = 0.1; // s
};

struct StepResult {
  Pose pose;
  double actual_linear = 0.0; // effective speed over the step, after clamping
  bool collision = false;
};

/// One unicycle step over dt. Commanded speed below the local breakaway
/// threshold spins the wheels without moving; otherwise it is scaled by the
/// local traction. Displacement is clamped at obstacle contact.
inline StepResult step(const World& world, const TerrainProfile& terrain, const Pose& pose,
                       const ActuationCommand& cmd, double dt) {
  if (dt <= 0.0) throw Error("step: dt must be positive");
  TerrainSegment seg = terrain.at(pose.x);
  double v_eff = std::fabs(cmd.linear) < seg.breakaway ? 0.0 : cmd.linear * seg.traction;

  StepResult r;
  r.pose = pose;
  double want = v_eff * dt;
  if (want != 0.0) {
    double sgn = want > 0.0 ? 1.0 : -1.0;
    Vec2 dir{sgn * std::cos(pose.theta), sgn * std::sin(pose.theta)};
    double free = world.cast_ray({pose.x, pose.y}, dir);
    double dist = std::fabs(want);
    if (dist > free) {
      // contact: stop a hair short so rounding never lands inside the surface
      dist = free - 1e-9 > 0.0 ? free - 1e-9 : 0.0;
      r.collision = true;
    }
    r.pose.x += sgn * dist * std::cos(pose.theta);
    r.pose.y += sgn * dist * std::sin(pose.theta);
    r.actual_linear = sgn * dist / dt;
  }
  r.pose.theta = wrap_angle(pose.theta + cmd.angular * dt);
  return r;
}

} // namespace twinwatch::sim
