#pragma once

#include <cmath>
#include <vector>

#include "twinwatch/core/errors.hpp"
#include "twinwatch/messages.hpp"
#include "twinwatch/sim/robot.hpp"

namespace twinwatch::sim {

/// Wheel-encoder style estimate: the speed the wheels were last commanded to
/// spin at. Slippage is invisible, so a stuck robot still reports motion.
inline double encoder_speed(const std::vector<ActuationCommand>& command_history) {
  if (command_history.empty()) return 0.0;
  return std::fabs(command_history.back().linear);
}

/// Displacement-based estimate from two pose samples: the speed the robot
/// body actually traversed ground at.
inline double pose_speed(double t1, const Pose& p1, double t2, const Pose& p2) {
  if (!(t2 > t1)) throw Error("pose_speed: need two samples with t2 > t1");
  double dx = p2.x - p1.x, dy = p2.y - p1.y;
  return std::sqrt(dx * dx + dy * dy) / (t2 - t1);
}

} // namespace twinwatch::sim
