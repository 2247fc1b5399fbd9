#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "twinwatch/messages.hpp"
#include "twinwatch/sim/robot.hpp"

namespace twinwatch::sim {

/// Drive plans for the controller. Stepped walks a speed ladder (the terrain
/// stress test), Constant holds one speed, Waypoint homes on a point.
struct Mission {
  enum class Type { Stepped, Constant, Waypoint };

  Type type = Type::Stepped;
  // Stepped
  std::vector<double> levels{0.015, 0.03, 0.05, 0.075, 0.1};
  double dwell = 70.0; // s per level
  // Constant
  double linear = 0.1;
  // Waypoint
  double target_x = 0.0;
  double target_y = 0.0;
  double tolerance = 0.05;
  double cruise = 0.1;

  std::string id() const {
    switch (type) {
      case Type::Stepped: return "stepped";
      case Type::Constant: return "constant";
      case Type::Waypoint: return "waypoint";
    }
    return "?";
  }
};

/// The analyze stage: the actuation the controller wants at time t. Beyond a
/// stepped schedule the proposal is a full stop.
inline ActuationCommand controller_propose(const Mission& m, double t, const Pose& pose = {}) {
  switch (m.type) {
    case Mission::Type::Stepped: {
      if (t < 0.0 || m.levels.empty() || m.dwell <= 0.0) return {0.0, 0.0};
      auto idx = static_cast<std::size_t>(t / m.dwell);
      if (idx >= m.levels.size()) return {0.0, 0.0};
      return {m.levels[idx], 0.0};
    }
    case Mission::Type::Constant:
      return {m.linear, 0.0};
    case Mission::Type::Waypoint: {
      double dx = m.target_x - pose.x, dy = m.target_y - pose.y;
      double dist = std::sqrt(dx * dx + dy * dy);
      if (dist <= m.tolerance) return {0.0, 0.0};
      double bearing = std::atan2(dy, dx);
      double err = wrap_angle(bearing - pose.theta);
      double angular = 1.5 * err;
      if (angular > 2.0) angular = 2.0;
      if (angular < -2.0) angular = -2.0;
      double linear = 0.5 * dist;
      if (linear > m.cruise) linear = m.cruise;
      return {linear, angular};
    }
  }
  return {0.0, 0.0};
}

} // namespace twinwatch::sim
