#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "twinwatch/monitors/lidar.hpp"
#include "twinwatch/sim/robot.hpp"
#include "twinwatch/sim/world.hpp"

namespace twinwatch::sim {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal deviate via the classic Box-Muller transform; always
/// consumes exactly two engine draws, which keeps draw sequences stable.
inline double gaussian(Rng& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct ScanSample {
  monitors::LidarScan scan;
  std::vector<int> spiked; // beams replaced by dust/fault spikes
};

/// Full revolution at the given pose: per beam, the exact ray-cast distance
/// clamped to the sensor range plus Gaussian noise; with probability
/// spike_prob the reading is replaced by an independent uniform value.
/// Beam j points j degrees from the heading (beam 360 = straight ahead).
inline ScanSample simulate_lidar_detailed(const World& world, const Pose& pose,
                                          const RobotParams& params, Rng& rng) {
  ScanSample out;
  const double lo = params.lidar_min, hi = params.lidar_max;
  for (int j = 1; j <= monitors::kBeamCount; ++j) {
    double angle = pose.theta + j * (M_PI / 180.0);
    Vec2 dir{std::cos(angle), std::sin(angle)};
    double exact = world.cast_ray({pose.x, pose.y}, dir);
    double clamped = exact < lo ? lo : (exact > hi ? hi : exact);

    bool spiked = uniform01(rng) < params.spike_prob;
    double value;
    if (spiked) {
      value = lo + uniform01(rng) * (hi - lo);
      out.spiked.push_back(j);
    } else {
      value = clamped + params.lidar_sigma * gaussian(rng);
      value = value < lo ? lo : (value > hi ? hi : value);
    }
    out.scan.beam(j) = value;
  }
  return out;
}

inline monitors::LidarScan simulate_lidar(const World& world, const Pose& pose,
                                          const RobotParams& params, Rng& rng) {
  return simulate_lidar_detailed(world, pose, params, rng).scan;
}

} // namespace twinwatch::sim
