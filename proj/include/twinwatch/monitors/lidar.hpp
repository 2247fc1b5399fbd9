#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "twinwatch/core/errors.hpp"

namespace twinwatch::monitors {

inline constexpr int kBeamCount = 360;

/// A full lidar revolution. Beams are indexed 1..360 in the paper convention:
/// beam j points j degrees counterclockwise from the robot heading, and beam
/// 360 is the heading itself. Storage is ranges[j - 1].
struct LidarScan {
  std::array<double, kBeamCount> ranges{};

  static LidarScan uniform(double r) {
    LidarScan s;
    s.ranges.fill(r);
    return s;
  }

  /// 1-based access with wraparound: beam(0) == beam(360), beam(361) == beam(1).
  double beam(int j) const { return ranges[index(j)]; }
  double& beam(int j) { return ranges[index(j)]; }

  static std::size_t index(int j) {
    int m = (j - 1) % kBeamCount;
    if (m < 0) m += kBeamCount;
    return static_cast<std::size_t>(m);
  }
};

/// Minimum range within the forward cone: beams {360-window .. 360} and
/// {1 .. window}, wrapping through the heading beam.
inline double ldist(const LidarScan& scan, double window_deg) {
  double best = scan.beam(360);
  for (int j = 1; j <= kBeamCount; ++j) {
    if (j <= window_deg || j >= 360.0 - window_deg) {
      double r = scan.beam(j);
      if (r < best) best = r;
    }
  }
  return best;
}

/// Beams whose reading jumps by more than `gamma` against *both* adjacent
/// beams (indices wrap 360<->1). A reading that agrees with one neighbor is
/// kept: a real obstacle is never seen by a single angle only.
inline std::vector<int> check_p3(const LidarScan& scan, double gamma) {
  std::vector<int> faulty;
  for (int j = 1; j <= kBeamCount; ++j) {
    double v = scan.beam(j);
    double prev = scan.beam(j - 1);
    double next = scan.beam(j + 1);
    double dp = v - prev;
    double dn = v - next;
    if (dp < 0) dp = -dp;
    if (dn < 0) dn = -dn;
    if (dp > gamma && dn > gamma) faulty.push_back(j);
  }
  return faulty;
}

/// Replaces each faulty beam with the mean of its nearest non-faulty
/// neighbors, searching outward past runs of consecutive faulty beams.
/// Non-faulty beams are untouched. Throws if every beam is faulty.
inline LidarScan sanitize_scan(const LidarScan& scan, const std::vector<int>& faulty) {
  if (faulty.empty()) return scan;
  std::array<bool, kBeamCount> bad{};
  for (int j : faulty) bad[LidarScan::index(j)] = true;
  if (faulty.size() >= static_cast<std::size_t>(kBeamCount))
    throw Error("sanitize_scan: all beams are faulty, scan unusable");

  LidarScan out = scan;
  for (int j : faulty) {
    int left = j;
    for (int step = 0; step < kBeamCount; ++step) {
      left = left == 1 ? kBeamCount : left - 1;
      if (!bad[LidarScan::index(left)]) break;
    }
    int right = j;
    for (int step = 0; step < kBeamCount; ++step) {
      right = right == kBeamCount ? 1 : right + 1;
      if (!bad[LidarScan::index(right)]) break;
    }
    out.beam(j) = 0.5 * (scan.beam(left) + scan.beam(right));
  }
  return out;
}

} // namespace twinwatch::monitors
