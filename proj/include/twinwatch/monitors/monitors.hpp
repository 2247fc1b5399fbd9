#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "twinwatch/core/value.hpp"
#include "twinwatch/messages.hpp"
#include "twinwatch/monitors/lidar.hpp"

namespace twinwatch::monitors {

/// How the scalar speed is derived from (linear, angular) velocities.
enum class SpeedCombiner {
  LinearMagnitude, // |v_linear|
  OuterWheel,      // max(|v_l - w*b/2|, |v_l + w*b/2|)
};

struct MonitorConfig {
  double delta = 0.05;            // m/s, P2 tolerance
  double gamma = 0.5;             // m, P3 adjacency jump
  double decel_max = 0.5;         // m/s^2, braking deceleration
  double react_latency = 0.2;     // s, reaction term of the braking model
  double gain = 0.5;              // correction gain
  double v_max = 0.22;            // m/s, actuation cap
  double heading_window = 30.0;   // deg, half-width of the P1 forward cone
  // Sense-to-actuation horizon: the scan a verdict is based on is one control
  // period old by the time the approved command finishes executing, and the
  // command itself runs a full period before the next check. P1 extends the
  // reaction term by this much so the braking envelope holds between checks.
  double pipeline_latency = 0.2;  // s, two control periods
  bool p2_one_sided = false;      // literal one-sided P2 form
  SpeedCombiner combiner = SpeedCombiner::LinearMagnitude;
  double wheel_separation = 0.16; // m, used by the OuterWheel combiner
};

struct SpeedPair {
  double expected = 0.0; // m/s
  double actual = 0.0;   // m/s
};

struct P2Result {
  bool ok = true;
  double diff = 0.0; // expected - actual
};

struct Correction {
  double adjusted = 0.0;
  bool changed = false;
};

struct Verdict {
  bool p1_ok = true;
  bool p2_ok = true;
  std::vector<int> faulty_beams;
  bool approved = true;
  ActuationCommand action;
  double diff = 0.0;
};

/// Scalar speed of a command under the configured combiner.
inline double scalar_speed(const ActuationCommand& c, const MonitorConfig& cfg) {
  if (cfg.combiner == SpeedCombiner::LinearMagnitude) return std::fabs(c.linear);
  double half = 0.5 * cfg.wheel_separation * c.angular;
  double a = std::fabs(c.linear - half);
  double b = std::fabs(c.linear + half);
  return a > b ? a : b;
}

/// Distance to a full stop from `actual` speed: reaction travel plus the
/// kinematic braking term. Zero at rest, monotone increasing.
inline double braking_distance(double actual, const MonitorConfig& cfg) {
  return actual * cfg.react_latency + actual * actual / (2.0 * cfg.decel_max);
}

/// P1: the braking distance must fit inside the forward obstacle distance.
inline bool check_p1(const LidarScan& scan, double actual, const MonitorConfig& cfg) {
  return braking_distance(actual, cfg) <= ldist(scan, cfg.heading_window);
}

/// P2: the actual speed must track the expected speed within delta.
/// The default form bounds |expected - actual|; the one-sided flag keeps the
/// literal expected - actual <= delta inequality instead.
inline P2Result check_p2(const SpeedPair& sp, const MonitorConfig& cfg) {
  double diff = sp.expected - sp.actual;
  bool ok = cfg.p2_one_sided ? diff <= cfg.delta : std::fabs(diff) <= cfg.delta;
  return {ok, diff};
}

/// Corrective speed law: push the command proportionally toward closing the
/// expected/actual gap, clamped to [0, v_max]. The exact clamp expression
/// mirrors the DSL form min(max(e + gain*diff, 0.0), v_max).
inline Correction optimize_actual_speed(double expected, double actual, const MonitorConfig& cfg) {
  double diff = expected - actual;
  double raw = expected + cfg.gain * diff;
  double lo = 0.0 > raw ? 0.0 : raw;
  double adjusted = cfg.v_max < lo ? cfg.v_max : lo;
  return {adjusted, adjusted != expected};
}

inline std::vector<int> check_p3(const LidarScan& scan, const MonitorConfig& cfg) {
  return check_p3(scan, cfg.gamma);
}

/// Full monitor pass over one state snapshot:
/// P3 flags and sanitizes inconsistent beams, P1 checks the braking envelope
/// of the proposed actuation against the sanitized scan, P2 checks speed
/// tracking. The returned action is the proposal when everything passes, the
/// corrected speed on a P2 violation, and a full stop on a P1 violation.
inline Verdict evaluate(const RobotStateMsg& state, const MonitorConfig& cfg) {
  Verdict v;
  v.faulty_beams = check_p3(state.lidar, cfg);
  LidarScan sanitized = sanitize_scan(state.lidar, v.faulty_beams);

  MonitorConfig p1_cfg = cfg;
  p1_cfg.react_latency = cfg.react_latency + cfg.pipeline_latency;
  double proposed_speed = scalar_speed(state.proposed, cfg);
  v.p1_ok = check_p1(sanitized, proposed_speed, p1_cfg);

  P2Result p2 = check_p2({state.expected_speed, state.actual_speed}, cfg);
  v.p2_ok = p2.ok;
  v.diff = p2.diff;
  v.approved = v.p1_ok && v.p2_ok;

  if (!v.p1_ok) {
    v.action = {0.0, 0.0}; // safety dominates: stop
  } else if (!v.p2_ok) {
    Correction c = optimize_actual_speed(state.expected_speed, state.actual_speed, cfg);
    v.action = {c.adjusted, state.proposed.angular};
  } else {
    v.action = state.proposed;
  }
  return v;
}

/// Reads monitor constants from a config object; absent keys keep defaults.
inline MonitorConfig monitor_config_from_json(const nlohmann::json& j) {
  MonitorConfig cfg;
  auto get = [&j](const char* key, double& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number()) throw ConfigError(std::string("monitor config key '") + key + "' must be a number");
    out = it->get<double>();
  };
  get("delta", cfg.delta);
  get("gamma", cfg.gamma);
  get("decel_max", cfg.decel_max);
  get("react_latency", cfg.react_latency);
  get("gain", cfg.gain);
  get("v_max", cfg.v_max);
  get("heading_window", cfg.heading_window);
  get("pipeline_latency", cfg.pipeline_latency);
  get("wheel_separation", cfg.wheel_separation);
  if (auto it = j.find("p2_one_sided"); it != j.end()) cfg.p2_one_sided = it->get<bool>();
  if (auto it = j.find("combiner"); it != j.end()) {
    std::string c = it->get<std::string>();
    if (c == "linear") cfg.combiner = SpeedCombiner::LinearMagnitude;
    else if (c == "outer_wheel") cfg.combiner = SpeedCombiner::OuterWheel;
    else throw ConfigError("monitor config key 'combiner' must be 'linear' or 'outer_wheel'");
  }
  for (const char* key : {"delta", "gamma", "decel_max", "react_latency", "gain", "v_max",
                          "heading_window", "pipeline_latency"}) {
    auto it = j.find(key);
    if (it != j.end() && it->get<double>() <= 0.0)
      throw ConfigError(std::string("monitor config key '") + key + "' must be positive");
  }
  return cfg;
}

/// DSL form of the P2 monitor plus correction for the given constants, with
/// Float streams. Running it through the stream engine reproduces check_p2
/// and optimize_actual_speed event for event.
inline std::string p2_spec_source(const MonitorConfig& cfg) {
  std::string delta = num::format_double(cfg.delta);
  std::string gain = num::format_double(cfg.gain);
  std::string vmax = num::format_double(cfg.v_max);
  return "@TelegrafIn(\"t3b\", \"speed\", \"expectedSpeed\")\n"
         "in expectedSpeed: Events[Float]\n"
         "@TelegrafIn(\"t3b\", \"speed\", \"actualSpeed\")\n"
         "in actualSpeed: Events[Float]\n"
         "def diff = expectedSpeed - actualSpeed\n"
         "def violation = abs(diff) > " + delta + "\n"
         "def adjusted = min(max(expectedSpeed + " + gain + " * diff, 0.0), " + vmax + ")\n"
         "@TelegrafOut(\"diff\")\n"
         "out diff\n"
         "@TelegrafOut(\"violation\")\n"
         "out violation\n"
         "@TelegrafOut(\"adjusted\")\n"
         "out adjusted\n";
}

} // namespace twinwatch::monitors
