#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "twinwatch/core/errors.hpp"
#include "twinwatch/monitors/monitors.hpp"
#include "twinwatch/sim/mission.hpp"
#include "twinwatch/sim/robot.hpp"
#include "twinwatch/sim/world.hpp"

namespace twinwatch::sim {

/// Everything one experiment needs: geometry, terrain, robot parameters,
/// drive plan, monitor constants and timing.
struct Scenario {
  std::string name = "scenario";
  World world;
  TerrainProfile terrain;
  Pose start;
  RobotParams robot;
  Mission mission;
  monitors::MonitorConfig monitor;
  double duration = 60.0;        // s simulated time
  double verdict_timeout = 1.0;  // s wall time to wait for a verdict
};

namespace detail {

inline double jnum(const nlohmann::json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(std::string("scenario key '") + key + "' must be a number");
  return it->get<double>();
}

} // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scenario file must hold a JSON object");
  Scenario s;
  if (auto it = j.find("name"); it != j.end()) s.name = it->get<std::string>();

  if (auto it = j.find("world"); it != j.end()) {
    const auto& w = *it;
    if (auto b = w.find("bounds"); b != w.end()) {
      s.world.bounds = {detail::jnum(*b, "x_min", -1.0), detail::jnum(*b, "x_max", 30.0),
                        detail::jnum(*b, "y_min", -3.0), detail::jnum(*b, "y_max", 3.0)};
    }
    if (auto rs = w.find("rects"); rs != w.end()) {
      for (const auto& r : *rs)
        s.world.rects.push_back({detail::jnum(r, "x_min", 0), detail::jnum(r, "x_max", 0),
                                 detail::jnum(r, "y_min", 0), detail::jnum(r, "y_max", 0)});
    }
    if (auto cs = w.find("circles"); cs != w.end()) {
      for (const auto& c : *cs)
        s.world.circles.push_back({detail::jnum(c, "x", 0), detail::jnum(c, "y", 0), detail::jnum(c, "r", 0)});
    }
  }

  if (auto it = j.find("terrain"); it != j.end()) {
    for (const auto& seg : *it)
      s.terrain.segments.push_back({detail::jnum(seg, "x_start", 0), detail::jnum(seg, "x_end", 0),
                                    detail::jnum(seg, "traction", 1.0), detail::jnum(seg, "breakaway", 0.0)});
    s.terrain.validate();
  }

  if (auto it = j.find("start"); it != j.end()) {
    s.start.x = detail::jnum(*it, "x", 0.0);
    s.start.y = detail::jnum(*it, "y", 0.0);
    s.start.theta = detail::jnum(*it, "theta", 0.0);
  }

  if (auto it = j.find("robot"); it != j.end()) {
    const auto& r = *it;
    s.robot.wheel_separation = detail::jnum(r, "wheel_separation", s.robot.wheel_separation);
    s.robot.v_max = detail::jnum(r, "v_max", s.robot.v_max);
    s.robot.lidar_min = detail::jnum(r, "lidar_min", s.robot.lidar_min);
    s.robot.lidar_max = detail::jnum(r, "lidar_max", s.robot.lidar_max);
    s.robot.lidar_sigma = detail::jnum(r, "lidar_sigma", s.robot.lidar_sigma);
    s.robot.spike_prob = detail::jnum(r, "spike_prob", s.robot.spike_prob);
    s.robot.control_period = detail::jnum(r, "control_period", s.robot.control_period);
    if (s.robot.control_period <= 0.0) throw ConfigError("robot.control_period must be positive");
    if (s.robot.spike_prob < 0.0 || s.robot.spike_prob >= 1.0)
      throw ConfigError("robot.spike_prob must be in [0, 1)");
  }

  if (auto it = j.find("mission"); it != j.end()) {
    const auto& m = *it;
    std::string type = m.contains("type") ? m["type"].get<std::string>() : "stepped";
    if (type == "stepped") {
      s.mission.type = Mission::Type::Stepped;
      if (auto lv = m.find("levels"); lv != m.end()) {
        s.mission.levels.clear();
        for (const auto& v : *lv) s.mission.levels.push_back(v.get<double>());
      }
      s.mission.dwell = detail::jnum(m, "dwell", s.mission.dwell);
    } else if (type == "constant") {
      s.mission.type = Mission::Type::Constant;
      s.mission.linear = detail::jnum(m, "linear", s.mission.linear);
    } else if (type == "waypoint") {
      s.mission.type = Mission::Type::Waypoint;
      s.mission.target_x = detail::jnum(m, "x", 0.0);
      s.mission.target_y = detail::jnum(m, "y", 0.0);
      s.mission.tolerance = detail::jnum(m, "tolerance", s.mission.tolerance);
      s.mission.cruise = detail::jnum(m, "cruise", s.mission.cruise);
    } else {
      throw ConfigError("mission.type must be stepped, constant or waypoint");
    }
  }

  if (auto it = j.find("monitor"); it != j.end()) s.monitor = monitors::monitor_config_from_json(*it);

  s.duration = detail::jnum(j, "duration", s.duration);
  s.verdict_timeout = detail::jnum(j, "verdict_timeout", s.verdict_timeout);
  if (s.duration <= 0.0) throw ConfigError("scenario duration must be positive");

  if (!s.world.bounds.contains({s.start.x, s.start.y}) || s.world.inside_obstacle({s.start.x, s.start.y}))
    throw ConfigError("start pose must be inside the bounds and outside obstacles");
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) throw ConfigError("cannot open scenario file: " + path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ConfigError("scenario file is not valid JSON: " + path);
  return scenario_from_json(j);
}

} // namespace twinwatch::sim
