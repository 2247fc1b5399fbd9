#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "twinwatch/core/errors.hpp"
#include "twinwatch/monitors/lidar.hpp"

namespace twinwatch {

/// A velocity command: signed linear speed (m/s) and angular rate (rad/s).
struct ActuationCommand {
  double linear = 0.0;
  double angular = 0.0;

  friend bool operator==(const ActuationCommand& a, const ActuationCommand& b) {
    return a.linear == b.linear && a.angular == b.angular;
  }
};

inline constexpr std::size_t kMetaFields = 7;

/// Per-cycle snapshot the robot publishes on the state topic. The meta array
/// carries, in order: firmware id, mode, estimator name, mission id, battery,
/// terrain tag, reserved.
struct RobotStateMsg {
  std::uint64_t seq = 0;
  double t = 0.0;
  double expected_linear = 0.0;
  double expected_angular = 0.0;
  double actual_linear = 0.0;
  double actual_angular = 0.0;
  double expected_speed = 0.0;
  double actual_speed = 0.0;
  monitors::LidarScan lidar;
  ActuationCommand proposed;
  std::array<std::string, kMetaFields> meta{};
};

/// Verdict returned on the action topic; seq echoes the state message it
/// answers. action is the command the robot must execute when not approved.
struct VerdictMsg {
  std::uint64_t seq = 0;
  double t = 0.0;
  bool p1_ok = true;
  bool p2_ok = true;
  std::vector<int> faulty_beams;
  bool approved = true;
  ActuationCommand action;

  friend bool operator==(const VerdictMsg& a, const VerdictMsg& b) {
    return a.seq == b.seq && a.t == b.t && a.p1_ok == b.p1_ok && a.p2_ok == b.p2_ok &&
           a.faulty_beams == b.faulty_beams && a.approved == b.approved && a.action == b.action;
  }
};

// ---------------------------------------------------------------------------
// JSON codecs. Field names are part of the wire contract.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ActuationCommand& c) {
  return {{"linear", c.linear}, {"angular", c.angular}};
}

inline nlohmann::json to_json(const RobotStateMsg& m) {
  nlohmann::json lidar = nlohmann::json::array();
  for (double r : m.lidar.ranges) lidar.push_back(r);
  nlohmann::json meta = nlohmann::json::array();
  for (const auto& s : m.meta) meta.push_back(s);
  return {
      {"seq", m.seq},
      {"t", m.t},
      {"expectedLinear", m.expected_linear},
      {"expectedAngular", m.expected_angular},
      {"actualLinear", m.actual_linear},
      {"actualAngular", m.actual_angular},
      {"expectedSpeed", m.expected_speed},
      {"actualSpeed", m.actual_speed},
      {"lidar", std::move(lidar)},
      {"proposed", to_json(m.proposed)},
      {"meta", std::move(meta)},
  };
}

inline nlohmann::json to_json(const VerdictMsg& v) {
  return {
      {"seq", v.seq},
      {"t", v.t},
      {"p1Ok", v.p1_ok},
      {"p2Ok", v.p2_ok},
      {"faultyBeams", v.faulty_beams},
      {"approved", v.approved},
      {"action", to_json(v.action)},
  };
}

inline std::string encode(const RobotStateMsg& m) { return to_json(m).dump(); }
inline std::string encode(const VerdictMsg& v) { return to_json(v).dump(); }

namespace detail {

inline double number_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw Error(std::string("missing or non-numeric field '") + key + "'");
  return it->get<double>();
}

inline ActuationCommand command_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_object())
    throw Error(std::string("missing or malformed field '") + key + "'");
  return {number_field(*it, "linear"), number_field(*it, "angular")};
}

} // namespace detail

/// Decodes and validates a state payload. Throws twinwatch::Error on any
/// schema violation (missing field, wrong type, lidar length != 360).
inline RobotStateMsg decode_state(const std::string& payload) {
  nlohmann::json j = nlohmann::json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("state payload is not a JSON object");

  RobotStateMsg m;
  const auto seq_it = j.find("seq");
  if (seq_it == j.end() || !seq_it->is_number_unsigned())
    throw Error("missing or invalid field 'seq'");
  m.seq = seq_it->get<std::uint64_t>();
  m.t = detail::number_field(j, "t");
  m.expected_linear = detail::number_field(j, "expectedLinear");
  m.expected_angular = detail::number_field(j, "expectedAngular");
  m.actual_linear = detail::number_field(j, "actualLinear");
  m.actual_angular = detail::number_field(j, "actualAngular");
  m.expected_speed = detail::number_field(j, "expectedSpeed");
  m.actual_speed = detail::number_field(j, "actualSpeed");

  const auto lidar_it = j.find("lidar");
  if (lidar_it == j.end() || !lidar_it->is_array() || lidar_it->size() != static_cast<std::size_t>(monitors::kBeamCount))
    throw Error("field 'lidar' must be an array of exactly 360 numbers");
  for (std::size_t i = 0; i < static_cast<std::size_t>(monitors::kBeamCount); ++i) {
    const auto& v = (*lidar_it)[i];
    if (!v.is_number()) throw Error("field 'lidar' must be an array of exactly 360 numbers");
    m.lidar.ranges[i] = v.get<double>();
  }

  m.proposed = detail::command_field(j, "proposed");

  const auto meta_it = j.find("meta");
  if (meta_it == j.end() || !meta_it->is_array() || meta_it->size() != kMetaFields)
    throw Error("field 'meta' must be an array of exactly 7 strings");
  for (std::size_t i = 0; i < kMetaFields; ++i) {
    const auto& v = (*meta_it)[i];
    if (!v.is_string()) throw Error("field 'meta' must be an array of exactly 7 strings");
    m.meta[i] = v.get<std::string>();
  }
  return m;
}

inline VerdictMsg decode_verdict(const std::string& payload) {
  nlohmann::json j = nlohmann::json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("verdict payload is not a JSON object");

  VerdictMsg v;
  const auto seq_it = j.find("seq");
  if (seq_it == j.end() || !seq_it->is_number_unsigned())
    throw Error("missing or invalid field 'seq'");
  v.seq = seq_it->get<std::uint64_t>();
  v.t = detail::number_field(j, "t");
  for (const char* key : {"p1Ok", "p2Ok", "approved"}) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_boolean())
      throw Error(std::string("missing or non-boolean field '") + key + "'");
  }
  v.p1_ok = j["p1Ok"].get<bool>();
  v.p2_ok = j["p2Ok"].get<bool>();
  v.approved = j["approved"].get<bool>();
  const auto fb = j.find("faultyBeams");
  if (fb == j.end() || !fb->is_array()) throw Error("missing or malformed field 'faultyBeams'");
  for (const auto& b : *fb) {
    if (!b.is_number_integer()) throw Error("faultyBeams entries must be integers");
    v.faulty_beams.push_back(b.get<int>());
  }
  v.action = detail::command_field(j, "action");
  return v;
}

} // namespace twinwatch
