#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twinwatch/core/value.hpp"
#include "twinwatch/messages.hpp"
#include "twinwatch/monitors/monitors.hpp"
#include "twinwatch/sim/estimators.hpp"
#include "twinwatch/sim/lidar_sim.hpp"
#include "twinwatch/sim/mission.hpp"
#include "twinwatch/sim/scenario.hpp"

namespace twinwatch::sim {

/// The robot's side of the robot<->twin conversation: publish a state
/// snapshot, wait for the verdict answering it (matched by seq). Returns
/// nothing on timeout or transport failure; the loop then fail-safes.
class TwinLink {
public:
  virtual ~TwinLink() = default;
  virtual std::optional<VerdictMsg> round_trip(const RobotStateMsg& state, double timeout_s) = 0;
};

enum class LoopMode { Default, Augmented };

struct TickRecord {
  double t = 0.0;
  double expected_speed = 0.0;
  double actual_speed = 0.0;   // displacement-based, previous interval
  double encoder_speed = 0.0;  // command-based, previous interval
  double applied_linear = 0.0;
  double applied_angular = 0.0;
  bool approved = true;
  bool corrected = false;
  bool collision = false;
  bool timeout = false;
  Pose pose;              // at tick start, where the scan was taken
  double clearance = 0.0; // exact forward free distance at tick start
};

inline std::string tick_csv_header() {
  return "t,expected_speed,actual_speed,applied_linear,applied_angular,approved,corrected,collision";
}

inline std::string tick_csv_row(const TickRecord& r) {
  std::string row = num::format_double(r.t);
  row += ',';
  row += num::format_double(r.expected_speed);
  row += ',';
  row += num::format_double(r.actual_speed);
  row += ',';
  row += num::format_double(r.applied_linear);
  row += ',';
  row += num::format_double(r.applied_angular);
  row += ',';
  row += r.approved ? '1' : '0';
  row += ',';
  row += r.corrected ? '1' : '0';
  row += ',';
  row += r.collision ? '1' : '0';
  return row;
}

/// Runs the sense-analyze-validate cycle over the scenario's duration on a
/// virtual clock. In Default mode proposals execute directly; in Augmented
/// mode each proposal goes to the twin first and the verdict decides what is
/// executed (approved proposal, corrected action, or fail-safe stop).
class ControlLoop {
public:
  ControlLoop(const Scenario& scenario, LoopMode mode, std::uint64_t seed, TwinLink* link = nullptr)
      : sc_(scenario), mode_(mode), rng_(seed), link_(link) {
    if (mode_ == LoopMode::Augmented && link_ == nullptr)
      throw Error("augmented mode needs a twin link");
  }

  std::vector<TickRecord> run() {
    std::vector<TickRecord> ticks;
    const double dt = sc_.robot.control_period;
    const auto n_ticks = static_cast<std::uint64_t>(sc_.duration / dt + 0.5);
    ticks.reserve(n_ticks);

    Pose pose = sc_.start;
    Pose prev_pose = pose;
    double prev_theta = pose.theta;
    std::vector<ActuationCommand> history;

    for (std::uint64_t k = 0; k < n_ticks; ++k) {
      const double t = static_cast<double>(k) * dt;

      // sense
      monitors::LidarScan scan = simulate_lidar(sc_.world, pose, sc_.robot, rng_);
      double actual = k == 0 ? 0.0 : pose_speed(t - dt, prev_pose, t, pose);
      double actual_angular = k == 0 ? 0.0 : wrap_angle(pose.theta - prev_theta) / dt;
      double enc = encoder_speed(history);

      // analyze
      ActuationCommand proposed = controller_propose(sc_.mission, t, pose);
      double expected = monitors::scalar_speed(proposed, sc_.monitor);

      // validate
      TickRecord rec;
      rec.t = t;
      rec.expected_speed = expected;
      rec.actual_speed = actual;
      rec.encoder_speed = enc;
      rec.pose = pose;
      rec.clearance = sc_.world.cast_ray({pose.x, pose.y}, {std::cos(pose.theta), std::sin(pose.theta)});

      ActuationCommand applied = proposed;
      if (mode_ == LoopMode::Augmented) {
        RobotStateMsg msg;
        msg.seq = k + 1;
        msg.t = t;
        msg.expected_linear = proposed.linear;
        msg.expected_angular = proposed.angular;
        msg.actual_linear = actual;
        msg.actual_angular = actual_angular;
        msg.expected_speed = expected;
        msg.actual_speed = actual;
        msg.lidar = scan;
        msg.proposed = proposed;
        msg.meta = {"tw-0.1", "augmented", "pose", sc_.mission.id(), "1.0", sc_.name, ""};
        auto verdict = link_->round_trip(msg, sc_.verdict_timeout);
        if (!verdict || verdict->seq != msg.seq) {
          applied = {0.0, 0.0};
          rec.approved = false;
          rec.timeout = true;
        } else {
          rec.approved = verdict->approved;
          applied = verdict->approved ? proposed : verdict->action;
          rec.corrected = !verdict->approved && verdict->p1_ok;
        }
      }

      prev_pose = pose;
      prev_theta = pose.theta;
      StepResult sr = step(sc_.world, sc_.terrain, pose, applied, dt);
      pose = sr.pose;

      rec.applied_linear = applied.linear;
      rec.applied_angular = applied.angular;
      rec.collision = sr.collision;
      history.push_back(applied);
      ticks.push_back(rec);
    }
    return ticks;
  }

private:
  Scenario sc_;
  LoopMode mode_;
  Rng rng_;
  TwinLink* link_;
};

} // namespace twinwatch::sim
