#pragma once

#include <chrono>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "twinwatch/messages.hpp"
#include "twinwatch/monitors/monitors.hpp"
#include "twinwatch/twin/log.hpp"
#include "twinwatch/twin/transport.hpp"

namespace twinwatch::twin {

struct ServiceConfig {
  TopicConfig topics;
  monitors::MonitorConfig monitor;
  std::string log_path;  // empty: no persistent store
  int status_port = 0;   // 0: status endpoint disabled
};

inline ServiceConfig service_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("service config must be a JSON object");
  ServiceConfig cfg;
  if (auto it = j.find("broker_url"); it != j.end()) cfg.topics.broker_url = it->get<std::string>();
  if (auto it = j.find("topics"); it != j.end()) {
    if (it->contains("state")) cfg.topics.state_topic = (*it)["state"].get<std::string>();
    if (it->contains("action")) cfg.topics.action_topic = (*it)["action"].get<std::string>();
  }
  if (auto it = j.find("qos"); it != j.end()) cfg.topics.qos = it->get<int>();
  if (auto it = j.find("monitor"); it != j.end()) cfg.monitor = monitors::monitor_config_from_json(*it);
  if (auto it = j.find("log_path"); it != j.end()) cfg.log_path = it->get<std::string>();
  if (auto it = j.find("status_port"); it != j.end()) cfg.status_port = it->get<int>();
  cfg.topics.validate();
  return cfg;
}

inline ServiceConfig load_service_config(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  return service_config_from_json(j);
}

/// Mirrored and derived state of the digital-twin instance. What arrives
/// from the robot is only a subset; verdicts and counters are derived here.
struct DTState {
  std::optional<RobotStateMsg> latest_state;
  std::optional<VerdictMsg> last_verdict;

  std::uint64_t messages_in = 0;
  std::uint64_t verdicts_out = 0;
  std::uint64_t dead_letters = 0;
  std::uint64_t dropped_stale = 0;
  std::uint64_t p1_violations = 0;
  std::uint64_t p2_violations = 0;
  std::uint64_t p3_flagged_scans = 0;
  std::uint64_t publish_failures = 0;
  double latency_total_ms = 0.0;

  double mean_latency_ms() const {
    return verdicts_out == 0 ? 0.0 : latency_total_ms / static_cast<double>(verdicts_out);
  }
};

/// One digital-twin instance: ingests robot state from the state topic,
/// triggers the monitors on every accepted message, stores all traffic in
/// the append-only log and publishes exactly one verdict per accepted state.
/// The ingest-evaluate-publish pipeline is strictly serialized.
class TwinService {
public:
  TwinService(ServiceConfig cfg, Transport& transport)
      : cfg_(std::move(cfg)), transport_(transport) {
    cfg_.topics.validate();
    if (!cfg_.log_path.empty()) log_.open(cfg_.log_path);
  }

  /// Subscribes to the state topic and starts answering.
  void start() {
    transport_.subscribe(cfg_.topics.state_topic,
                         [this](const std::string&, const std::string& payload) { handle_payload(payload); });
  }

  /// Transport callback: decode, then ingest. Undecodable payloads go to the
  /// dead-letter store and produce no verdict.
  void handle_payload(const std::string& payload) {
    RobotStateMsg msg;
    try {
      msg = decode_state(payload);
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      ++state_.dead_letters;
      log_.append("deadletter", {{"reason", e.what()}, {"raw", payload}});
      return;
    }
    ingest(msg);
  }

  /// Accepts one validated state message: mirrors it into the DT state,
  /// stores it, evaluates the monitors and publishes the verdict. Stale or
  /// duplicate sequence numbers are dropped (at-least-once delivery upstream).
  void ingest(const RobotStateMsg& msg) {
    std::lock_guard lock(mu_);
    const auto t_in = std::chrono::steady_clock::now();

    if (msg.seq <= last_seq_ || msg.t < last_t_) {
      ++state_.dropped_stale;
      return;
    }
    last_seq_ = msg.seq;
    last_t_ = msg.t;

    ++state_.messages_in;
    state_.latest_state = msg;
    log_.append("state", to_json(msg));

    VerdictMsg verdict = make_verdict(msg);
    if (!verdict.p1_ok) ++state_.p1_violations;
    if (!verdict.p2_ok) ++state_.p2_violations;
    if (!verdict.faulty_beams.empty()) ++state_.p3_flagged_scans;

    state_.last_verdict = verdict;
    log_.append("verdict", to_json(verdict));
    ++state_.verdicts_out;

    std::string payload = encode(verdict);
    try {
      transport_.publish(cfg_.topics.action_topic, payload);
    } catch (const std::exception&) {
      try {
        transport_.publish(cfg_.topics.action_topic, payload); // one retry
      } catch (const std::exception&) {
        ++state_.publish_failures;
      }
    }
    const auto t_out = std::chrono::steady_clock::now();
    state_.latency_total_ms +=
        std::chrono::duration<double, std::milli>(t_out - t_in).count();
  }

  DTState snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  const monitors::MonitorConfig& monitor_config() const { return cfg_.monitor; }
  const ServiceConfig& config() const { return cfg_; }
  bool storage_degraded() const { return log_.degraded(); }

  void flush() { log_.flush(); }

  /// Plain-text counters for the status endpoint.
  std::string status_text() const {
    DTState s = snapshot();
    std::string out;
    out += "messages_in " + std::to_string(s.messages_in) + "\n";
    out += "verdicts_out " + std::to_string(s.verdicts_out) + "\n";
    out += "dead_letters " + std::to_string(s.dead_letters) + "\n";
    out += "dropped_stale " + std::to_string(s.dropped_stale) + "\n";
    out += "p1_violations " + std::to_string(s.p1_violations) + "\n";
    out += "p2_violations " + std::to_string(s.p2_violations) + "\n";
    out += "p3_flagged_scans " + std::to_string(s.p3_flagged_scans) + "\n";
    out += "publish_failures " + std::to_string(s.publish_failures) + "\n";
    out += "mean_latency_ms " + std::to_string(s.mean_latency_ms()) + "\n";
    out += std::string("transport_connected ") + (transport_.connected() ? "1" : "0") + "\n";
    out += std::string("storage_degraded ") + (storage_degraded() ? "1" : "0") + "\n";
    return out;
  }

private:
  /// Runs the monitors on one state. A monitor failure (for example a scan
  /// with every beam faulty) degrades to a fail-safe stop verdict so the
  /// one-verdict-per-state contract holds.
  VerdictMsg make_verdict(const RobotStateMsg& msg) const {
    VerdictMsg v;
    v.seq = msg.seq;
    v.t = msg.t;
    try {
      monitors::Verdict mv = monitors::evaluate(msg, cfg_.monitor);
      v.p1_ok = mv.p1_ok;
      v.p2_ok = mv.p2_ok;
      v.faulty_beams = mv.faulty_beams;
      v.approved = mv.approved;
      v.action = mv.action;
    } catch (const std::exception&) {
      v.p1_ok = false;
      v.p2_ok = false;
      v.approved = false;
      v.action = {0.0, 0.0};
    }
    // egress cap: the twin never commands a speed outside [0, v_max]
    if (v.action.linear < 0.0) v.action.linear = 0.0;
    if (v.action.linear > cfg_.monitor.v_max) v.action.linear = cfg_.monitor.v_max;
    return v;
  }

  ServiceConfig cfg_;
  Transport& transport_;
  EventLog log_;
  mutable std::mutex mu_;
  DTState state_;
  std::uint64_t last_seq_ = 0;
  double last_t_ = -1.0;
};

} // namespace twinwatch::twin
