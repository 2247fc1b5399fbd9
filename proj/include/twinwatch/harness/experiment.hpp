#pragma once

#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "twinwatch/core/errors.hpp"
#include "twinwatch/sim/loop.hpp"
#include "twinwatch/twin/service.hpp"
#include "twinwatch/twin/transport.hpp"

namespace twinwatch::harness {

/// Mean of squared element-wise differences between two equal-length series.
inline double compute_mse(const std::vector<double>& expected, const std::vector<double>& actual) {
  if (expected.empty() || expected.size() != actual.size())
    throw Error("compute_mse: series must be non-empty and equally long");
  double sum = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    double d = expected[i] - actual[i];
    sum += d * d;
  }
  return sum / static_cast<double>(expected.size());
}

/// TwinLink over a pub/sub transport: publishes the state, waits for the
/// verdict echoing its seq. On the synchronous in-memory bus the verdict is
/// already there when publish returns; over MQTT the wait is real.
class TransportTwinLink : public sim::TwinLink {
public:
  TransportTwinLink(twin::Transport& transport, twin::TopicConfig topics)
      : transport_(transport), topics_(std::move(topics)) {
    transport_.subscribe(topics_.action_topic, [this](const std::string&, const std::string& payload) {
      VerdictMsg v;
      try {
        v = decode_verdict(payload);
      } catch (const std::exception&) {
        return; // not a verdict; ignore
      }
      std::lock_guard lock(mu_);
      if (v.seq == waiting_seq_ && !verdict_) {
        verdict_ = v;
        cv_.notify_all();
      }
    });
  }

  std::optional<VerdictMsg> round_trip(const RobotStateMsg& state, double timeout_s) override {
    {
      std::lock_guard lock(mu_);
      waiting_seq_ = state.seq;
      verdict_.reset();
    }
    try {
      transport_.publish(topics_.state_topic, encode(state));
    } catch (const std::exception&) {
      return std::nullopt; // transport failure: the loop fail-safes
    }
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, std::chrono::duration<double>(timeout_s), [this] { return verdict_.has_value(); });
    return verdict_;
  }

private:
  twin::Transport& transport_;
  twin::TopicConfig topics_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t waiting_seq_ = 0;
  std::optional<VerdictMsg> verdict_;
};

struct ExperimentResult {
  std::vector<sim::TickRecord> ticks;
  double mse = 0.0;
  std::uint64_t p1_violations = 0;
  std::uint64_t p2_violations = 0;
  std::uint64_t collisions = 0;
  std::uint64_t corrected_ticks = 0;
  std::string twin_log_path; // empty for default mode or when not persisted
};

inline const char* mode_name(sim::LoopMode mode) {
  return mode == sim::LoopMode::Default ? "default" : "augmented";
}

namespace detail {

inline ExperimentResult summarize(std::vector<sim::TickRecord> ticks) {
  ExperimentResult r;
  std::vector<double> expected, actual;
  expected.reserve(ticks.size());
  actual.reserve(ticks.size());
  for (const auto& tk : ticks) {
    expected.push_back(tk.expected_speed);
    actual.push_back(tk.actual_speed);
    if (tk.collision) ++r.collisions;
    if (tk.corrected) ++r.corrected_ticks;
  }
  r.mse = ticks.empty() ? 0.0 : compute_mse(expected, actual);
  r.ticks = std::move(ticks);
  return r;
}

inline void write_ticks_csv(const std::string& path, const std::vector<sim::TickRecord>& ticks) {
  std::ofstream out(path);
  if (!out.good()) throw Error("cannot write tick CSV: " + path);
  out << sim::tick_csv_header() << '\n';
  for (const auto& t : ticks) out << sim::tick_csv_row(t) << '\n';
}

} // namespace detail

/// Runs one experiment. Augmented mode wires the simulated robot to an
/// in-process twin over the in-memory bus (or a caller-supplied link over
/// any transport). With an output directory set, writes the tick CSV, a
/// summary record, and the twin's store.
inline ExperimentResult run_experiment(const sim::Scenario& scenario, sim::LoopMode mode,
                                       std::uint64_t seed,
                                       const std::optional<std::string>& out_dir = std::nullopt,
                                       sim::TwinLink* external_link = nullptr) {
  namespace fs = std::filesystem;
  if (out_dir) fs::create_directories(*out_dir);
  auto file_tag = std::string(mode_name(mode)) + "_seed" + std::to_string(seed);

  ExperimentResult result;
  if (mode == sim::LoopMode::Default) {
    result = detail::summarize(sim::ControlLoop(scenario, mode, seed).run());
  } else if (external_link != nullptr) {
    result = detail::summarize(sim::ControlLoop(scenario, mode, seed, external_link).run());
  } else {
    twin::InMemoryBus bus;
    twin::ServiceConfig cfg;
    cfg.monitor = scenario.monitor;
    if (out_dir) cfg.log_path = (fs::path(*out_dir) / ("twin_" + file_tag + ".jsonl")).string();
    twin::TwinService service(cfg, bus);
    service.start();
    TransportTwinLink link(bus, cfg.topics);
    result = detail::summarize(sim::ControlLoop(scenario, mode, seed, &link).run());
    auto snap = service.snapshot();
    result.p1_violations = snap.p1_violations;
    result.p2_violations = snap.p2_violations;
    result.twin_log_path = cfg.log_path;
  }

  if (out_dir) {
    detail::write_ticks_csv((std::filesystem::path(*out_dir) / ("ticks_" + file_tag + ".csv")).string(),
                            result.ticks);
    nlohmann::json summary = {
        {"kind", "summary"},          {"scenario", scenario.name},
        {"mode", mode_name(mode)},    {"seed", seed},
        {"mse", result.mse},          {"p1_violations", result.p1_violations},
        {"p2_violations", result.p2_violations}, {"collisions", result.collisions},
        {"corrected_ticks", result.corrected_ticks}, {"ticks", result.ticks.size()},
    };
    std::ofstream out((std::filesystem::path(*out_dir) / "summary.jsonl").string(), std::ios::app);
    out << summary.dump() << '\n';
  }
  return result;
}

struct CompareResult {
  ExperimentResult default_run;
  ExperimentResult augmented_run;
  double reduction = 0.0; // relative MSE reduction, 0 when default MSE is 0
};

/// Runs both modes with the same seed and reports the relative MSE
/// reduction. With an output directory set, also writes a combined
/// plot-ready CSV (t, mode, expected, actual, corrected).
inline CompareResult compare(const sim::Scenario& scenario, std::uint64_t seed,
                             const std::optional<std::string>& out_dir = std::nullopt) {
  CompareResult r;
  r.default_run = run_experiment(scenario, sim::LoopMode::Default, seed, out_dir);
  r.augmented_run = run_experiment(scenario, sim::LoopMode::Augmented, seed, out_dir);
  if (r.default_run.mse > 0.0)
    r.reduction = (r.default_run.mse - r.augmented_run.mse) / r.default_run.mse;

  if (out_dir) {
    auto path = std::filesystem::path(*out_dir) / ("compare_seed" + std::to_string(seed) + ".csv");
    std::ofstream out(path.string());
    out << "t,mode,expected,actual,corrected\n";
    auto dump = [&out](const ExperimentResult& run, const char* mode) {
      for (const auto& tk : run.ticks) {
        out << num::format_double(tk.t) << ',' << mode << ',' << num::format_double(tk.expected_speed)
            << ',' << num::format_double(tk.actual_speed) << ',' << (tk.corrected ? '1' : '0') << '\n';
      }
    };
    dump(r.default_run, "default");
    dump(r.augmented_run, "augmented");
  }
  return r;
}

} // namespace twinwatch::harness
