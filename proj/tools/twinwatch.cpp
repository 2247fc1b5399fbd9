// twinwatch command-line harness: offline spec checking, CSV replay into a
// twin, default-vs-augmented experiments, MSE comparison, and the
// long-running twin service.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>

#include "twinwatch/harness/experiment.hpp"
#include "twinwatch/harness/replay.hpp"
#include "twinwatch/monitors/monitors.hpp"
#include "twinwatch/sim/scenario.hpp"
#include "twinwatch/stream/graph.hpp"
#include "twinwatch/stream/parser.hpp"
#include "twinwatch/twin/mqtt_client.hpp"
#include "twinwatch/twin/service.hpp"

using namespace twinwatch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAssertion = 3;

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cmd_check(const std::string& spec_path, const std::string& trace_path) {
  auto spec = stream::parse_spec(read_file(spec_path));
  auto graph = stream::compile(spec);
  auto trace = stream::parse_trace(read_file(trace_path));
  std::cout << stream::format_trace(graph.run_trace(trace));
  return kExitOk;
}

int cmd_replay(const std::string& csv_path, double rate, const std::string& broker,
               const std::string& state_topic, const std::string& action_topic, int qos,
               const std::string& log_path) {
  auto rows = harness::read_replay_csv(csv_path);
  twin::TopicConfig topics;
  topics.state_topic = state_topic;
  topics.action_topic = action_topic;
  topics.qos = qos;
  topics.validate();

  harness::ReplayStats stats;
  if (broker.empty()) {
    // self-contained: an in-process twin answers over the in-memory bus
    twin::InMemoryBus bus;
    twin::ServiceConfig cfg;
    cfg.topics = topics;
    cfg.log_path = log_path;
    twin::TwinService twin_svc(cfg, bus);
    twin_svc.start();
    stats = harness::replay(rows, bus, topics, rate, 0.5);
  } else {
    twin::MqttTransport::Options opt;
    opt.broker_url = broker;
    opt.client_id = "twinwatch-replay";
    opt.qos = qos;
    twin::MqttTransport transport(opt);
    transport.connect();
    stats = harness::replay(rows, transport, topics, rate, 2.0);
    transport.shutdown();
  }
  std::cout << "published " << stats.states_published << " states, received "
            << stats.verdicts_received << " verdicts\n";
  return kExitOk;
}

int cmd_experiment(const std::string& scenario_path, const std::string& mode_name,
                   std::uint64_t seed, const std::string& out_dir) {
  sim::Scenario scenario = sim::load_scenario(scenario_path);
  sim::LoopMode mode =
      mode_name == "default" ? sim::LoopMode::Default : sim::LoopMode::Augmented;
  std::optional<std::string> out;
  if (!out_dir.empty()) out = out_dir;
  auto result = harness::run_experiment(scenario, mode, seed, out);
  std::printf("scenario=%s mode=%s seed=%llu ticks=%zu mse=%.6g collisions=%llu corrected=%llu\n",
              scenario.name.c_str(), mode_name.c_str(), static_cast<unsigned long long>(seed),
              result.ticks.size(), result.mse, static_cast<unsigned long long>(result.collisions),
              static_cast<unsigned long long>(result.corrected_ticks));
  return kExitOk;
}

int cmd_compare(const std::string& scenario_path, std::uint64_t seed, const std::string& out_dir,
                std::optional<double> assert_reduction) {
  sim::Scenario scenario = sim::load_scenario(scenario_path);
  std::optional<std::string> out;
  if (!out_dir.empty()) out = out_dir;
  auto r = harness::compare(scenario, seed, out);
  std::printf("%-12s %12s %12s %12s\n", "scenario", "mse_default", "mse_augmented", "reduction");
  std::printf("%-12s %12.6g %12.6g %11.1f%%\n", scenario.name.c_str(), r.default_run.mse,
              r.augmented_run.mse, 100.0 * r.reduction);
  if (assert_reduction && r.reduction * 100.0 < *assert_reduction) {
    std::fprintf(stderr, "reduction %.1f%% is below the required %.1f%%\n", 100.0 * r.reduction,
                 *assert_reduction);
    return kExitAssertion;
  }
  return kExitOk;
}

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

int cmd_serve(const std::string& config_path) {
  twin::ServiceConfig cfg = twin::load_service_config(config_path);

  twin::MqttTransport::Options opt;
  opt.broker_url = cfg.topics.broker_url;
  opt.client_id = "twinwatch-twin";
  opt.qos = cfg.topics.qos;
  twin::MqttTransport transport(opt);
  transport.on_connection_change([](bool up) {
    std::fprintf(stderr, "transport %s\n", up ? "connected" : "disconnected");
  });

  twin::TwinService service(cfg, transport);

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  // status endpoint comes up first so a down broker is visible as
  // transport_connected 0 while the connect loop retries
  httplib::Server status_server;
  std::thread status_thread;
  if (cfg.status_port > 0) {
    status_server.Get("/status", [&service](const httplib::Request&, httplib::Response& res) {
      res.set_content(service.status_text(), "text/plain");
    });
    status_thread = std::thread(
        [&status_server, port = cfg.status_port] { status_server.listen("127.0.0.1", port); });
    std::fprintf(stderr, "status endpoint on http://127.0.0.1:%d/status\n", cfg.status_port);
  }

  double backoff = opt.backoff_base_s;
  while (!g_stop.load()) {
    try {
      transport.connect();
      break;
    } catch (const TransportError&) {
      std::fprintf(stderr, "broker unreachable, retrying in %.1fs\n", backoff);
      auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(backoff);
      while (!g_stop.load() && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      backoff = std::min(backoff * 2.0, opt.backoff_cap_s);
    }
  }
  if (transport.connected()) service.start();
  std::fprintf(stderr, "twin service running (state topic '%s', action topic '%s')\n",
               cfg.topics.state_topic.c_str(), cfg.topics.action_topic.c_str());
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));

  status_server.stop();
  if (status_thread.joinable()) status_thread.join();
  transport.shutdown();
  service.flush();
  std::fprintf(stderr, "shut down cleanly\n");
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"digital-twin runtime verification harness for a differential-drive robot"};
  app.require_subcommand(1);

  std::string spec_path, trace_path;
  auto* check = app.add_subcommand("check", "run a monitor spec over a trace file");
  check->add_option("spec", spec_path, "monitor specification (.tessla)")->required();
  check->add_option("trace", trace_path, "input trace file")->required();

  std::string csv_path, broker, state_topic = "tessla", action_topic = "action", replay_log;
  double rate = 0.0;
  int qos = 1;
  auto* replay = app.add_subcommand("replay", "publish a recorded CSV as a mock robot");
  replay->add_option("csv", csv_path, "replay CSV file")->required();
  replay->add_option("--rate", rate, "playback rate multiplier (0 = as fast as possible)");
  replay->add_option("--broker", broker, "MQTT broker url (default: in-process twin)");
  replay->add_option("--state-topic", state_topic, "state topic");
  replay->add_option("--action-topic", action_topic, "action topic");
  replay->add_option("--qos", qos, "MQTT QoS (0 or 1)");
  replay->add_option("--log", replay_log, "twin store path (in-process twin only)");

  std::string scenario_path, mode = "default", out_dir;
  std::uint64_t seed = 1;
  auto* experiment = app.add_subcommand("experiment", "run one scenario in one mode");
  experiment->add_option("scenario", scenario_path, "scenario JSON file")->required();
  experiment->add_option("--mode", mode, "default | augmented")
      ->check(CLI::IsMember({"default", "augmented"}));
  experiment->add_option("--seed", seed, "random seed");
  experiment->add_option("--out", out_dir, "output directory");

  std::string cmp_scenario, cmp_out;
  std::uint64_t cmp_seed = 1;
  double assert_reduction = -1.0;
  auto* compare = app.add_subcommand("compare", "run both modes and report the MSE reduction");
  compare->add_option("scenario", cmp_scenario, "scenario JSON file")->required();
  compare->add_option("--seed", cmp_seed, "random seed");
  compare->add_option("--out", cmp_out, "output directory");
  compare->add_option("--assert-reduction", assert_reduction,
                      "exit 3 unless the reduction reaches this percentage");

  std::string config_path;
  auto* serve = app.add_subcommand("serve", "run the twin service against an MQTT broker");
  serve->add_option("--config", config_path, "service config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (check->parsed()) return cmd_check(spec_path, trace_path);
    if (replay->parsed())
      return cmd_replay(csv_path, rate, broker, state_topic, action_topic, qos, replay_log);
    if (experiment->parsed()) return cmd_experiment(scenario_path, mode, seed, out_dir);
    if (compare->parsed())
      return cmd_compare(cmp_scenario, cmp_seed, cmp_out,
                         assert_reduction >= 0.0 ? std::optional<double>(assert_reduction)
                                                 : std::nullopt);
    if (serve->parsed()) return cmd_serve(config_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
