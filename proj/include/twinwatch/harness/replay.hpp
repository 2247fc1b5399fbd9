#pragma once

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "twinwatch/core/value.hpp"
#include "twinwatch/messages.hpp"
#include "twinwatch/twin/log.hpp"
#include "twinwatch/twin/transport.hpp"

namespace twinwatch::harness {

/// One recorded robot cycle in the replay interchange format.
struct ReplayRow {
  double t = 0.0;
  monitors::LidarScan lidar;
  double expected_speed = 0.0;
  double actual_speed = 0.0;
  ActuationCommand proposed;
  std::array<std::string, kMetaFields> meta{};
};

inline std::string replay_csv_header() {
  std::string h = "t";
  for (int j = 1; j <= monitors::kBeamCount; ++j) h += ",lidar_" + std::to_string(j);
  h += ",expected_speed,actual_speed,proposed_linear,proposed_angular";
  for (std::size_t i = 1; i <= kMetaFields; ++i) h += ",meta_" + std::to_string(i);
  return h;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline constexpr std::size_t kReplayColumns = 1 + monitors::kBeamCount + 4 + kMetaFields;

} // namespace detail

/// Parses the replay CSV. Any malformed row aborts with its 1-based data row
/// number in the diagnostic; timestamps must be non-decreasing.
inline std::vector<ReplayRow> read_replay_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  {
    auto cells = detail::split_csv(line);
    if (cells.empty() || cells[0] != "t" || cells.size() != detail::kReplayColumns)
      throw ConfigError("replay CSV header does not match the interchange schema");
  }
  std::vector<ReplayRow> rows;
  std::size_t row_no = 0;
  double last_t = -1.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row_no;
    auto cells = detail::split_csv(line);
    if (cells.size() != detail::kReplayColumns)
      throw ConfigError("replay CSV row " + std::to_string(row_no) + " has " +
                        std::to_string(cells.size()) + " columns, expected " +
                        std::to_string(detail::kReplayColumns));
    auto num = [&](std::size_t idx, const char* what) {
      auto v = num::parse_double(cells[idx]);
      if (!v)
        throw ConfigError("replay CSV row " + std::to_string(row_no) + ": malformed " + what);
      return *v;
    };
    ReplayRow row;
    row.t = num(0, "t");
    if (row.t < last_t)
      throw ConfigError("replay CSV row " + std::to_string(row_no) + ": timestamp regression");
    last_t = row.t;
    for (int j = 0; j < monitors::kBeamCount; ++j)
      row.lidar.ranges[static_cast<std::size_t>(j)] = num(1 + static_cast<std::size_t>(j), "lidar value");
    std::size_t base = 1 + monitors::kBeamCount;
    row.expected_speed = num(base, "expected_speed");
    row.actual_speed = num(base + 1, "actual_speed");
    row.proposed.linear = num(base + 2, "proposed_linear");
    row.proposed.angular = num(base + 3, "proposed_angular");
    for (std::size_t i = 0; i < kMetaFields; ++i) row.meta[i] = cells[base + 4 + i];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<ReplayRow> read_replay_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f.good()) throw ConfigError("cannot open replay CSV: " + path);
  return read_replay_csv(f);
}

inline void write_replay_csv(std::ostream& out, const std::vector<ReplayRow>& rows) {
  out << replay_csv_header() << '\n';
  for (const auto& r : rows) {
    out << num::format_double(r.t);
    for (double v : r.lidar.ranges) out << ',' << num::format_double(v);
    out << ',' << num::format_double(r.expected_speed) << ',' << num::format_double(r.actual_speed)
        << ',' << num::format_double(r.proposed.linear) << ',' << num::format_double(r.proposed.angular);
    for (const auto& m : r.meta) {
      if (m.find_first_of(",\n\"") != std::string::npos)
        throw ConfigError("replay meta fields must not contain commas, quotes or newlines");
      out << ',' << m;
    }
    out << '\n';
  }
}

inline RobotStateMsg state_from_row(const ReplayRow& row, std::uint64_t seq) {
  RobotStateMsg m;
  m.seq = seq;
  m.t = row.t;
  m.expected_linear = row.expected_speed;
  m.expected_angular = 0.0;
  m.actual_linear = row.actual_speed;
  m.actual_angular = 0.0;
  m.expected_speed = row.expected_speed;
  m.actual_speed = row.actual_speed;
  m.lidar = row.lidar;
  m.proposed = row.proposed;
  m.meta = row.meta;
  return m;
}

/// Rebuilds replay rows from a twin store's state records, so a recorded run
/// can be pushed through a fresh twin.
inline std::vector<ReplayRow> replay_rows_from_state_log(const std::string& log_path) {
  std::vector<ReplayRow> rows;
  for (const auto& rec : twin::EventLog::query(log_path, std::nullopt, std::nullopt, "state")) {
    ReplayRow row;
    row.t = rec.at("t").get<double>();
    const auto& lidar = rec.at("lidar");
    if (!lidar.is_array() || lidar.size() != static_cast<std::size_t>(monitors::kBeamCount))
      throw Error("state record in " + log_path + " has a malformed lidar array");
    for (std::size_t i = 0; i < lidar.size(); ++i) row.lidar.ranges[i] = lidar[i].get<double>();
    row.expected_speed = rec.at("expectedSpeed").get<double>();
    row.actual_speed = rec.at("actualSpeed").get<double>();
    row.proposed.linear = rec.at("proposed").at("linear").get<double>();
    row.proposed.angular = rec.at("proposed").at("angular").get<double>();
    const auto& meta = rec.at("meta");
    for (std::size_t i = 0; i < kMetaFields && i < meta.size(); ++i)
      row.meta[i] = meta[i].get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

struct ReplayStats {
  std::uint64_t states_published = 0;
  std::uint64_t verdicts_received = 0;
};

/// Open-loop replay: each row becomes a state message with seq = 1-based row
/// index; verdicts coming back are counted (and recorded by the twin's own
/// store), never fed back. rate 0 publishes as fast as possible; otherwise
/// inter-message pacing is row time delta divided by rate.
inline ReplayStats replay(const std::vector<ReplayRow>& rows, twin::Transport& transport,
                          const twin::TopicConfig& topics, double rate = 0.0,
                          double drain_timeout_s = 2.0) {
  ReplayStats stats;
  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t verdicts = 0;
  transport.subscribe(topics.action_topic, [&](const std::string&, const std::string&) {
    std::lock_guard lock(mu);
    ++verdicts;
    cv.notify_all();
  });

  double prev_t = rows.empty() ? 0.0 : rows.front().t;
  std::uint64_t seq = 0;
  for (const auto& row : rows) {
    if (rate > 0.0 && row.t > prev_t)
      std::this_thread::sleep_for(std::chrono::duration<double>((row.t - prev_t) / rate));
    prev_t = row.t;
    transport.publish(topics.state_topic, encode(state_from_row(row, ++seq)));
    ++stats.states_published;
  }

  std::unique_lock lock(mu);
  cv.wait_for(lock, std::chrono::duration<double>(drain_timeout_s),
              [&] { return verdicts >= stats.states_published; });
  stats.verdicts_received = verdicts;
  return stats;
}

} // namespace twinwatch::harness
