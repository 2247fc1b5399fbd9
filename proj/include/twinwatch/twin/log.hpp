#pragma once

#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "twinwatch/core/errors.hpp"

namespace twinwatch::twin {

/// Append-only store of line-delimited JSON records. Every record carries a
/// `kind` field (state | verdict | deadletter). Write failures flip the log
/// into a degraded state instead of stopping the service.
class EventLog {
public:
  EventLog() = default;

  explicit EventLog(const std::string& path) { open(path); }

  void open(const std::string& path) {
    std::lock_guard lock(mu_);
    path_ = path;
    out_.open(path, std::ios::app);
    degraded_ = !out_.good();
  }

  bool is_open() const { return out_.is_open(); }
  bool degraded() const { return degraded_; }
  const std::string& path() const { return path_; }

  /// Appends one record with the given kind; remaining fields come from
  /// `payload`. No-op (counted as degraded) when the sink is broken.
  void append(const std::string& kind, nlohmann::json payload) {
    std::lock_guard lock(mu_);
    if (!out_.is_open() || degraded_) return;
    payload["kind"] = kind;
    out_ << payload.dump() << '\n';
    out_.flush();
    if (!out_.good()) degraded_ = true;
  }

  void flush() {
    std::lock_guard lock(mu_);
    if (out_.is_open()) out_.flush();
  }

  /// All records of a file, in write order.
  static std::vector<nlohmann::json> read_all(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw Error("cannot open log file: " + path);
    std::vector<nlohmann::json> records;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Error("malformed log line in " + path);
      records.push_back(std::move(j));
    }
    return records;
  }

  /// Records filtered by kind and/or half-open time range [t0, t1). Records
  /// without a numeric `t` (dead letters) only match when no range is given.
  static std::vector<nlohmann::json> query(const std::string& path,
                                           std::optional<double> t0 = std::nullopt,
                                           std::optional<double> t1 = std::nullopt,
                                           const std::string& kind = {}) {
    std::vector<nlohmann::json> out;
    for (auto& rec : read_all(path)) {
      if (!kind.empty() && (!rec.contains("kind") || rec["kind"] != kind)) continue;
      if (t0 || t1) {
        auto it = rec.find("t");
        if (it == rec.end() || !it->is_number()) continue;
        double t = it->get<double>();
        if (t0 && t < *t0) continue;
        if (t1 && t >= *t1) continue;
      }
      out.push_back(std::move(rec));
    }
    return out;
  }

private:
  std::mutex mu_;
  std::string path_;
  std::ofstream out_;
  bool degraded_ = false;
};

} // namespace twinwatch::twin
