#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "twinwatch/messages.hpp"
#include "twinwatch/stream/graph.hpp"

namespace twinwatch::twin {

/// Direct in-process connector between state messages and a stream monitor:
/// @TelegrafIn annotations bind input streams to numeric fields of the state
/// payload, @TelegrafOut names the wire fields its results leave under. One
/// state message becomes one synchronous instant at its timestamp.
class StreamConnector {
public:
  explicit StreamConnector(const stream::MonitorSpec& spec) : graph_(stream::compile(spec)) {
    for (const auto& in : graph_.inputs()) {
      if (!in.annotation) continue;
      if (!field_getter(in.annotation->field))
        throw ConfigError("@TelegrafIn field '" + in.annotation->field +
                          "' is not a numeric state field");
      bindings_.push_back({in.name, in.annotation->field, in.kind});
    }
    if (bindings_.empty())
      throw ConfigError("monitor spec has no @TelegrafIn bindings");
  }

  struct WireEvent {
    std::string field; // @TelegrafOut name
    stream::TimedEvent event;
  };

  /// Feeds one state message and returns the annotated outputs it produced.
  std::vector<WireEvent> feed(const RobotStateMsg& msg) {
    Timestamp t = timestamp_from_seconds(msg.t);
    for (const auto& b : bindings_) {
      double raw = (*field_getter(b.field))(msg);
      Value v = b.kind == ValueKind::Int ? to_int_value(raw, b.field) : Value(raw);
      (void)graph_.push(b.stream, {t, v});
    }
    auto emits = graph_.flush();
    std::vector<WireEvent> out;
    for (auto& [name, ev] : emits) {
      for (const auto& port : graph_.outputs()) {
        if (port.name == name && port.annotation) {
          out.push_back({port.annotation->name, ev});
          break;
        }
      }
    }
    return out;
  }

private:
  struct Binding {
    std::string stream;
    std::string field;
    ValueKind kind;
  };

  using Getter = double (*)(const RobotStateMsg&);

  static std::optional<Getter> field_getter(const std::string& field) {
    if (field == "expectedSpeed") return +[](const RobotStateMsg& m) { return m.expected_speed; };
    if (field == "actualSpeed") return +[](const RobotStateMsg& m) { return m.actual_speed; };
    if (field == "expectedLinear") return +[](const RobotStateMsg& m) { return m.expected_linear; };
    if (field == "expectedAngular") return +[](const RobotStateMsg& m) { return m.expected_angular; };
    if (field == "actualLinear") return +[](const RobotStateMsg& m) { return m.actual_linear; };
    if (field == "actualAngular") return +[](const RobotStateMsg& m) { return m.actual_angular; };
    if (field == "proposedLinear") return +[](const RobotStateMsg& m) { return m.proposed.linear; };
    if (field == "proposedAngular") return +[](const RobotStateMsg& m) { return m.proposed.angular; };
    if (field == "t") return +[](const RobotStateMsg& m) { return m.t; };
    return std::nullopt;
  }

  static Value to_int_value(double raw, const std::string& field) {
    double r = std::nearbyint(raw);
    if (r != raw)
      throw EvalError("field '" + field + "' carries a non-integer value for an Int stream");
    return Value(static_cast<std::int64_t>(r));
  }

  stream::MonitorGraph graph_;
  std::vector<Binding> bindings_;
};

} // namespace twinwatch::twin
