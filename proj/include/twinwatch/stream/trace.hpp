#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "twinwatch/core/value.hpp"

namespace twinwatch::stream {

/// One timestamped value on some stream.
struct TimedEvent {
  Timestamp t = 0;
  Value value;

  friend bool operator==(const TimedEvent& a, const TimedEvent& b) {
    return a.t == b.t && a.value == b.value;
  }
};

struct TraceEntry {
  std::string stream;
  TimedEvent event;

  friend bool operator==(const TraceEntry& a, const TraceEntry& b) {
    return a.stream == b.stream && a.event == b.event;
  }
};

/// An ordered sequence of events across streams: timestamps non-decreasing
/// overall, strictly increasing per stream.
struct Trace {
  std::vector<TraceEntry> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  void append(std::string stream, TimedEvent ev) {
    entries.push_back({std::move(stream), ev});
  }

  /// Events of one stream, in order.
  std::vector<TimedEvent> events_of(std::string_view stream) const {
    std::vector<TimedEvent> out;
    for (const auto& e : entries)
      if (e.stream == stream) out.push_back(e.event);
    return out;
  }

  friend bool operator==(const Trace& a, const Trace& b) { return a.entries == b.entries; }
};

namespace detail {

inline std::string_view strip(std::string_view sv) {
  while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t' || sv.front() == '\r')) sv.remove_prefix(1);
  while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r')) sv.remove_suffix(1);
  return sv;
}

inline bool is_ident(std::string_view sv) {
  if (sv.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(sv[0])) || sv[0] == '_')) return false;
  for (char c : sv)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

/// Scalar literal in trace files: true/false, integer, or decimal.
inline std::optional<Value> parse_scalar(std::string_view sv) {
  if (sv == "true") return Value(true);
  if (sv == "false") return Value(false);
  if (sv.find_first_of(".eE") == std::string_view::npos && sv != "inf" && sv != "-inf" && sv != "nan") {
    if (auto i = num::parse_int(sv)) return Value(*i);
    return std::nullopt;
  }
  if (auto d = num::parse_double(sv)) return Value(*d);
  return std::nullopt;
}

} // namespace detail

/// Parses the playground trace format: one `<t>: <name> = <value>` per line,
/// blank lines ignored. Enforces the Trace ordering invariants.
inline Trace parse_trace(std::string_view text) {
  Trace trace;
  std::unordered_map<std::string, Timestamp> last_per_stream;
  Timestamp last_t = -1;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    line = detail::strip(line);
    if (line.empty()) continue;

    auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw ParseError("malformed trace line, expected '<t>: <name> = <value>'", line_no, 0);
    auto ts = parse_timestamp(detail::strip(line.substr(0, colon)));
    if (!ts) throw ParseError("malformed timestamp in trace line", line_no, 0);

    std::string_view rest = line.substr(colon + 1);
    auto eq = rest.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("malformed trace line, expected '<t>: <name> = <value>'", line_no, 0);
    std::string_view name = detail::strip(rest.substr(0, eq));
    std::string_view value_text = detail::strip(rest.substr(eq + 1));
    if (!detail::is_ident(name))
      throw ParseError("malformed stream name in trace line", line_no, 0);
    auto value = detail::parse_scalar(value_text);
    if (!value) throw ParseError("malformed value in trace line", line_no, 0);

    if (*ts < last_t)
      throw ParseError("timestamp regression: " + format_timestamp(*ts) + " after " + format_timestamp(last_t),
                       line_no, 0);
    auto [it, inserted] = last_per_stream.try_emplace(std::string(name), *ts);
    if (!inserted) {
      if (*ts <= it->second)
        throw ParseError("duplicate event for stream '" + std::string(name) + "' at " + format_timestamp(*ts),
                         line_no, 0);
      it->second = *ts;
    }
    last_t = *ts;
    trace.append(std::string(name), TimedEvent{*ts, *value});
  }
  return trace;
}

/// Inverse of parse_trace; format then parse is the identity on valid traces.
inline std::string format_trace(const Trace& trace) {
  std::string out;
  for (const auto& e : trace.entries) {
    out += format_timestamp(e.event.t);
    out += ": ";
    out += e.stream;
    out += " = ";
    out += format_value(e.event.value);
    out += '\n';
  }
  return out;
}

} // namespace twinwatch::stream
