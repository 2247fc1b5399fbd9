#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "twinwatch/core/errors.hpp"

namespace twinwatch {

enum class ValueKind { Int, Float, Bool };

inline const char* kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::Int: return "Int";
    case ValueKind::Float: return "Float";
    case ValueKind::Bool: return "Bool";
  }
  return "?";
}

/// A scalar stream value. Exactly one of the three kinds; the kind of a
/// stream is fixed at declaration time.
class Value {
public:
  Value() : v_(std::int64_t{0}) {}
  Value(std::int64_t i) : v_(i) {}
  Value(double d) : v_(d) {}
  Value(bool b) : v_(b) {}

  ValueKind kind() const {
    if (std::holds_alternative<std::int64_t>(v_)) return ValueKind::Int;
    if (std::holds_alternative<double>(v_)) return ValueKind::Float;
    return ValueKind::Bool;
  }

  bool is_numeric() const { return kind() != ValueKind::Bool; }

  std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
  double as_float() const { return std::get<double>(v_); }
  bool as_bool() const { return std::get<bool>(v_); }

  /// Numeric value widened to double (Int or Float only).
  double as_double() const {
    return kind() == ValueKind::Int ? static_cast<double>(as_int()) : as_float();
  }

  /// Coerce to the given kind; Int widens to Float, everything else must
  /// match exactly.
  std::optional<Value> coerce(ValueKind want) const {
    if (kind() == want) return *this;
    if (kind() == ValueKind::Int && want == ValueKind::Float)
      return Value(static_cast<double>(as_int()));
    return std::nullopt;
  }

  /// Structural equality: kinds must match, floats compare bitwise so that
  /// -0.0 and NaN payloads round-trip faithfully.
  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind() != b.kind()) return false;
    switch (a.kind()) {
      case ValueKind::Int: return a.as_int() == b.as_int();
      case ValueKind::Bool: return a.as_bool() == b.as_bool();
      case ValueKind::Float: {
        double x = a.as_float(), y = b.as_float();
        std::uint64_t bx, by;
        static_assert(sizeof bx == sizeof x);
        std::memcpy(&bx, &x, sizeof bx);
        std::memcpy(&by, &y, sizeof by);
        return bx == by;
      }
    }
    return false;
  }
  friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }

private:
  std::variant<std::int64_t, double, bool> v_;
};

namespace num {

// Wrapping two's-complement arithmetic: keeps Int overflow defined and
// identical between the incremental engine and any reference evaluator.
inline std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
inline std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
inline std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}
inline std::int64_t wrap_neg(std::int64_t a) {
  return static_cast<std::int64_t>(~static_cast<std::uint64_t>(a) + 1u);
}

/// Shortest round-trip decimal form. Integral-valued doubles keep a ".0"
/// suffix so the text re-parses as Float, not Int.
inline std::string format_double(double d) {
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, end);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::optional<double> parse_double(std::string_view sv) {
  if (sv == "inf") return INFINITY;
  if (sv == "-inf") return -INFINITY;
  if (sv == "nan") return NAN;
  double d{};
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), d);
  if (ec != std::errc{} || ptr != sv.data() + sv.size()) return std::nullopt;
  return d;
}

inline std::optional<std::int64_t> parse_int(std::string_view sv) {
  std::int64_t v{};
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (ec != std::errc{} || ptr != sv.data() + sv.size()) return std::nullopt;
  return v;
}

} // namespace num

/// Renders a value the way trace files and the playground output expect it.
inline std::string format_value(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Int: return std::to_string(v.as_int());
    case ValueKind::Bool: return v.as_bool() ? "true" : "false";
    case ValueKind::Float: return num::format_double(v.as_float());
  }
  return {};
}

// ---------------------------------------------------------------------------
// Time. Stream timestamps are non-negative rational seconds held exactly as
// 64-bit nanosecond ticks; whole-second trace files stay whole seconds.
// ---------------------------------------------------------------------------

using Timestamp = std::int64_t; // nanoseconds

constexpr Timestamp kNanosPerSecond = 1'000'000'000;

inline Timestamp timestamp_from_seconds(double s) {
  return static_cast<Timestamp>(std::llround(s * 1e9));
}

inline double timestamp_to_seconds(Timestamp t) {
  return static_cast<double>(t) / 1e9;
}

/// Parses a decimal-seconds timestamp ("0", "2", "1.25") to nanoseconds.
/// Rejects negatives and more than nine fractional digits.
inline std::optional<Timestamp> parse_timestamp(std::string_view sv) {
  if (sv.empty() || sv.front() == '-' || sv.front() == '+') return std::nullopt;
  auto dot = sv.find('.');
  std::string_view whole = sv.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : sv.substr(dot + 1);
  if (whole.empty() || frac.size() > 9) return std::nullopt;
  auto w = num::parse_int(whole);
  if (!w || *w > (INT64_MAX / kNanosPerSecond) - 1) return std::nullopt;
  std::int64_t ns = 0;
  if (!frac.empty()) {
    auto f = num::parse_int(frac);
    if (!f) return std::nullopt;
    std::int64_t scale = 1;
    for (std::size_t i = frac.size(); i < 9; ++i) scale *= 10;
    ns = *f * scale;
  }
  return *w * kNanosPerSecond + ns;
}

/// Formats nanoseconds back to decimal seconds with trailing zeros trimmed.
inline std::string format_timestamp(Timestamp t) {
  std::int64_t secs = t / kNanosPerSecond;
  std::int64_t ns = t % kNanosPerSecond;
  if (ns == 0) return std::to_string(secs);
  char frac[16];
  std::snprintf(frac, sizeof frac, "%09lld", static_cast<long long>(ns));
  std::string f(frac);
  while (!f.empty() && f.back() == '0') f.pop_back();
  return std::to_string(secs) + "." + f;
}

} // namespace twinwatch
