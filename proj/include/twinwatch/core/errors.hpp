#pragma once

#include <stdexcept>
#include <string>

namespace twinwatch {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Syntax, scoping or kind errors in monitor specifications and traces.
/// Carries a 1-based source position when one is known (0 = unknown).
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line, int column)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

private:
  static std::string format(const std::string& what, int line, int column) {
    if (line <= 0) return what;
    std::string s = std::to_string(line);
    if (column > 0) s += ":" + std::to_string(column);
    return s + ": " + what;
  }

  int line_;
  int column_;
};

/// Errors detected while turning a parsed specification into a dataflow graph.
class CompileError : public Error {
public:
  using Error::Error;
};

/// Errors raised during stream evaluation (timestamp regressions, unknown
/// streams, internal kind corruption).
class EvalError : public Error {
public:
  using Error::Error;
};

/// Transport-level failures (not connected, connection refused, protocol).
class TransportError : public Error {
public:
  using Error::Error;
};

/// Configuration and input-file problems.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace twinwatch
