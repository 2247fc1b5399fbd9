#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twinwatch/core/value.hpp"

namespace twinwatch::stream {

struct SourcePos {
  int line = 0;
  int column = 0;
};

enum class UnaryOp { Neg, Not };

enum class BinaryOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };

/// Stream builtins. `Last` is the only operator allowed to close a cycle.
enum class Builtin { Abs, Min, Max, Merge, Default, Last };

inline const char* builtin_name(Builtin b) {
  switch (b) {
    case Builtin::Abs: return "abs";
    case Builtin::Min: return "min";
    case Builtin::Max: return "max";
    case Builtin::Merge: return "merge";
    case Builtin::Default: return "default";
    case Builtin::Last: return "last";
  }
  return "?";
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Node { Literal, Ident, Unary, Binary, Call, If } node;

  SourcePos pos;
  ValueKind kind = ValueKind::Int; // inferred stream kind of this expression

  // Literal
  Value literal;
  // Ident
  std::string name;
  // Unary / Binary / Call / If
  UnaryOp unary_op{};
  BinaryOp binary_op{};
  Builtin builtin{};
  std::vector<ExprPtr> args; // operands in source order (If: cond, then, else)
};

/// `@TelegrafIn(id, tags, field)` on an input declaration: binds the stream
/// to a message field for the in-process connector.
struct IngressAnnotation {
  std::string id;
  std::string tags;
  std::string field;
};

/// `@TelegrafOut(name)` on an output declaration: the wire name under which
/// the stream's events leave the monitor.
struct EgressAnnotation {
  std::string name;
};

struct InputDecl {
  std::string name;
  ValueKind kind;
  std::optional<IngressAnnotation> annotation;
  SourcePos pos;
};

struct Definition {
  std::string name;
  ExprPtr expr;
  ValueKind kind; // inferred
  SourcePos pos;
};

struct OutputDecl {
  std::string name;
  std::optional<EgressAnnotation> annotation;
  SourcePos pos;
};

/// A parsed monitor specification: inputs, definitions and outputs, all
/// name-resolved and kind-checked.
struct MonitorSpec {
  std::vector<InputDecl> inputs;
  std::vector<Definition> definitions;
  std::vector<OutputDecl> outputs;

  const InputDecl* find_input(std::string_view name) const {
    for (const auto& i : inputs)
      if (i.name == name) return &i;
    return nullptr;
  }
  const Definition* find_definition(std::string_view name) const {
    for (const auto& d : definitions)
      if (d.name == name) return &d;
    return nullptr;
  }
};

} // namespace twinwatch::stream
