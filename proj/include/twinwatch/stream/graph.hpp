#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "twinwatch/core/errors.hpp"
#include "twinwatch/stream/ast.hpp"
#include "twinwatch/stream/trace.hpp"

namespace twinwatch::stream {

namespace detail {
class Compiler;
}

/// Operator codes of compiled graph nodes.
enum class OpCode {
  Input, Literal, Alias,
  Neg, Not,
  Add, Sub, Mul, Div,
  Lt, Le, Gt, Ge, Eq, Ne, And, Or,
  Abs, Min, Max,
  If, Merge, Last, Default,
};

/// Compiled, incrementally evaluable form of a MonitorSpec.
///
/// Semantics are signal-lift: a lifted operator fires at timestamp t whenever
/// any operand has an event at t, reading the last-known value of the other
/// operands; an operand that never produced a value suppresses the result
/// unless wrapped in `default`. Events that share a timestamp form one
/// synchronous step: outputs are emitted only after every input event at that
/// timestamp has been absorbed, so push() returns the outputs of the
/// *previous* instant when time advances, and flush() closes the pending one.
///
/// Not thread-safe; one instance must be driven from one thread at a time.
/// Copying yields an independent instance with identical state.
class MonitorGraph {
public:
  struct Node {
    OpCode op = OpCode::Literal;
    ValueKind kind = ValueKind::Int;
    std::vector<int> args;     // operand node ids; for Last: {value, trigger}
    Value literal;             // Literal payload or Default seed
    // runtime state
    bool has_value = false;
    Value value;
    bool active = false;
    Value step_value;
  };

  struct OutputPort {
    std::string name;
    int node = -1;
    std::optional<EgressAnnotation> annotation;
  };

  using Emit = std::pair<std::string, TimedEvent>; // (output name, event)

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<OutputPort>& outputs() const { return outputs_; }
  const std::vector<InputDecl>& inputs() const { return spec_inputs_; }

  bool has_input(std::string_view name) const { return input_ids_.count(std::string(name)) > 0; }

  /// Feeds one event. Per stream, timestamps must be strictly increasing;
  /// across streams, non-decreasing. Returns the outputs finalized by this
  /// push (the previous instant's, when this event advances time).
  std::vector<Emit> push(std::string_view stream, TimedEvent ev) {
    auto it = input_ids_.find(std::string(stream));
    if (it == input_ids_.end())
      throw EvalError("unknown stream '" + std::string(stream) + "'");
    int id = it->second;
    auto coerced = ev.value.coerce(nodes_[id].kind);
    if (!coerced)
      throw EvalError("kind mismatch on stream '" + std::string(stream) + "': expected " +
                      kind_name(nodes_[id].kind) + ", got " + kind_name(ev.value.kind()));

    std::vector<Emit> out;
    if (pending_) {
      if (ev.t < pending_t_)
        throw EvalError("timestamp regression: " + format_timestamp(ev.t) + " after " +
                        format_timestamp(pending_t_));
      if (ev.t > pending_t_) out = finalize_step();
    }
    if (!pending_) {
      if (has_finalized_ && ev.t <= last_finalized_t_)
        throw EvalError("timestamp regression: " + format_timestamp(ev.t) + " not after " +
                        format_timestamp(last_finalized_t_));
      pending_ = true;
      pending_t_ = ev.t;
    }
    for (const auto& [pid, _] : pending_events_)
      if (pid == id)
        throw EvalError("duplicate event for stream '" + std::string(stream) + "' at " +
                        format_timestamp(ev.t));
    pending_events_.emplace_back(id, *coerced);
    return out;
  }

  /// Closes the pending instant, if any, and returns its outputs. Later
  /// events must carry strictly larger timestamps.
  std::vector<Emit> flush() {
    if (!pending_) return {};
    return finalize_step();
  }

  /// Runs a whole trace through a fresh copy of this graph's state and
  /// returns the concatenated outputs as a trace. Deterministic.
  Trace run_trace(const Trace& trace) const {
    MonitorGraph g(*this);
    Trace out;
    auto take = [&out](std::vector<Emit>&& emits) {
      for (auto& [name, ev] : emits) out.append(std::move(name), ev);
    };
    for (const auto& e : trace.entries) take(g.push(e.stream, e.event));
    take(g.flush());
    return out;
  }

private:
  friend class detail::Compiler;

  std::vector<Emit> finalize_step() {
    const Timestamp t = pending_t_;

    // last() reads the operand value from before this instant: snapshot
    // before anything evaluates.
    for (int id : last_nodes_) {
      const Node& src = nodes_[nodes_[id].args[0]];
      last_snap_has_[id] = src.has_value;
      last_snap_value_[id] = src.value;
    }

    for (auto& n : nodes_) n.active = false;
    for (const auto& [id, v] : pending_events_) {
      nodes_[id].active = true;
      nodes_[id].step_value = v;
    }

    // One pass in topological order; each node is touched exactly once.
    for (int id : topo_order_) evaluate(nodes_[id]);

    std::vector<Emit> out;
    for (const auto& port : outputs_) {
      const Node& n = nodes_[port.node];
      if (n.active) out.emplace_back(port.name, TimedEvent{t, n.step_value});
    }

    for (auto& n : nodes_) {
      if (n.active) {
        n.value = n.step_value;
        n.has_value = true;
      }
    }

    pending_ = false;
    pending_events_.clear();
    has_finalized_ = true;
    last_finalized_t_ = t;
    first_step_done_ = true;
    return out;
  }

  void evaluate(Node& n) {
    switch (n.op) {
      case OpCode::Input:
      case OpCode::Literal:
        return; // inputs were marked from events; literals never fire
      case OpCode::Alias: {
        const Node& s = nodes_[n.args[0]];
        n.active = s.active;
        if (s.active) n.step_value = s.step_value;
        return;
      }
      case OpCode::Merge: {
        const Node& a = nodes_[n.args[0]];
        const Node& b = nodes_[n.args[1]];
        n.active = a.active || b.active;
        if (a.active) n.step_value = promote(a.step_value, n.kind);
        else if (b.active) n.step_value = promote(b.step_value, n.kind);
        return;
      }
      case OpCode::Last: {
        const Node& trig = nodes_[n.args[1]];
        if (trig.active && last_snap_has_[node_id(n)]) {
          n.active = true;
          n.step_value = last_snap_value_[node_id(n)];
        }
        return;
      }
      case OpCode::Default: {
        const Node& s = nodes_[n.args[0]];
        if (!first_step_done_) {
          n.active = true;
          n.step_value = s.active ? promote(s.step_value, n.kind) : n.literal;
        } else if (s.active) {
          n.active = true;
          n.step_value = promote(s.step_value, n.kind);
        }
        return;
      }
      default:
        break;
    }

    // Lifted operators: fire if any operand fired and all operands carry a
    // value (current or last known).
    bool any_active = false;
    for (int a : n.args) {
      const Node& arg = nodes_[a];
      if (arg.active) any_active = true;
      else if (!arg.has_value && arg.op != OpCode::Literal) return; // suppressed
    }
    if (!any_active) return;
    n.active = true;
    n.step_value = apply(n);
  }

  Value current(int id) const {
    const Node& n = nodes_[id];
    if (n.active) return n.step_value;
    if (n.op == OpCode::Literal) return n.literal;
    return n.value;
  }

  static Value promote(const Value& v, ValueKind want) {
    auto c = v.coerce(want);
    if (!c) throw EvalError("internal kind corruption during promotion");
    return *c;
  }

  Value apply(const Node& n) const {
    auto num_result = [&n](double d, std::int64_t i) {
      return n.kind == ValueKind::Int ? Value(i) : Value(d);
    };
    switch (n.op) {
      case OpCode::Neg: {
        Value a = current(n.args[0]);
        if (n.kind == ValueKind::Int) return Value(num::wrap_neg(a.as_int()));
        return Value(-a.as_double());
      }
      case OpCode::Not:
        return Value(!current(n.args[0]).as_bool());
      case OpCode::Abs: {
        Value a = current(n.args[0]);
        if (n.kind == ValueKind::Int) {
          std::int64_t v = a.as_int();
          return Value(v < 0 ? num::wrap_neg(v) : v);
        }
        return Value(std::fabs(a.as_double()));
      }
      case OpCode::Add: case OpCode::Sub: case OpCode::Mul: case OpCode::Div:
      case OpCode::Min: case OpCode::Max: {
        Value a = current(n.args[0]);
        Value b = current(n.args[1]);
        if (n.kind == ValueKind::Int) {
          std::int64_t x = a.as_int(), y = b.as_int();
          switch (n.op) {
            case OpCode::Add: return Value(num::wrap_add(x, y));
            case OpCode::Sub: return Value(num::wrap_sub(x, y));
            case OpCode::Mul: return Value(num::wrap_mul(x, y));
            case OpCode::Min: return Value(y < x ? y : x);
            case OpCode::Max: return Value(y > x ? y : x);
            default: break;
          }
        }
        double x = a.as_double(), y = b.as_double();
        switch (n.op) {
          case OpCode::Add: return Value(x + y);
          case OpCode::Sub: return Value(x - y);
          case OpCode::Mul: return Value(x * y);
          case OpCode::Div: return Value(x / y);
          case OpCode::Min: return Value(y < x ? y : x);
          case OpCode::Max: return Value(y > x ? y : x);
          default: break;
        }
        return num_result(0, 0);
      }
      case OpCode::Lt: case OpCode::Le: case OpCode::Gt: case OpCode::Ge: {
        Value a = current(n.args[0]);
        Value b = current(n.args[1]);
        bool r;
        if (a.kind() == ValueKind::Int && b.kind() == ValueKind::Int) {
          std::int64_t x = a.as_int(), y = b.as_int();
          r = n.op == OpCode::Lt ? x < y : n.op == OpCode::Le ? x <= y : n.op == OpCode::Gt ? x > y : x >= y;
        } else {
          double x = a.as_double(), y = b.as_double();
          r = n.op == OpCode::Lt ? x < y : n.op == OpCode::Le ? x <= y : n.op == OpCode::Gt ? x > y : x >= y;
        }
        return Value(r);
      }
      case OpCode::Eq: case OpCode::Ne: {
        Value a = current(n.args[0]);
        Value b = current(n.args[1]);
        bool eq;
        if (a.kind() == ValueKind::Bool)
          eq = a.as_bool() == b.as_bool();
        else if (a.kind() == ValueKind::Int && b.kind() == ValueKind::Int)
          eq = a.as_int() == b.as_int();
        else
          eq = a.as_double() == b.as_double();
        return Value(n.op == OpCode::Eq ? eq : !eq);
      }
      case OpCode::And:
        return Value(current(n.args[0]).as_bool() && current(n.args[1]).as_bool());
      case OpCode::Or:
        return Value(current(n.args[0]).as_bool() || current(n.args[1]).as_bool());
      case OpCode::If: {
        Value c = current(n.args[0]);
        Value v = c.as_bool() ? current(n.args[1]) : current(n.args[2]);
        return promote(v, n.kind);
      }
      default:
        throw EvalError("internal: unexpected opcode in apply()");
    }
  }

  int node_id(const Node& n) const { return static_cast<int>(&n - nodes_.data()); }

  std::vector<Node> nodes_;
  std::vector<int> topo_order_;
  std::vector<int> last_nodes_;
  std::vector<OutputPort> outputs_;
  std::vector<InputDecl> spec_inputs_;
  std::unordered_map<std::string, int> input_ids_;

  // per-step scratch, sized to nodes_
  std::vector<char> last_snap_has_;
  std::vector<Value> last_snap_value_;

  bool pending_ = false;
  Timestamp pending_t_ = 0;
  std::vector<std::pair<int, Value>> pending_events_;
  bool has_finalized_ = false;
  Timestamp last_finalized_t_ = 0;
  bool first_step_done_ = false;
};

namespace detail {

class Compiler {
public:
  explicit Compiler(const MonitorSpec& spec) : spec_(spec) {}

  MonitorGraph run() {
    MonitorGraph g;
    for (const auto& in : spec_.inputs) {
      int id = add_node(g, OpCode::Input, in.kind, {});
      names_[in.name] = id;
      g.input_ids_[in.name] = id;
    }
    g.spec_inputs_ = spec_.inputs;

    for (const auto& def : spec_.definitions) {
      // Pre-register an alias so the body can refer to itself (legal only
      // through `last`; anything else becomes an illegal cycle below).
      int alias = add_node(g, OpCode::Alias, def.kind, {-1});
      names_[def.name] = alias;
      int body = build(g, *def.expr);
      g.nodes_[alias].args[0] = body;
    }

    for (const auto& out : spec_.outputs) {
      auto it = names_.find(out.name);
      if (it == names_.end())
        throw CompileError("output '" + out.name + "' names an undeclared stream");
      g.outputs_.push_back({out.name, it->second, out.annotation});
    }

    topo_sort(g);
    g.last_snap_has_.assign(g.nodes_.size(), 0);
    g.last_snap_value_.assign(g.nodes_.size(), Value());
    return g;
  }

private:
  int add_node(MonitorGraph& g, OpCode op, ValueKind kind, std::vector<int> args,
               Value literal = Value()) {
    MonitorGraph::Node n;
    n.op = op;
    n.kind = kind;
    n.args = std::move(args);
    n.literal = literal;
    g.nodes_.push_back(std::move(n));
    return static_cast<int>(g.nodes_.size()) - 1;
  }

  int build(MonitorGraph& g, const Expr& e) {
    switch (e.node) {
      case Expr::Node::Literal:
        return add_node(g, OpCode::Literal, e.kind, {}, e.literal);
      case Expr::Node::Ident: {
        auto it = names_.find(e.name);
        if (it == names_.end())
          throw CompileError("internal: unresolved identifier '" + e.name + "'");
        return it->second;
      }
      case Expr::Node::Unary: {
        int a = build(g, *e.args[0]);
        return add_node(g, e.unary_op == UnaryOp::Neg ? OpCode::Neg : OpCode::Not, e.kind, {a});
      }
      case Expr::Node::Binary: {
        int a = build(g, *e.args[0]);
        int b = build(g, *e.args[1]);
        static constexpr OpCode map[] = {OpCode::Add, OpCode::Sub, OpCode::Mul, OpCode::Div,
                                         OpCode::Lt, OpCode::Le, OpCode::Gt, OpCode::Ge,
                                         OpCode::Eq, OpCode::Ne, OpCode::And, OpCode::Or};
        return add_node(g, map[static_cast<int>(e.binary_op)], e.kind, {a, b});
      }
      case Expr::Node::If: {
        int c = build(g, *e.args[0]);
        int a = build(g, *e.args[1]);
        int b = build(g, *e.args[2]);
        return add_node(g, OpCode::If, e.kind, {c, a, b});
      }
      case Expr::Node::Call: {
        if (e.args.size() != expected_arity(e.builtin))
          throw CompileError(std::string("arity error on builtin ") + builtin_name(e.builtin));
        switch (e.builtin) {
          case Builtin::Abs: {
            int a = build(g, *e.args[0]);
            return add_node(g, OpCode::Abs, e.kind, {a});
          }
          case Builtin::Min:
          case Builtin::Max: {
            int a = build(g, *e.args[0]);
            int b = build(g, *e.args[1]);
            return add_node(g, e.builtin == Builtin::Min ? OpCode::Min : OpCode::Max, e.kind, {a, b});
          }
          case Builtin::Merge: {
            int a = build(g, *e.args[0]);
            int b = build(g, *e.args[1]);
            return add_node(g, OpCode::Merge, e.kind, {a, b});
          }
          case Builtin::Default: {
            int a = build(g, *e.args[0]);
            Value seed = literal_value(*e.args[1]);
            auto coerced = seed.coerce(e.kind);
            if (!coerced) throw CompileError("default seed kind does not match the stream kind");
            return add_node(g, OpCode::Default, e.kind, {a}, *coerced);
          }
          case Builtin::Last: {
            int v = build(g, *e.args[0]);
            int trig = build(g, *e.args[1]);
            return add_node(g, OpCode::Last, e.kind, {v, trig});
          }
        }
        break;
      }
    }
    throw CompileError("internal: unhandled expression node");
  }

  static std::size_t expected_arity(Builtin b) { return b == Builtin::Abs ? 1 : 2; }

  static Value literal_value(const Expr& e) {
    if (e.node == Expr::Node::Literal) return e.literal;
    // unary minus on a literal
    const Value& v = e.args[0]->literal;
    if (v.kind() == ValueKind::Int) return Value(num::wrap_neg(v.as_int()));
    return Value(-v.as_float());
  }

  // Cycle detection and topological order over immediate edges. The value
  // edge of `last` is delayed (reads the previous instant) and does not
  // participate; everything else must form a DAG.
  void topo_sort(MonitorGraph& g) {
    const int n = static_cast<int>(g.nodes_.size());
    std::vector<std::vector<int>> deps(n);
    for (int i = 0; i < n; ++i) {
      const auto& node = g.nodes_[i];
      if (node.op == OpCode::Last) {
        deps[i] = {node.args[1]}; // trigger only
        g.last_nodes_.push_back(i);
      } else {
        deps[i] = node.args;
      }
    }
    std::vector<int> state(n, 0); // 0 = unvisited, 1 = on stack, 2 = done
    std::vector<int> order;
    order.reserve(n);
    // iterative DFS with explicit stack
    for (int root = 0; root < n; ++root) {
      if (state[root] != 0) continue;
      std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
      state[root] = 1;
      while (!stack.empty()) {
        auto& [id, next_dep] = stack.back();
        if (next_dep < deps[id].size()) {
          int d = deps[id][next_dep++];
          if (d < 0) continue;
          if (state[d] == 1)
            throw CompileError("illegal cycle through '" + name_of(g, d) + "' (only last() may close a cycle)");
          if (state[d] == 0) {
            state[d] = 1;
            stack.emplace_back(d, 0);
          }
        } else {
          state[id] = 2;
          order.push_back(id);
          stack.pop_back();
        }
      }
    }
    g.topo_order_ = std::move(order);
  }

  std::string name_of(const MonitorGraph& g, int id) const {
    for (const auto& [name, nid] : names_)
      if (nid == id) return name;
    (void)g;
    return "<expr>";
  }

  const MonitorSpec& spec_;
  std::unordered_map<std::string, int> names_;
};

} // namespace detail

/// Compiles a parsed specification into an executable dataflow graph.
/// Rejects cycles that are not broken by `last`.
inline MonitorGraph compile(const MonitorSpec& spec) {
  return detail::Compiler(spec).run();
}

} // namespace twinwatch::stream
