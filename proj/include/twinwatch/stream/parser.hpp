#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "twinwatch/core/errors.hpp"
#include "twinwatch/stream/ast.hpp"

namespace twinwatch::stream {

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace detail {

enum class Tok {
  End, Ident, Int, Float, String,
  At, LParen, RParen, Comma, Colon, Eq, LBracket, RBracket,
  Plus, Minus, Star, Slash, Lt, Le, Gt, Ge, EqEq, Ne, AndAnd, OrOr, Bang,
};

struct Token {
  Tok tok;
  std::string text;
  SourcePos pos;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      SourcePos pos{line_, col_};
      if (at_end()) {
        out.push_back({Tok::End, "", pos});
        return out;
      }
      char c = peek();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::string id;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) id += get();
        out.push_back({Tok::Ident, std::move(id), pos});
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        out.push_back(lex_number(pos));
        continue;
      }
      if (c == '"') {
        out.push_back(lex_string(pos));
        continue;
      }
      get();
      switch (c) {
        case '@': out.push_back({Tok::At, "@", pos}); break;
        case '(': out.push_back({Tok::LParen, "(", pos}); break;
        case ')': out.push_back({Tok::RParen, ")", pos}); break;
        case ',': out.push_back({Tok::Comma, ",", pos}); break;
        case ':': out.push_back({Tok::Colon, ":", pos}); break;
        case '[': out.push_back({Tok::LBracket, "[", pos}); break;
        case ']': out.push_back({Tok::RBracket, "]", pos}); break;
        case '+': out.push_back({Tok::Plus, "+", pos}); break;
        case '-': out.push_back({Tok::Minus, "-", pos}); break;
        case '*': out.push_back({Tok::Star, "*", pos}); break;
        case '/': out.push_back({Tok::Slash, "/", pos}); break;
        case '=':
          if (match('=')) out.push_back({Tok::EqEq, "==", pos});
          else out.push_back({Tok::Eq, "=", pos});
          break;
        case '<':
          if (match('=')) out.push_back({Tok::Le, "<=", pos});
          else out.push_back({Tok::Lt, "<", pos});
          break;
        case '>':
          if (match('=')) out.push_back({Tok::Ge, ">=", pos});
          else out.push_back({Tok::Gt, ">", pos});
          break;
        case '!':
          if (match('=')) out.push_back({Tok::Ne, "!=", pos});
          else out.push_back({Tok::Bang, "!", pos});
          break;
        case '&':
          if (match('&')) { out.push_back({Tok::AndAnd, "&&", pos}); break; }
          throw ParseError("unexpected character '&'", pos.line, pos.column);
        case '|':
          if (match('|')) { out.push_back({Tok::OrOr, "||", pos}); break; }
          throw ParseError("unexpected character '|'", pos.line, pos.column);
        default:
          throw ParseError(std::string("unexpected character '") + c + "'", pos.line, pos.column);
      }
    }
  }

private:
  bool at_end() const { return i_ >= src_.size(); }
  char peek() const { return src_[i_]; }
  char get() {
    char c = src_[i_++];
    if (c == '\n') { ++line_; col_ = 1; } else { ++col_; }
    return c;
  }
  bool match(char c) {
    if (at_end() || peek() != c) return false;
    get();
    return true;
  }

  void skip_space_and_comments() {
    for (;;) {
      while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) get();
      // line comments: -- (TeSSLa) and #
      if (!at_end() && peek() == '#') {
        while (!at_end() && peek() != '\n') get();
        continue;
      }
      if (i_ + 1 < src_.size() && src_[i_] == '-' && src_[i_ + 1] == '-') {
        while (!at_end() && peek() != '\n') get();
        continue;
      }
      return;
    }
  }

  Token lex_number(SourcePos pos) {
    std::string text;
    bool is_float = false;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) text += get();
    if (!at_end() && peek() == '.' && i_ + 1 < src_.size() &&
        std::isdigit(static_cast<unsigned char>(src_[i_ + 1]))) {
      is_float = true;
      text += get();
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) text += get();
    }
    if (!at_end() && (peek() == 'e' || peek() == 'E')) {
      is_float = true;
      text += get();
      if (!at_end() && (peek() == '+' || peek() == '-')) text += get();
      if (at_end() || !std::isdigit(static_cast<unsigned char>(peek())))
        throw ParseError("malformed exponent in number literal", pos.line, pos.column);
      while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) text += get();
    }
    return {is_float ? Tok::Float : Tok::Int, std::move(text), pos};
  }

  Token lex_string(SourcePos pos) {
    get(); // opening quote
    std::string text;
    while (!at_end() && peek() != '"') {
      char c = get();
      if (c == '\n') throw ParseError("unterminated string literal", pos.line, pos.column);
      if (c == '\\' && !at_end()) {
        char e = get();
        switch (e) {
          case 'n': text += '\n'; break;
          case 't': text += '\t'; break;
          case '"': text += '"'; break;
          case '\\': text += '\\'; break;
          default: throw ParseError("unknown escape in string literal", pos.line, pos.column);
        }
        continue;
      }
      text += c;
    }
    if (at_end()) throw ParseError("unterminated string literal", pos.line, pos.column);
    get(); // closing quote
    return {Tok::String, std::move(text), pos};
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser with name resolution and kind inference
// ---------------------------------------------------------------------------

class Parser {
public:
  explicit Parser(std::string_view src) : tokens_(Lexer(src).run()) {}

  MonitorSpec parse() {
    MonitorSpec spec;
    std::optional<IngressAnnotation> pending_in;
    std::optional<EgressAnnotation> pending_out;
    SourcePos pending_pos;

    while (cur().tok != Tok::End) {
      if (cur().tok == Tok::At) {
        if (pending_in || pending_out)
          throw ParseError("annotation is not followed by a declaration", pending_pos.line, pending_pos.column);
        pending_pos = cur().pos;
        parse_annotation(pending_in, pending_out);
        continue;
      }
      if (cur().tok != Tok::Ident)
        throw ParseError("expected 'in', 'def' or 'out' declaration", cur().pos.line, cur().pos.column);

      if (cur().text == "in") {
        parse_input(spec, pending_in);
        pending_in.reset();
      } else if (cur().text == "def") {
        if (pending_in || pending_out)
          throw ParseError("annotations may only precede 'in' or 'out' declarations",
                           pending_pos.line, pending_pos.column);
        parse_definition(spec);
      } else if (cur().text == "out") {
        if (pending_in)
          throw ParseError("@TelegrafIn must precede an 'in' declaration", pending_pos.line, pending_pos.column);
        parse_output(spec, pending_out);
        pending_out.reset();
      } else {
        throw ParseError("expected 'in', 'def' or 'out', got '" + cur().text + "'",
                         cur().pos.line, cur().pos.column);
      }
    }
    if (pending_in || pending_out)
      throw ParseError("annotation at end of file is not attached to a declaration",
                       pending_pos.line, pending_pos.column);
    return spec;
  }

private:
  const Token& cur() const { return tokens_[i_]; }
  const Token& next() const { return tokens_[i_ + 1 < tokens_.size() ? i_ + 1 : tokens_.size() - 1]; }
  Token eat() { return tokens_[i_++]; }

  Token expect(Tok t, const char* what) {
    if (cur().tok != t)
      throw ParseError(std::string("expected ") + what + ", got '" + cur().text + "'",
                       cur().pos.line, cur().pos.column);
    return eat();
  }

  Token expect_keyword(const char* kw) {
    if (cur().tok != Tok::Ident || cur().text != kw)
      throw ParseError(std::string("expected '") + kw + "', got '" + cur().text + "'",
                       cur().pos.line, cur().pos.column);
    return eat();
  }

  void parse_annotation(std::optional<IngressAnnotation>& in_ann, std::optional<EgressAnnotation>& out_ann) {
    SourcePos pos = eat().pos; // '@'
    Token name = expect(Tok::Ident, "annotation name");
    std::vector<std::string> args;
    expect(Tok::LParen, "'('");
    if (cur().tok != Tok::RParen) {
      for (;;) {
        args.push_back(expect(Tok::String, "string literal").text);
        if (cur().tok != Tok::Comma) break;
        eat();
      }
    }
    expect(Tok::RParen, "')'");
    if (name.text == "TelegrafIn") {
      if (args.size() != 3)
        throw ParseError("@TelegrafIn expects (id, tags, field)", pos.line, pos.column);
      in_ann = IngressAnnotation{args[0], args[1], args[2]};
    } else if (name.text == "TelegrafOut") {
      if (args.size() != 1)
        throw ParseError("@TelegrafOut expects (name)", pos.line, pos.column);
      out_ann = EgressAnnotation{args[0]};
    } else {
      throw ParseError("unknown annotation '@" + name.text + "'", pos.line, pos.column);
    }
  }

  void declare(const std::string& name, ValueKind kind, SourcePos pos) {
    if (scope_.count(name))
      throw ParseError("duplicate stream name '" + name + "'", pos.line, pos.column);
    scope_.emplace(name, kind);
  }

  void parse_input(MonitorSpec& spec, const std::optional<IngressAnnotation>& ann) {
    SourcePos pos = eat().pos; // 'in'
    Token name = expect(Tok::Ident, "stream name");
    expect(Tok::Colon, "':'");
    expect_keyword("Events");
    expect(Tok::LBracket, "'['");
    Token kind_tok = expect(Tok::Ident, "element type");
    ValueKind kind;
    if (kind_tok.text == "Int") kind = ValueKind::Int;
    else if (kind_tok.text == "Float") kind = ValueKind::Float;
    else if (kind_tok.text == "Bool") kind = ValueKind::Bool;
    else throw ParseError("unknown element type '" + kind_tok.text + "'", kind_tok.pos.line, kind_tok.pos.column);
    expect(Tok::RBracket, "']'");
    declare(name.text, kind, pos);
    spec.inputs.push_back({name.text, kind, ann, pos});
  }

  void parse_definition(MonitorSpec& spec) {
    SourcePos pos = eat().pos; // 'def'
    Token name = expect(Tok::Ident, "stream name");
    expect(Tok::Eq, "'='");
    // The definition's own name is in scope inside its body so that
    // last(self, trigger) cycles can be written. The self kind is found by a
    // short fixpoint: assume Int, reparse if the body resolves differently.
    std::size_t body_start = i_;
    self_name_ = name.text;
    self_kind_ = ValueKind::Int;
    ExprPtr expr;
    for (int attempt = 0;; ++attempt) {
      i_ = body_start;
      self_used_ = false;
      expr = parse_expr();
      if (!self_used_ || expr->kind == self_kind_) break;
      if (attempt == 2)
        throw ParseError("kind mismatch: recursive definition of '" + name.text + "' does not stabilize",
                         pos.line, pos.column);
      self_kind_ = expr->kind;
    }
    self_name_.clear();
    declare(name.text, expr->kind, pos);
    spec.definitions.push_back({name.text, expr, expr->kind, pos});
  }

  void parse_output(MonitorSpec& spec, const std::optional<EgressAnnotation>& ann) {
    SourcePos pos = eat().pos; // 'out'
    Token name = expect(Tok::Ident, "stream name");
    auto it = scope_.find(name.text);
    if (it == scope_.end())
      throw ParseError("undefined identifier '" + name.text + "' in out declaration",
                       name.pos.line, name.pos.column);
    for (const auto& o : spec.outputs)
      if (o.name == name.text)
        throw ParseError("duplicate output '" + name.text + "'", pos.line, pos.column);
    spec.outputs.push_back({name.text, ann, pos});
  }

  // --- expressions ---------------------------------------------------------

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (cur().tok == Tok::OrOr) {
      SourcePos pos = eat().pos;
      lhs = make_binary(BinaryOp::Or, lhs, parse_and(), pos);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_equality();
    while (cur().tok == Tok::AndAnd) {
      SourcePos pos = eat().pos;
      lhs = make_binary(BinaryOp::And, lhs, parse_equality(), pos);
    }
    return lhs;
  }

  ExprPtr parse_equality() {
    ExprPtr lhs = parse_relational();
    while (cur().tok == Tok::EqEq || cur().tok == Tok::Ne) {
      BinaryOp op = cur().tok == Tok::EqEq ? BinaryOp::Eq : BinaryOp::Ne;
      SourcePos pos = eat().pos;
      lhs = make_binary(op, lhs, parse_relational(), pos);
    }
    return lhs;
  }

  ExprPtr parse_relational() {
    ExprPtr lhs = parse_additive();
    for (;;) {
      BinaryOp op;
      switch (cur().tok) {
        case Tok::Lt: op = BinaryOp::Lt; break;
        case Tok::Le: op = BinaryOp::Le; break;
        case Tok::Gt: op = BinaryOp::Gt; break;
        case Tok::Ge: op = BinaryOp::Ge; break;
        default: return lhs;
      }
      SourcePos pos = eat().pos;
      lhs = make_binary(op, lhs, parse_additive(), pos);
    }
  }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_multiplicative();
    while (cur().tok == Tok::Plus || cur().tok == Tok::Minus) {
      BinaryOp op = cur().tok == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
      SourcePos pos = eat().pos;
      lhs = make_binary(op, lhs, parse_multiplicative(), pos);
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr lhs = parse_unary();
    while (cur().tok == Tok::Star || cur().tok == Tok::Slash) {
      BinaryOp op = cur().tok == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
      SourcePos pos = eat().pos;
      lhs = make_binary(op, lhs, parse_unary(), pos);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (cur().tok == Tok::Minus) {
      SourcePos pos = eat().pos;
      ExprPtr e = parse_unary();
      if (e->kind == ValueKind::Bool)
        throw ParseError("kind mismatch: unary '-' needs a numeric operand", pos.line, pos.column);
      auto n = std::make_shared<Expr>();
      n->node = Expr::Node::Unary;
      n->unary_op = UnaryOp::Neg;
      n->pos = pos;
      n->kind = e->kind;
      n->args = {std::move(e)};
      return n;
    }
    if (cur().tok == Tok::Bang) {
      SourcePos pos = eat().pos;
      ExprPtr e = parse_unary();
      if (e->kind != ValueKind::Bool)
        throw ParseError("kind mismatch: '!' needs a Bool operand", pos.line, pos.column);
      auto n = std::make_shared<Expr>();
      n->node = Expr::Node::Unary;
      n->unary_op = UnaryOp::Not;
      n->pos = pos;
      n->kind = ValueKind::Bool;
      n->args = {std::move(e)};
      return n;
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token& t = cur();
    switch (t.tok) {
      case Tok::Int: {
        Token tok = eat();
        auto v = num::parse_int(tok.text);
        if (!v) throw ParseError("integer literal out of range", tok.pos.line, tok.pos.column);
        return make_literal(Value(*v), tok.pos);
      }
      case Tok::Float: {
        Token tok = eat();
        auto v = num::parse_double(tok.text);
        if (!v) throw ParseError("malformed float literal", tok.pos.line, tok.pos.column);
        return make_literal(Value(*v), tok.pos);
      }
      case Tok::LParen: {
        eat();
        ExprPtr e = parse_expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Ident: {
        if (t.text == "true" || t.text == "false") {
          Token tok = eat();
          return make_literal(Value(tok.text == "true"), tok.pos);
        }
        if (t.text == "if") return parse_if();
        if (is_builtin(t.text) && next().tok == Tok::LParen) return parse_call();
        Token tok = eat();
        return make_ident(tok);
      }
      default:
        throw ParseError("expected expression, got '" + t.text + "'", t.pos.line, t.pos.column);
    }
  }

  ExprPtr parse_if() {
    SourcePos pos = eat().pos; // 'if'
    ExprPtr c = parse_expr();
    expect_keyword("then");
    ExprPtr a = parse_expr();
    expect_keyword("else");
    ExprPtr b = parse_expr();
    if (c->kind != ValueKind::Bool)
      throw ParseError("kind mismatch: 'if' condition must be Bool", pos.line, pos.column);
    ValueKind k;
    if (a->kind == b->kind) k = a->kind;
    else if (a->kind != ValueKind::Bool && b->kind != ValueKind::Bool) k = ValueKind::Float;
    else throw ParseError("kind mismatch: 'then' and 'else' branches disagree", pos.line, pos.column);
    auto n = std::make_shared<Expr>();
    n->node = Expr::Node::If;
    n->pos = pos;
    n->kind = k;
    n->args = {std::move(c), std::move(a), std::move(b)};
    return n;
  }

  static bool is_builtin(const std::string& name) {
    return name == "abs" || name == "min" || name == "max" || name == "merge" ||
           name == "default" || name == "last";
  }

  ExprPtr parse_call() {
    Token name = eat();
    expect(Tok::LParen, "'('");
    std::vector<ExprPtr> args;
    if (cur().tok != Tok::RParen) {
      for (;;) {
        args.push_back(parse_expr());
        if (cur().tok != Tok::Comma) break;
        eat();
      }
    }
    expect(Tok::RParen, "')'");

    Builtin b;
    std::size_t arity;
    if (name.text == "abs") { b = Builtin::Abs; arity = 1; }
    else if (name.text == "min") { b = Builtin::Min; arity = 2; }
    else if (name.text == "max") { b = Builtin::Max; arity = 2; }
    else if (name.text == "merge") { b = Builtin::Merge; arity = 2; }
    else if (name.text == "default") { b = Builtin::Default; arity = 2; }
    else { b = Builtin::Last; arity = 2; }
    if (args.size() != arity)
      throw ParseError(std::string(builtin_name(b)) + " expects " + std::to_string(arity) + " argument(s), got " +
                           std::to_string(args.size()),
                       name.pos.line, name.pos.column);

    auto n = std::make_shared<Expr>();
    n->node = Expr::Node::Call;
    n->builtin = b;
    n->pos = name.pos;
    switch (b) {
      case Builtin::Abs:
        if (args[0]->kind == ValueKind::Bool)
          throw ParseError("kind mismatch: abs needs a numeric operand", name.pos.line, name.pos.column);
        n->kind = args[0]->kind;
        break;
      case Builtin::Min:
      case Builtin::Max:
        if (args[0]->kind == ValueKind::Bool || args[1]->kind == ValueKind::Bool)
          throw ParseError(std::string("kind mismatch: ") + builtin_name(b) + " needs numeric operands",
                           name.pos.line, name.pos.column);
        n->kind = (args[0]->kind == ValueKind::Int && args[1]->kind == ValueKind::Int) ? ValueKind::Int
                                                                                       : ValueKind::Float;
        break;
      case Builtin::Merge:
        if (args[0]->kind == args[1]->kind) n->kind = args[0]->kind;
        else if (args[0]->kind != ValueKind::Bool && args[1]->kind != ValueKind::Bool) n->kind = ValueKind::Float;
        else throw ParseError("kind mismatch: merge operands must have one kind", name.pos.line, name.pos.column);
        break;
      case Builtin::Default: {
        if (args[1]->node != Expr::Node::Literal && !is_negated_literal(*args[1]))
          throw ParseError("default initial value must be a literal", name.pos.line, name.pos.column);
        ValueKind sk = args[0]->kind, dk = args[1]->kind;
        if (sk == dk) n->kind = sk;
        else if (sk == ValueKind::Float && dk == ValueKind::Int) n->kind = ValueKind::Float;
        else throw ParseError("kind mismatch: default value must match the stream kind",
                              name.pos.line, name.pos.column);
        break;
      }
      case Builtin::Last:
        n->kind = args[0]->kind; // trigger kind is irrelevant
        break;
    }
    n->args = std::move(args);
    return n;
  }

  static bool is_negated_literal(const Expr& e) {
    return e.node == Expr::Node::Unary && e.unary_op == UnaryOp::Neg &&
           e.args[0]->node == Expr::Node::Literal;
  }

  ExprPtr make_literal(Value v, SourcePos pos) {
    auto n = std::make_shared<Expr>();
    n->node = Expr::Node::Literal;
    n->literal = v;
    n->kind = v.kind();
    n->pos = pos;
    return n;
  }

  ExprPtr make_ident(const Token& tok) {
    auto n = std::make_shared<Expr>();
    n->node = Expr::Node::Ident;
    n->name = tok.text;
    n->pos = tok.pos;
    auto it = scope_.find(tok.text);
    if (it != scope_.end()) {
      n->kind = it->second;
    } else if (tok.text == self_name_) {
      n->kind = self_kind_;
      self_used_ = true;
    } else {
      throw ParseError("undefined identifier '" + tok.text + "'", tok.pos.line, tok.pos.column);
    }
    return n;
  }

  ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, SourcePos pos) {
    ValueKind lk = lhs->kind, rk = rhs->kind;
    ValueKind kind = ValueKind::Bool;
    switch (op) {
      case BinaryOp::Add:
      case BinaryOp::Sub:
      case BinaryOp::Mul:
        if (lk == ValueKind::Bool || rk == ValueKind::Bool)
          throw ParseError("kind mismatch: arithmetic needs numeric operands", pos.line, pos.column);
        kind = (lk == ValueKind::Int && rk == ValueKind::Int) ? ValueKind::Int : ValueKind::Float;
        break;
      case BinaryOp::Div:
        if (lk == ValueKind::Bool || rk == ValueKind::Bool)
          throw ParseError("kind mismatch: arithmetic needs numeric operands", pos.line, pos.column);
        kind = ValueKind::Float;
        break;
      case BinaryOp::Lt:
      case BinaryOp::Le:
      case BinaryOp::Gt:
      case BinaryOp::Ge:
        if (lk == ValueKind::Bool || rk == ValueKind::Bool)
          throw ParseError("kind mismatch: comparison needs numeric operands", pos.line, pos.column);
        kind = ValueKind::Bool;
        break;
      case BinaryOp::Eq:
      case BinaryOp::Ne:
        if ((lk == ValueKind::Bool) != (rk == ValueKind::Bool))
          throw ParseError("kind mismatch: cannot compare Bool with a number", pos.line, pos.column);
        kind = ValueKind::Bool;
        break;
      case BinaryOp::And:
      case BinaryOp::Or:
        if (lk != ValueKind::Bool || rk != ValueKind::Bool)
          throw ParseError("kind mismatch: logical operator needs Bool operands", pos.line, pos.column);
        kind = ValueKind::Bool;
        break;
    }
    auto n = std::make_shared<Expr>();
    n->node = Expr::Node::Binary;
    n->binary_op = op;
    n->pos = pos;
    n->kind = kind;
    n->args = {std::move(lhs), std::move(rhs)};
    return n;
  }

  std::vector<Token> tokens_;
  std::size_t i_ = 0;
  std::unordered_map<std::string, ValueKind> scope_;
  std::string self_name_;
  ValueKind self_kind_ = ValueKind::Int;
  bool self_used_ = false;
};

} // namespace detail

/// Parses a monitor specification from DSL source. Performs name resolution
/// (inputs and prior definitions only, except self references for `last`
/// cycles), duplicate detection and kind inference.
inline MonitorSpec parse_spec(std::string_view text) {
  return detail::Parser(text).parse();
}

} // namespace twinwatch::stream
