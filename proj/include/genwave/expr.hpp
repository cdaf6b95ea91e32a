#pragma once

// Coefficient expression language.
//
// Grammar (precedence from loosest to tightest):
//
//   expr    := term (('+' | '-') term)*            left-assoc
//   term    := unary (('*' | '/') unary)*          left-assoc
//   unary   := '-' unary | power
//   power   := atom ('^' unary)?                   right-assoc, binds tighter than unary '-'
//   atom    := number | 't' | 'x' | 'eps' | 'pi' | func '(' args ')' | '(' expr ')'
//   func    := sin | cos | exp | log | sqrt | abs | tanh   (one argument)
//            | min | max                                   (two arguments)
//
// So "-2^2" is -(2^2) and "2^3^2" is 2^(3^2).

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "genwave/errors.hpp"

namespace genwave::expr {

enum class Op {
  Num, VarT, VarX, VarEps,
  Neg,
  Add, Sub, Mul, Div, Pow,
  Sin, Cos, Exp, Log, Sqrt, Abs, Tanh,
  Min, Max,
};

struct Node {
  Op op = Op::Num;
  double value = 0.0;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

using NodePtr = std::shared_ptr<const Node>;

struct Bindings {
  double t = 0.0;
  double x = 0.0;
  double eps = 1.0;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset, std::vector<std::string> expected)
      : Error(what), offset_(offset), expected_(std::move(expected)) {}
  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class UnknownIdentifierError : public ParseError {
 public:
  UnknownIdentifierError(const std::string& name, std::size_t offset)
      : ParseError("unknown identifier '" + name + "' at offset " + std::to_string(offset),
                   offset, {}),
        name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class EvalError : public Error {
 public:
  EvalError(const std::string& what, std::string subexpr)
      : Error(what + " in " + subexpr), subexpr_(std::move(subexpr)) {}
  const std::string& subexpression() const noexcept { return subexpr_; }

 private:
  std::string subexpr_;
};

namespace detail {

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    case Op::Tanh: return "tanh";
    case Op::Min: return "min";
    case Op::Max: return "max";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Pow: return "^";
    default: return "?";
  }
}

inline int arity(Op op) {
  switch (op) {
    case Op::Num: case Op::VarT: case Op::VarX: case Op::VarEps: return 0;
    case Op::Neg: case Op::Sin: case Op::Cos: case Op::Exp: case Op::Log:
    case Op::Sqrt: case Op::Abs: case Op::Tanh: return 1;
    default: return 2;
  }
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void print(const Node& n, std::string& out) {
  switch (n.op) {
    case Op::Num: out += format_number(n.value); return;
    case Op::VarT: out += "t"; return;
    case Op::VarX: out += "x"; return;
    case Op::VarEps: out += "eps"; return;
    case Op::Neg:
      out += "(-";
      print(*n.lhs, out);
      out += ")";
      return;
    case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Pow:
      out += "(";
      print(*n.lhs, out);
      out += " ";
      out += op_name(n.op);
      out += " ";
      print(*n.rhs, out);
      out += ")";
      return;
    case Op::Min: case Op::Max:
      out += op_name(n.op);
      out += "(";
      print(*n.lhs, out);
      out += ", ";
      print(*n.rhs, out);
      out += ")";
      return;
    default:
      out += op_name(n.op);
      out += "(";
      print(*n.lhs, out);
      out += ")";
      return;
  }
}

inline bool equal(const Node& a, const Node& b) {
  if (a.op != b.op) return false;
  if (a.op == Op::Num) return a.value == b.value || (std::isnan(a.value) && std::isnan(b.value));
  const int k = arity(a.op);
  if (k >= 1 && !equal(*a.lhs, *b.lhs)) return false;
  if (k == 2 && !equal(*a.rhs, *b.rhs)) return false;
  return true;
}

inline bool mentions(const Node& n, Op var) {
  if (n.op == var) return true;
  const int k = arity(n.op);
  if (k >= 1 && mentions(*n.lhs, var)) return true;
  if (k == 2 && mentions(*n.rhs, var)) return true;
  return false;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  NodePtr parse() {
    skip_ws();
    if (pos_ >= s_.size()) fail("empty expression", {"number", "identifier", "(", "-"});
    NodePtr n = parse_expr(0);
    skip_ws();
    if (pos_ < s_.size()) fail("unexpected trailing input", {"+", "-", "*", "/", "^", "end of input"});
    return n;
  }

 private:
  static constexpr int kUnaryBp = 5;

  [[noreturn]] void fail(const std::string& msg, std::vector<std::string> expected) const {
    std::string what = "syntax error at offset " + std::to_string(pos_) + ": " + msg + "; expected one of {";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) what += ", ";
      what += expected[i];
    }
    what += "}";
    throw ParseError(what, pos_, std::move(expected));
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  static NodePtr make(Op op, NodePtr l = nullptr, NodePtr r = nullptr, double v = 0.0) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = v;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ == start + 1 && s_[start] == '.') {
      pos_ = start;
      fail("malformed number", {"digit"});
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        pos_ = save + 1;
        fail("malformed exponent", {"digit"});
      }
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    const std::string lit(s_.substr(start, pos_ - start));
    return make(Op::Num, nullptr, nullptr, std::strtod(lit.c_str(), nullptr));
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input", {"number", "identifier", "(", "-"});
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (c == '(') {
      ++pos_;
      NodePtr inner = parse_expr(0);
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != ')') fail("unbalanced parenthesis", {")"});
      ++pos_;
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      const std::string name(s_.substr(start, pos_ - start));
      if (name == "t") return make(Op::VarT);
      if (name == "x") return make(Op::VarX);
      if (name == "eps") return make(Op::VarEps);
      if (name == "pi") return make(Op::Num, nullptr, nullptr, M_PI);
      Op fn;
      if (name == "sin") fn = Op::Sin;
      else if (name == "cos") fn = Op::Cos;
      else if (name == "exp") fn = Op::Exp;
      else if (name == "log") fn = Op::Log;
      else if (name == "sqrt") fn = Op::Sqrt;
      else if (name == "abs") fn = Op::Abs;
      else if (name == "tanh") fn = Op::Tanh;
      else if (name == "min") fn = Op::Min;
      else if (name == "max") fn = Op::Max;
      else throw UnknownIdentifierError(name, start);
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != '(') fail("function call needs '('", {"("});
      ++pos_;
      NodePtr a = parse_expr(0);
      NodePtr b;
      skip_ws();
      if (arity(fn) == 2) {
        if (pos_ >= s_.size() || s_[pos_] != ',') fail(name + " takes two arguments", {","});
        ++pos_;
        b = parse_expr(0);
        skip_ws();
      }
      if (pos_ >= s_.size() || s_[pos_] != ')')
        fail(name + " argument list not closed", arity(fn) == 2 ? std::vector<std::string>{")"}
                                                              : std::vector<std::string>{")", "+", "-", "*", "/", "^"});
      ++pos_;
      return make(fn, std::move(a), std::move(b));
    }
    fail(std::string("unexpected character '") + c + "'", {"number", "identifier", "(", "-"});
  }

  NodePtr parse_prefix() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '-') {
      ++pos_;
      return make(Op::Neg, parse_expr(kUnaryBp));
    }
    return parse_atom();
  }

  NodePtr parse_expr(int min_bp) {
    if (++depth_ > 200) fail("expression nested too deeply", {});
    NodePtr lhs = parse_prefix();
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) break;
      Op op;
      int lbp, rbp;
      switch (s_[pos_]) {
        case '+': op = Op::Add; lbp = 1; rbp = 2; break;
        case '-': op = Op::Sub; lbp = 1; rbp = 2; break;
        case '*': op = Op::Mul; lbp = 3; rbp = 4; break;
        case '/': op = Op::Div; lbp = 3; rbp = 4; break;
        case '^': op = Op::Pow; lbp = 7; rbp = 6; break;
        case ')': case ',': --depth_; return lhs;
        default:
          fail(std::string("unexpected character '") + s_[pos_] + "'",
               {"+", "-", "*", "/", "^", ")", ",", "end of input"});
      }
      if (lbp < min_bp) break;
      ++pos_;
      NodePtr rhs = parse_expr(rbp);
      lhs = make(op, std::move(lhs), std::move(rhs));
    }
    --depth_;
    return lhs;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

struct Instr {
  Op op;
  double value;
  const Node* node;
};

inline void compile(const Node& n, std::vector<Instr>& code, int& depth, int& max_depth) {
  const int k = arity(n.op);
  if (k >= 1) compile(*n.lhs, code, depth, max_depth);
  if (k == 2) compile(*n.rhs, code, depth, max_depth);
  depth += 1 - k;
  if (depth > max_depth) max_depth = depth;
  code.push_back({n.op, n.value, &n});
}

}  // namespace detail

/// Immutable parsed expression over (t, x, eps).
class Expr {
 public:
  Expr() : Expr(number(0.0)) {}

  static Expr parse(std::string_view text) {
    Expr e;
    e.root_ = detail::Parser(text).parse();
    e.source_ = std::string(text);
    e.finish();
    return e;
  }

  static Expr number(double v) {
    Expr e(nullptr);
    auto n = std::make_shared<Node>();
    n->op = Op::Num;
    n->value = v;
    e.root_ = n;
    e.source_ = detail::format_number(v);
    e.finish();
    return e;
  }

  static Expr from_tree(NodePtr root) {
    Expr e(nullptr);
    e.root_ = std::move(root);
    e.source_ = e.to_string();
    e.finish();
    return e;
  }

  double eval(const Bindings& b) const {
    constexpr int kStack = 64;
    std::array<double, kStack> st;
    int sp = 0;
    for (const detail::Instr& in : code_) {
      switch (in.op) {
        case Op::Num: st[sp++] = in.value; break;
        case Op::VarT: st[sp++] = b.t; break;
        case Op::VarX: st[sp++] = b.x; break;
        case Op::VarEps: st[sp++] = b.eps; break;
        case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
        case Op::Add: --sp; st[sp - 1] += st[sp]; break;
        case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
        case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
        case Op::Div:
          --sp;
          if (st[sp] == 0.0) domain_error("division by zero", in);
          st[sp - 1] /= st[sp];
          break;
        case Op::Pow: {
          --sp;
          const double base = st[sp - 1], ex = st[sp];
          if (base == 0.0 && ex < 0.0) domain_error("division by zero", in);
          if (base < 0.0 && ex != std::floor(ex)) domain_error("negative base with fractional exponent", in);
          st[sp - 1] = std::pow(base, ex);
          break;
        }
        case Op::Sin: st[sp - 1] = std::sin(st[sp - 1]); break;
        case Op::Cos: st[sp - 1] = std::cos(st[sp - 1]); break;
        case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
        case Op::Log:
          if (!(st[sp - 1] > 0.0)) domain_error("log of nonpositive value", in);
          st[sp - 1] = std::log(st[sp - 1]);
          break;
        case Op::Sqrt:
          if (st[sp - 1] < 0.0) domain_error("sqrt of negative value", in);
          st[sp - 1] = std::sqrt(st[sp - 1]);
          break;
        case Op::Abs: st[sp - 1] = std::fabs(st[sp - 1]); break;
        case Op::Tanh: st[sp - 1] = std::tanh(st[sp - 1]); break;
        case Op::Min: --sp; st[sp - 1] = std::fmin(st[sp - 1], st[sp]); break;
        case Op::Max: --sp; st[sp - 1] = std::fmax(st[sp - 1], st[sp]); break;
      }
    }
    return st[0];
  }

  double operator()(double t, double x, double eps) const { return eval({t, x, eps}); }

  /// Fully parenthesised canonical form; parsing it yields an identical tree.
  std::string to_string() const {
    std::string out;
    detail::print(*root_, out);
    return out;
  }

  const std::string& source() const noexcept { return source_; }
  const Node& root() const noexcept { return *root_; }

  bool depends_on_t() const noexcept { return uses_t_; }
  bool depends_on_x() const noexcept { return uses_x_; }
  bool depends_on_eps() const noexcept { return uses_eps_; }
  bool is_constant() const noexcept { return !uses_t_ && !uses_x_ && !uses_eps_; }

  friend bool operator==(const Expr& a, const Expr& b) { return detail::equal(*a.root_, *b.root_); }

 private:
  explicit Expr(std::nullptr_t) {}

  void finish() {
    code_.clear();
    int depth = 0, max_depth = 0;
    detail::compile(*root_, code_, depth, max_depth);
    if (max_depth > 64) throw ParseError("expression needs more than 64 evaluation slots", 0, {});
    uses_t_ = detail::mentions(*root_, Op::VarT);
    uses_x_ = detail::mentions(*root_, Op::VarX);
    uses_eps_ = detail::mentions(*root_, Op::VarEps);
  }

  [[noreturn]] static void domain_error(const char* what, const detail::Instr& in) {
    std::string sub;
    detail::print(*in.node, sub);
    throw EvalError(what, sub);
  }

  NodePtr root_;
  std::string source_;
  std::vector<detail::Instr> code_;
  bool uses_t_ = false, uses_x_ = false, uses_eps_ = false;
};

/// Parses and validates an expression string.
inline Expr parse_expr(std::string_view text) { return Expr::parse(text); }

inline double eval_expr(const Expr& e, const Bindings& b) {
  if (!(b.eps > 0.0)) throw PreconditionError("eps binding must be positive");
  return e.eval(b);
}

}  // namespace genwave::expr
