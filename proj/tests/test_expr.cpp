#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>

#include "genwave/expr.hpp"

using namespace genwave::expr;
using Catch::Matchers::WithinRel;

namespace {

struct Triple {
  const char* text;
  double t, x, eps, value;
};

// Reference values computed independently with double-precision libm.
const Triple kTable[] = {
    {"1 + 2*3", 0, 0, 1, 7},
    {"(1 + 2)*3", 0, 0, 1, 9},
    {"2^3^2", 0, 0, 1, 512},
    {"-2^2", 0, 0, 1, -4},
    {"(-2)^2", 0, 0, 1, 4},
    {"10 - 4 - 3", 0, 0, 1, 3},
    {"100/10/5", 0, 0, 1, 2.0},
    {"2*-3", 0, 0, 1, -6},
    {"--3", 0, 0, 1, 3},
    {"1 + 0.5*abs(x)", 0, -2, 1, 2.0},
    {"sin(x/eps)*eps", 0, 1.5707963267948966, 1, 1.0},
    {"sin(x)", 0, 0.5, 1, 0.479425538604203},
    {"cos(x)", 0, 0.5, 1, 0.8775825618903728},
    {"exp(x)", 0, 1.5, 1, 4.4816890703380645},
    {"log(x)", 0, 2.5, 1, 0.9162907318741551},
    {"sqrt(x)", 0, 2, 1, 1.4142135623730951},
    {"abs(x)", 0, -3.25, 1, 3.25},
    {"tanh(x)", 0, 0.3, 1, 0.2913126124515909},
    {"min(x, t)", 1.5, -0.5, 1, -0.5},
    {"max(x, t)", 1.5, -0.5, 1, 1.5},
    {"x^2 + t^2", 3, 4, 1, 25},
    {"sqrt(x^2 + t^2)", 3, 4, 1, 5.0},
    {"exp(-1/eps)", 0, 0, 0.1, 4.5399929762484854e-05},
    {"eps^3", 0, 0, 0.2, 0.008000000000000002},
    {"eps^-2", 0, 0, 0.25, 16.0},
    {"1 + eps*sin(x/eps)", 0, 0.15707963267948966, 0.1, 1.1},
    {"t*x*eps", 2, 3, 0.5, 3.0},
    {"2*pi", 0, 0, 1, 6.283185307179586},
    {"sin(pi/6)", 0, 0, 1, 0.49999999999999994},
    {"cos(2*pi*x)", 0, 0.125, 1, 0.7071067811865476},
    {"exp(log(x))", 0, 7.5, 1, 7.499999999999999},
    {"log(exp(x))", 0, -1.25, 1, -1.25},
    {"tanh(x/eps)", 0, 0.05, 0.1, 0.46211715726000974},
    {"1/(1 + x^2)", 0, 2, 1, 0.2},
    {"x - t/2", 3, 1, 1, -0.5},
    {"max(0, x - 1)^2", 0, 2.5, 1, 2.25},
    {"min(abs(x), 1)", 0, -0.25, 1, 0.25},
    {"sqrt(abs(x))*sin(t)", 1, -4, 1, 1.682941969615793},
    {"(x + t)*(x - t)", 1.5, 2.5, 1, 4.0},
    {"1e-3*x", 0, 250, 1, 0.25},
    {"2.5e2 + 1", 0, 0, 1, 251.0},
    {"x/eps/eps", 0, 1, 0.5, 4.0},
    {"exp(-x^2/eps^2)", 0, 0.3, 0.2, 0.10539922456186439},
    {"0.5*(1 + tanh(x/eps))", 0, 0.1, 0.05, 0.9820137900379085},
    {"sin(x)^2 + cos(x)^2", 0, 1.234, 1, 0.9999999999999999},
    {"1 + 0.5*abs(x - pi)", 0, 1, 1, 2.0707963267948966},
    {"t^0.5", 0, 0, 1, 0.0},
    {"-x^-1", 0, 4, 1, -0.25},
    {"cos(t - x)", 0.25, 1, 1, 0.7316888688738209},
    {"3 - -x", 0, 2, 1, 5},
};

std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 3 : 11);
  static const char* vars[] = {"t", "x", "eps"};
  static const char* unary[] = {"sin", "cos", "exp", "log", "sqrt", "abs", "tanh"};
  static const char* binary[] = {"+", "-", "*", "/", "^"};
  std::uniform_real_distribution<double> num(0.0, 100.0);
  switch (pick(rng)) {
    case 0:
    case 1: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", num(rng));
      return buf;
    }
    case 2:
    case 3: return vars[rng() % 3];
    case 4: return "-" + random_expr(rng, depth - 1);
    case 5:
    case 6: return std::string(unary[rng() % 7]) + "(" + random_expr(rng, depth - 1) + ")";
    case 7: return std::string(rng() % 2 ? "min" : "max") + "(" + random_expr(rng, depth - 1) + ", " +
                   random_expr(rng, depth - 1) + ")";
    case 8: return "(" + random_expr(rng, depth - 1) + ")";
    default:
      return random_expr(rng, depth - 1) + " " + binary[rng() % 5] + " " + random_expr(rng, depth - 1);
  }
}

}  // namespace

TEST_CASE("reference table of 50 evaluations", "[expr]") {
  int n = 0;
  for (const Triple& c : kTable) {
    INFO(c.text);
    const double v = eval_expr(parse_expr(c.text), {c.t, c.x, c.eps});
    if (c.value == 0.0)
      CHECK(std::fabs(v) <= 1e-300);
    else
      CHECK_THAT(v, WithinRel(c.value, 1e-12));
    ++n;
  }
  CHECK(n == 50);
}

TEST_CASE("tree shapes follow precedence", "[expr]") {
  const Expr a = parse_expr("1 + 0.5*abs(x)");
  REQUIRE(a.root().op == Op::Add);
  CHECK(a.root().lhs->op == Op::Num);
  CHECK(a.root().lhs->value == 1.0);
  REQUIRE(a.root().rhs->op == Op::Mul);
  CHECK(a.root().rhs->lhs->value == 0.5);
  REQUIRE(a.root().rhs->rhs->op == Op::Abs);
  CHECK(a.root().rhs->rhs->lhs->op == Op::VarX);

  const Expr b = parse_expr("sin(x/eps)*eps");
  REQUIRE(b.root().op == Op::Mul);
  REQUIRE(b.root().lhs->op == Op::Sin);
  REQUIRE(b.root().lhs->lhs->op == Op::Div);
  CHECK(b.root().lhs->lhs->lhs->op == Op::VarX);
  CHECK(b.root().lhs->lhs->rhs->op == Op::VarEps);
  CHECK(b.root().rhs->op == Op::VarEps);

  const Expr c = parse_expr("2 ^ 3 ^ 2");
  REQUIRE(c.root().op == Op::Pow);
  CHECK(c.root().lhs->op == Op::Num);
  CHECK(c.root().rhs->op == Op::Pow);
  CHECK(c(0, 0, 1) == 512.0);

  const Expr d = parse_expr("1 - 2 - 3");
  REQUIRE(d.root().op == Op::Sub);
  CHECK(d.root().lhs->op == Op::Sub);
  CHECK(d(0, 0, 1) == -4.0);

  const Expr e = parse_expr("-x^2");
  REQUIRE(e.root().op == Op::Neg);
  CHECK(e.root().lhs->op == Op::Pow);
}

TEST_CASE("documented evaluation examples", "[expr]") {
  CHECK(eval_expr(parse_expr("1 + 0.5*abs(x)"), {0, -2, 1}) == 2.0);
  CHECK_THAT(eval_expr(parse_expr("sin(x/eps)*eps"), {0, M_PI / 2, 1}), WithinRel(1.0, 1e-15));
  CHECK(eval_expr(parse_expr("2 ^ 3 ^ 2"), {}) == 512.0);
}

TEST_CASE("evaluation errors carry the subexpression", "[expr]") {
  try {
    eval_expr(parse_expr("1/x"), {0, 0, 1});
    FAIL("expected an evaluation error");
  } catch (const EvalError& e) {
    CHECK(e.subexpression() == "(1 / x)");
    CHECK(std::string(e.what()).find("division by zero") != std::string::npos);
  }
  CHECK_THROWS_AS(eval_expr(parse_expr("log(x)"), {0, 0, 1}), EvalError);
  CHECK_THROWS_AS(eval_expr(parse_expr("log(x - 1)"), {0, -1, 1}), EvalError);
  CHECK_THROWS_AS(eval_expr(parse_expr("sqrt(x)"), {0, -1e-3, 1}), EvalError);
  CHECK_THROWS_AS(eval_expr(parse_expr("x"), {0, 0, 0}), genwave::PreconditionError);
  CHECK_THROWS_AS(eval_expr(parse_expr("x"), {0, 0, -1}), genwave::PreconditionError);
}

TEST_CASE("syntax errors report offset and expected tokens", "[expr]") {
  try {
    parse_expr("1 + * 2");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
    CHECK_FALSE(e.expected().empty());
  }
  try {
    parse_expr("sin(x");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 5);
    bool has_paren = false;
    for (const auto& s : e.expected()) has_paren = has_paren || s == ")";
    CHECK(has_paren);
  }
  CHECK_THROWS_AS(parse_expr(""), ParseError);
  CHECK_THROWS_AS(parse_expr("1 2"), ParseError);
  CHECK_THROWS_AS(parse_expr("(1"), ParseError);
  CHECK_THROWS_AS(parse_expr("min(1)"), ParseError);
  CHECK_THROWS_AS(parse_expr("sin 1"), ParseError);
}

TEST_CASE("unknown identifiers are named", "[expr]") {
  try {
    parse_expr("1 + y*2");
    FAIL("expected an unknown identifier error");
  } catch (const UnknownIdentifierError& e) {
    CHECK(e.name() == "y");
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(parse_expr("foo(x)"), UnknownIdentifierError);
}

TEST_CASE("print and re-parse yields an identical tree", "[expr][property]") {
  std::mt19937_64 rng(20261015);
  for (int n = 0; n < 2000; ++n) {
    const std::string text = random_expr(rng, 5);
    INFO(text);
    const Expr a = parse_expr(text);
    const Expr b = parse_expr(a.to_string());
    CHECK(a == b);
    CHECK(b.to_string() == a.to_string());
  }
}

TEST_CASE("evaluation is total on the smooth operator subset", "[expr][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const char* texts[] = {"sin(x)*cos(t) + exp(-x*x)", "abs(x - t)*tanh(eps*x) - 3", "exp(sin(x))*cos(exp(-t))",
                         "-x*t + eps*abs(sin(x*t))"};
  for (const char* s : texts) {
    const Expr e = parse_expr(s);
    for (int n = 0; n < 200; ++n) CHECK(std::isfinite(eval_expr(e, {u(rng), u(rng), 0.5 + std::fabs(u(rng))})));
  }
}

TEST_CASE("dependency flags", "[expr]") {
  CHECK(parse_expr("2*pi").is_constant());
  CHECK(parse_expr("x").depends_on_x());
  CHECK_FALSE(parse_expr("x").depends_on_t());
  CHECK(parse_expr("sin(t)*eps").depends_on_eps());
  CHECK(Expr::number(0.25)(1, 2, 3) == 0.25);
}
