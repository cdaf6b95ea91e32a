#include <catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "genwave/config.hpp"
#include "genwave/problem.hpp"

using namespace genwave;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Flat scalar scenario on [0, 2 pi] padded by `pad`; `extra` adds further top-level keys.
std::string flat_yaml(int nx, const std::string& data, const std::string& extra = "", int pad = 6) {
  const std::string p = std::to_string(pad);
  return "name: t\n"
         "grid: {extent: [-" + p + ", \"2*pi + " + p + "\"], nx: " + std::to_string(nx) + ", t0: 0, t_max: 0.5, nt: 16}\n"
         "lens: {base: [0, \"2*pi\"]}\n"
         "net: {eps0: 0.5, ratio: 0.5, count: 4}\n" + data + extra;
}

const std::string kTravelling = "data: {u0: \"sin(x)\", u1: \"cos(x)\"}\n";

Problem problem(const std::string& yaml) { return prepare(parse_config(yaml).scenario); }

double dalembert_error(int nx) {
  const Problem p = problem(flat_yaml(nx, kTravelling));
  const Solution s = solve_one(p.metric[0], p.coeffs[0], p.data[0], p.lens, p.bg, p.cfl, p.solver);
  const GridSpec& g = p.grid();
  double err = 0.0;
  for (int k = 0; k < g.slices(); ++k) {
    const Window w = p.lens.inner(k);
    for (int i = w.lo; i <= w.hi; ++i) err = std::max(err, std::fabs(s.u.at(k, i, 0) - std::sin(g.x(i) - g.tau(k))));
  }
  return err;
}

}  // namespace

// xi^t = -1, so u1 = cos x means partial_t u = -cos x and u = sin(x - t).
TEST_CASE("flat travelling wave matches d'Alembert", "[solver]") {
  const double e1 = dalembert_error(1024);
  CHECK(e1 < 1e-3);
  const double coarse = dalembert_error(513), fine = dalembert_error(1025);
  const double ratio = coarse / fine;
  INFO("errors " << coarse << " " << fine);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("initial data conversion", "[solver]") {
  const Problem p = problem(flat_yaml(257, kTravelling));
  const InitialState s = convert_initial_data(p.data[0], p.metric[0], p.bg);
  for (int i = 0; i < p.grid().nx; ++i) {
    CHECK(s.u[i] == p.data[0].u0[i]);
    CHECK(s.v[i] == -p.data[0].u1[i]);
  }

  const Problem q = problem(flat_yaml(257, kTravelling, "metric: {g00: -2}\n"));
  const InitialState r = convert_initial_data(q.data[0], q.metric[0], q.bg);
  for (int i = 0; i < q.grid().nx; ++i) CHECK_THAT(r.v[i], WithinAbs(-q.data[0].u1[i] / 2.0, 1e-14));
}

TEST_CASE("tilted normal uses the spatial derivative", "[solver]") {
  const Problem p = problem(flat_yaml(2049, kTravelling, "metric: {g00: -1, g01: 0.25, g11: 1}\n"));
  const InitialState s = convert_initial_data(p.data[0], p.metric[0], p.bg);
  // u1 = -u_t + 0.25 u_x with u0 = sin x and u1 = cos x gives u_t = -0.75 cos x
  const GridSpec& g = p.grid();
  for (int i = 1; i + 1 < g.nx; ++i) CHECK_THAT(s.v[i], WithinAbs(-0.75 * std::cos(g.x(i)), 1e-5));
}

TEST_CASE("CFL step from the characteristic speed", "[solver]") {
  const Problem flat = problem(flat_yaml(1024, kTravelling));
  CHECK(flat.cfl.c_grid == 1.0);
  CHECK(flat.cfl.dt_max == 0.5 * flat.grid().dx());
  CHECK(flat.cfl.dt <= flat.cfl.dt_max);
  CHECK_THAT(flat.cfl.dt * flat.cfl.substeps, WithinRel(flat.grid().dtau(), 1e-14));

  const Problem fast = problem(flat_yaml(1024, kTravelling, "metric: {g11: 4}\n", 12));
  CHECK(fast.cfl.c_grid == 2.0);
  CHECK(fast.cfl.dt_max == 0.25 * fast.grid().dx());

  CHECK_THROWS_AS(characteristic_speed(Mat2{1.0, 0.0, 0.0, 1.0}), HyperbolicityError);
  CHECK_THAT(characteristic_speed(Mat2{-1.0, 0.5, 0.5, 1.0}), WithinRel(0.5 + std::sqrt(1.25), 1e-15));
}

TEST_CASE("constant source gives u = -t^2", "[solver]") {
  const Problem p = problem(flat_yaml(512, "data: {u0: 0, u1: 0}\n", "coefficients: {F: 2}\n"));
  const Solution s = solve_one(p.metric[0], p.coeffs[0], p.data[0], p.lens, p.bg, p.cfl, p.solver);
  for (int k = 0; k < p.grid().slices(); ++k) {
    const double t = p.grid().tau(k);
    const Window w = p.lens.inner(k);
    for (int i = w.lo; i <= w.hi; ++i) {
      CHECK_THAT(s.u.at(k, i, 0), WithinAbs(-t * t, 1e-12));
      CHECK_THAT(s.u.time_derivative_at(k, i, 0), WithinAbs(-2 * t, 1e-12));
    }
  }
}

TEST_CASE("zero-order term with constant data gives cosh t", "[solver]") {
  const Problem p = problem(flat_yaml(512, "data: {u0: 1, u1: 0}\n", "coefficients: {C: 1}\n"));
  const Solution s = solve_one(p.metric[0], p.coeffs[0], p.data[0], p.lens, p.bg, p.cfl, p.solver);
  for (int k = 0; k < p.grid().slices(); ++k) {
    const Window w = p.lens.inner(k);
    for (int i = w.lo; i <= w.hi; i += 16) CHECK_THAT(s.u.at(k, i, 0), WithinAbs(std::cosh(p.grid().tau(k)), 1e-9));
  }
}

TEST_CASE("solution map is linear in the data", "[solver][property]") {
  const std::string extra = "metric: {g11: \"1 + 0.3*sin(x)\"}\ncoefficients: {B: [0.1, 0.2], C: -0.5}\n";
  const Problem a = problem(flat_yaml(512, "data: {u0: \"sin(x)\", u1: \"cos(2*x)\"}\n", extra, 8));
  const Problem b = problem(flat_yaml(512, "data: {u0: \"exp(-x^2)\", u1: \"x/(1 + x^2)\"}\n", extra, 8));
  const Problem c = problem(flat_yaml(512, "data: {u0: \"sin(x) + 2*exp(-x^2)\", u1: \"cos(2*x) + 2*x/(1 + x^2)\"}\n", extra, 8));
  const Solution sa = solve_one(a.metric[1], a.coeffs[1], a.data[1], a.lens, a.bg, a.cfl, a.solver);
  const Solution sb = solve_one(b.metric[1], b.coeffs[1], b.data[1], b.lens, b.bg, b.cfl, b.solver);
  const Solution sc = solve_one(c.metric[1], c.coeffs[1], c.data[1], c.lens, c.bg, c.cfl, c.solver);
  for (int k = 0; k < a.grid().slices(); ++k) {
    const Window w = a.lens.inner(k);
    for (int i = w.lo; i <= w.hi; ++i)
      CHECK_THAT(sc.u.at(k, i, 0), WithinAbs(sa.u.at(k, i, 0) + 2 * sb.u.at(k, i, 0), 1e-10));
  }
}

TEST_CASE("first slice equals the data", "[solver]") {
  const Problem p = problem(flat_yaml(512, kTravelling, "metric: {g00: -2}\n"));
  const InitialState init = convert_initial_data(p.data[0], p.metric[0], p.bg);
  const Solution s = solve_one(p.metric[0], p.coeffs[0], init, p.data[0], p.lens, p.bg, p.cfl, p.solver);
  for (int i = 0; i < p.grid().nx; ++i) {
    CHECK(s.u.at(0, i, 0) == p.data[0].u0[i]);
    CHECK(s.u.time_derivative_at(0, i, 0) == init.v[i]);
  }
}

TEST_CASE("family solves are deterministic and match single solves", "[solver][property]") {
  const Problem p = problem(flat_yaml(512, kTravelling, "metric: {g11: \"1 + eps*sin(x/eps)\"}\n", 8));
  const auto f1 = solve(p);
  const auto f2 = solve(p);
  REQUIRE(f1.size() == 4);
  for (std::size_t j = 0; j < f1.size(); ++j) {
    CHECK(f1[j].u.raw() == f2[j].u.raw());
    CHECK(f1[j].eps == p.net[j]);
    const Solution one = solve_one(p.metric[j], p.coeffs[j], p.data[j], p.lens, p.bg, p.cfl, p.solver);
    CHECK(one.u.raw() == f1[j].u.raw());
  }
}

TEST_CASE("vector fields on a flat background decouple", "[solver]") {
  const Problem p = problem(flat_yaml(1024, "data: {u0: [\"sin(x)\", \"2*sin(x)\"], u1: [\"cos(x)\", \"2*cos(x)\"]}\n",
                                      "rank: vector\n"));
  const Solution s = solve_one(p.metric[0], p.coeffs[0], p.data[0], p.lens, p.bg, p.cfl, p.solver);
  const GridSpec& g = p.grid();
  const int k = g.nt;
  const Window w = p.lens.inner(k);
  for (int i = w.lo; i <= w.hi; ++i) {
    const double exact = std::sin(g.x(i) - g.tau(k));
    CHECK_THAT(s.u.at(k, i, 0), WithinAbs(exact, 1e-3));
    CHECK_THAT(s.u.at(k, i, 1), WithinAbs(2 * exact, 2e-3));
  }
}

TEST_CASE("too narrow an extent is a domain error", "[solver]") {
  const std::string yaml =
      "grid: {extent: [-1, \"2*pi + 1\"], nx: 512, t0: 0, t_max: 0.5, nt: 16}\n"
      "lens: {base: [0, \"2*pi\"]}\n" + kTravelling;
  CHECK_THROWS_AS(problem(yaml), DomainError);
}
