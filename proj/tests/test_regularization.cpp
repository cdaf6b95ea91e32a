#include <catch_amalgamated.hpp>

#include <cmath>

#include "genwave/regularization.hpp"

using namespace genwave;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GridSpec make_grid(double a, double b, int nx, double gamma = 0.25, int nt = 4) {
  GridSpec g;
  g.a = a;
  g.b = b;
  g.nx = nx;
  g.t_max = gamma;
  g.nt = nt;
  return g;
}

RoughProfile profile(ProfileKind kind, double base, double amplitude, double location = 0.0) {
  RoughProfile p;
  p.kind = kind;
  p.base = base;
  p.amplitude = amplitude;
  p.location = location;
  return p;
}

MetricSlots g11_slot(const CoefficientSlot& s) {
  MetricSlots m;
  m.g11 = s;
  return m;
}

ConditionReport conditions_for(const MetricSlots& slots, const EpsilonNet& net, const GridSpec& g, Interval base) {
  const MetricFamily fam = build_metric_family(slots, net, g);
  const CoefficientFamily coeffs = build_coefficient_family(CoefficientSlots::zero(Rank::Scalar), net, g);
  const Lens lens = build_lens(g, 2.0, base);
  return check_conditions(fam, coeffs, lens, BackgroundGeometry::minkowski());
}

}  // namespace

TEST_CASE("geometric eps-nets", "[regularization]") {
  const EpsilonNet n = EpsilonNet::geometric(0.5, 0.5, 4);
  REQUIRE(n.size() == 4);
  CHECK(n[0] == 0.5);
  CHECK(n[3] == 0.0625);
  CHECK(n.max() == 0.5);
  CHECK(n.min() == 0.0625);
  CHECK_THROWS_AS(EpsilonNet::geometric(0.5, 0.5, 3), PreconditionError);
  CHECK_THROWS_AS(EpsilonNet::geometric(1.5, 0.5, 4), PreconditionError);
  CHECK_THROWS_AS(EpsilonNet::geometric(0.5, 1.0, 4), PreconditionError);
  CHECK_THROWS_AS(EpsilonNet::from_values({0.5, 0.5}), PreconditionError);
}

TEST_CASE("mollifier has unit mass and is symmetric", "[regularization]") {
  const MollifierRule& r = MollifierRule::standard();
  double mass = 0.0, first = 0.0;
  for (std::size_t k = 0; k < r.nodes.size(); ++k) {
    mass += r.weights[k];
    first += r.weights[k] * r.nodes[k];
  }
  CHECK_THAT(mass, WithinAbs(1.0, 1e-14));
  CHECK_THAT(first, WithinAbs(0.0, 1e-15));
  CHECK(r.nodes.size() >= 64);
  CHECK_THAT(bump_mass(), WithinRel(0.443993816168079, 1e-9));
}

TEST_CASE("mollifying a linear profile reproduces it", "[regularization]") {
  const GridSpec g = make_grid(-2, 2, 401);
  const auto out = mollify(profile(ProfileKind::Smooth, 0.0, 1.0), 0.1, g);
  for (int i = 0; i < g.nx; ++i) CHECK_THAT(out[i], WithinAbs(g.x(i), 1e-8));
}

TEST_CASE("mollifying a constant returns the constant", "[regularization][property]") {
  const GridSpec g = make_grid(-2, 2, 401);
  const auto out = mollify(profile(ProfileKind::Smooth, 3.7, 0.0), 0.2, g);
  for (double v : out) CHECK_THAT(v, WithinAbs(3.7, 1e-10));
}

TEST_CASE("mollified kink", "[regularization]") {
  const GridSpec g = make_grid(-1, 1, 801);
  const double eps = 0.1;
  const RoughProfile p = profile(ProfileKind::LipschitzKink, 0.0, 1.0);
  const auto out = mollify(p, eps, g);
  const MollifierRule fine(10240);
  for (int i = 0; i < g.nx; ++i) {
    const double x = g.x(i);
    if (std::fabs(x) >= eps) CHECK_THAT(out[i], WithinAbs(std::fabs(x), 1e-12));
    CHECK_THAT(out[i], WithinAbs(mollify_at(p, eps, x, fine), 1e-6));
  }
  const double at0 = out[400];
  CHECK(at0 > 0.0);
  CHECK(at0 < eps);
  // smooth: second differences stay bounded by the mollifier scale
  double d2 = 0.0;
  const double h = g.dx();
  for (int i = 1; i + 1 < g.nx; ++i) d2 = std::max(d2, std::fabs(out[i + 1] - 2 * out[i] + out[i - 1]) / (h * h));
  CHECK(d2 < 4.0 / eps);
}

TEST_CASE("mollified jump", "[regularization]") {
  const GridSpec g = make_grid(-0.5, 0.5, 1001);
  const double eps = 0.05;
  const auto out = mollify(profile(ProfileKind::Jump, 1.0, 3.0), eps, g);
  double max_slope = 0.0;
  for (int i = 0; i < g.nx; ++i) {
    CHECK(out[i] >= 1.0 - 1e-12);
    CHECK(out[i] <= 4.0 + 1e-12);
    if (i > 0) CHECK(out[i] >= out[i - 1] - 1e-12);
    // differences over ten cells average out the node spacing of the quadrature rule
    if (i >= 5 && i + 5 < g.nx) max_slope = std::max(max_slope, (out[i + 5] - out[i - 5]) / (10 * g.dx()));
    if (g.x(i) <= -eps) CHECK_THAT(out[i], WithinAbs(1.0, 1e-12));
    if (g.x(i) >= eps) CHECK_THAT(out[i], WithinAbs(4.0, 1e-12));
  }
  // the steepest slope is 3 rho(0) / eps with rho(0) = exp(-1) / mass
  const double rho0 = std::exp(-1.0) / bump_mass();
  CHECK_THAT(max_slope, WithinRel(3.0 * rho0 / eps, 0.02));
  CHECK(max_slope >= 3.0 / (2.0 * eps));
}

TEST_CASE("mollification commutes with translation on the grid", "[regularization][property]") {
  const GridSpec g = make_grid(-2, 2, 401);
  const int shift = 7;
  RoughProfile p = profile(ProfileKind::LipschitzKink, 1.0, 0.5, 0.1);
  const auto a = mollify(p, 0.15, g);
  p.location += shift * g.dx();
  const auto b = mollify(p, 0.15, g);
  for (int i = 0; i + shift < g.nx; ++i) CHECK_THAT(b[i + shift], WithinAbs(a[i], 1e-10));
}

TEST_CASE("coarse grids are a resolution error", "[regularization]") {
  const GridSpec g = make_grid(-1, 1, 41);  // dx = 0.05
  CHECK_THROWS_AS(mollify(profile(ProfileKind::Jump, 1, 3), 0.2, g), ResolutionError);
  CHECK_NOTHROW(mollify(profile(ProfileKind::Jump, 1, 3), 0.21, g));
}

TEST_CASE("kink family has xi = (-1, 0)", "[regularization]") {
  const GridSpec g = make_grid(-2, 2, 801);
  const EpsilonNet net = EpsilonNet::geometric(0.5, 0.5, 4);
  const MetricFamily fam =
      build_metric_family(g11_slot(CoefficientSlot::rough(profile(ProfileKind::LipschitzKink, 1.0, 0.5))), net, g);
  REQUIRE(fam.size() == 4);
  for (const MetricMember& m : fam.members)
    for (int i = 0; i < g.nx; i += 50) {
      const Vec2 xi = m.xi(0.0, i);
      CHECK(xi[0] == -1.0);
      CHECK(xi[1] == 0.0);
    }
}

TEST_CASE("closed-form oscillatory family", "[regularization]") {
  const GridSpec g = make_grid(-1, 1, 2001);
  const EpsilonNet net = EpsilonNet::from_values({0.5, 0.25, 0.1, 0.05});
  const MetricFamily fam = build_metric_family(g11_slot(CoefficientSlot::expression("1 + eps*sin(x/eps)")), net, g);
  // x = pi * 0.05 is not a grid point; sample the slot directly
  const SampledSlot s(CoefficientSlot::expression("1 + eps*sin(x/eps)"), 0.1, g);
  CHECK_THAT(expr::parse_expr("1 + eps*sin(x/eps)")(0, M_PI * 0.05, 0.1), WithinRel(1.1, 1e-15));
  for (std::size_t j = 0; j < fam.size(); ++j)
    for (int i = 0; i < g.nx; ++i) CHECK(fam[j].inverse(0, i).a11 <= 1.0 + net.max() + 1e-15);
  CHECK(fam[0].inverse(0, 1500).a11 != fam[3].inverse(0, 1500).a11);
  CHECK_THAT(s(0.0, 1000), WithinAbs(1.0, 1e-15));
}

TEST_CASE("metric inversion and the xi identity", "[regularization][property]") {
  const GridSpec g = make_grid(-1, 1, 401);
  MetricSlots slots;
  slots.g00 = CoefficientSlot::expression("-1 - 0.3*x^2");
  slots.g01 = CoefficientSlot::expression("0.2*sin(3*x)*eps");
  slots.g11 = CoefficientSlot::expression("1 + eps*sin(x/eps)");
  const MetricFamily fam = build_metric_family(slots, EpsilonNet::geometric(0.5, 0.5, 4), g);
  for (const MetricMember& m : fam.members)
    for (int i = 0; i < g.nx; ++i) {
      const Mat2 gi = m.inverse(0, i), gl = m.metric(0, i);
      const Mat2 id = gl * gi;
      CHECK(std::fabs(id.a00 - 1) <= 1e-12);
      CHECK(std::fabs(id.a11 - 1) <= 1e-12);
      CHECK(std::fabs(id.a01) <= 1e-12);
      CHECK(std::fabs(id.a10) <= 1e-12);
      const Vec2 xi = m.xi(0, i);
      CHECK_THAT(gl.form(xi, xi), WithinAbs(gi.a00, 1e-12));
    }
}

TEST_CASE("non-Lorentzian metric slots are a scenario error", "[regularization]") {
  const GridSpec g = make_grid(-1, 1, 41);
  MetricSlots slots;
  slots.g00 = CoefficientSlot::constant(0.0);
  CHECK_THROWS_AS(build_metric_family(slots, EpsilonNet::geometric(0.5, 0.5, 4), g), ScenarioError);
  slots.g00 = CoefficientSlot::constant(1.0);
  CHECK_THROWS_AS(build_metric_family(slots, EpsilonNet::geometric(0.5, 0.5, 4), g), ScenarioError);
}

TEST_CASE("Minkowski family passes every condition", "[regularization]") {
  const GridSpec g = make_grid(-1, 2 * M_PI + 1, 401);
  const ConditionReport r = conditions_for(MetricSlots{}, EpsilonNet::geometric(0.5, 0.5, 4), g, {0, 2 * M_PI});
  CHECK(r.all_pass());
  CHECK(r.M0 == 1.0);
  for (const auto& q : r.quantities) CHECK(q.slope == 0.0);
  CHECK(r.det_m_fit == 0);
}

TEST_CASE("eps-independent smooth family has flat slopes", "[regularization][property]") {
  const GridSpec g = make_grid(-1, 2 * M_PI + 1, 801);
  MetricSlots slots;
  slots.g00 = CoefficientSlot::expression("-1 - 0.2*cos(x)");
  slots.g11 = CoefficientSlot::expression("1.5 + 0.5*sin(x)");
  const ConditionReport r = conditions_for(slots, EpsilonNet::geometric(0.5, 0.5, 4), g, {0, 2 * M_PI});
  CHECK(r.all_pass());
  for (const auto& q : r.quantities) CHECK(std::fabs(q.slope) < 0.02);
  CHECK(r.M0 >= 1.0);
}

TEST_CASE("kink passes and jump fails the gradient bound", "[regularization]") {
  const GridSpec g = make_grid(-1, 2 * M_PI + 1, 2049);
  const Interval base{0, 2 * M_PI};
  const ConditionReport kink =
      conditions_for(g11_slot(CoefficientSlot::rough(profile(ProfileKind::LipschitzKink, 1.0, 0.5, M_PI))),
                     EpsilonNet::geometric(0.5, 0.5, 4), g, base);
  CHECK(kink.all_pass());
  CHECK(kink.quantity("inverse_metric_gradient").bounded);
  CHECK(kink.quantity("inverse_metric_gradient").sup.back() <= 0.5 + 1e-6);

  const ConditionReport jump = conditions_for(g11_slot(CoefficientSlot::rough(profile(ProfileKind::Jump, 1.0, 3.0, M_PI))),
                                              EpsilonNet::geometric(0.4, 0.7, 6), g, base);
  const QuantityReport& q = jump.quantity("inverse_metric_gradient");
  CHECK_FALSE(q.bounded);
  CHECK(q.slope <= -0.8);
  CHECK_THAT(q.slope, WithinAbs(-1.0, 0.1));
  CHECK(jump.quantity("inverse_metric").bounded);
  CHECK_FALSE(jump.all_pass());
}

TEST_CASE("log-log fits of exact power laws", "[regularization]") {
  const std::vector<double> eps = {0.5, 0.25, 0.125, 0.0625};
  std::vector<double> v;
  for (double e : eps) v.push_back(3.0 * std::pow(e, -2.0));
  const LogLogFit f = fit_loglog(eps, v);
  CHECK_THAT(f.slope, WithinAbs(-2.0, 1e-12));
  CHECK_THAT(std::exp(f.intercept), WithinRel(3.0, 1e-12));
  CHECK(f.residual < 1e-12);
}
