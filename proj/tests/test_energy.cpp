#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>

#include "genwave/config.hpp"
#include "genwave/problem.hpp"

using namespace genwave;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Scenario scenario(const std::string& name) { return load_config(std::string(GENWAVE_SCENARIOS) + "/" + name).scenario; }

struct Solved {
  Problem p;
  std::vector<Solution> sols;
  EnergyCurve curve;
};

const Solved& flat() {
  static const Solved s = [] {
    Solved r;
    r.p = prepare(scenario("flat_wave.yaml"));
    r.sols = solve(r.p);
    r.curve = energies(r.p, r.sols, 3);
    return r;
  }();
  return s;
}

Solved solved(const Scenario& sc, int m_max) {
  Solved r;
  r.p = prepare(sc);
  r.sols = solve(r.p);
  r.curve = energies(r.p, r.sols, m_max);
  return r;
}

const Mat2 kEta{-1.0, 0.0, 0.0, 1.0};

}  // namespace

TEST_CASE("energy tensor hand values on Minkowski", "[energy]") {
  const double one = 1.0;
  const Mat2 T0 = energy_tensor_at(&one, 0, 0, 0u, kEta, {});
  CHECK(T0.a00 == 0.5);
  CHECK(T0.a11 == -0.5);
  CHECK(T0.a01 == 0.0);

  const unsigned upper = upper_slot_mask(Rank::Scalar, 1);
  for (double phase : {0.0, 0.4, 1.3, 2.9}) {
    const double d[2] = {-std::cos(phase), std::cos(phase)};  // (v_t, v_x) of sin(x - t)
    const Mat2 T1 = energy_tensor_at(d, 1, 1, upper, kEta, {});
    const double c2 = std::cos(phase) * std::cos(phase);
    CHECK_THAT(T1.a00, WithinAbs(c2, 1e-15));
    CHECK_THAT(T1.a11, WithinAbs(c2, 1e-15));
    CHECK_THAT(T1.a01, WithinAbs(c2, 1e-15));
  }
  const double zero[2] = {0.0, 0.0};
  const Mat2 Tz = energy_tensor_at(zero, 1, 1, upper, kEta, {});
  CHECK(Tz.frobenius() == 0.0);
}

TEST_CASE("Sobolev norms of a static field", "[energy]") {
  GridSpec g;
  g.a = -1.0;
  g.b = 2 * M_PI + 1.0;
  g.nx = 2049;
  g.t_max = 0.1;
  g.nt = 2;
  const Lens lens = build_lens(g, 1.0, {0.0, 2 * M_PI});
  TensorFieldGrid f(g, Rank::Scalar, 0);
  f.enable_time_derivative();
  for (int k = 0; k < g.slices(); ++k)
    for (int i = 0; i < g.nx; ++i) f.at(k, i, 0) = std::sin(g.x(i));
  const auto bg = BackgroundGeometry::minkowski();
  CHECK_THAT(sobolev_norms(f, lens, 0, 0, bg).first, WithinRel(std::sqrt(M_PI), 1e-6));
  CHECK_THAT(sobolev_norms(f, lens, 0, 1, bg).first, WithinRel(std::sqrt(2 * M_PI), 1e-5));

  TensorFieldGrid z(g, Rank::Scalar, 0);
  z.enable_time_derivative();
  const auto nz = sobolev_norms(z, lens, 1, 2, bg);
  CHECK(nz.first == 0.0);
  CHECK(nz.second == 0.0);
}

// Order-one terms carry the O(dx^2) error of the difference stencil, about 5e-5 at nx = 1024.
TEST_CASE("flat travelling wave energies", "[energy]") {
  const Solved& s = flat();
  for (const MemberEnergy& me : s.curve.members) {
    CHECK_THAT(me.E(0, 0), WithinRel(M_PI / 2, 1e-6));
    CHECK_THAT(me.E(1, 0), WithinRel(3 * M_PI / 2, 1e-4));
    CHECK_THAT(me.slice_norm(0, 0), WithinRel(std::sqrt(M_PI), 1e-6));
    CHECK_THAT(me.slice_norm(1, 0), WithinRel(std::sqrt(3 * M_PI), 1e-4));
    for (int k = 0; k < me.slices(); ++k) {
      if (k > 0) CHECK(me.E(1, k) <= me.E(1, k - 1));
      for (int m = 1; m <= 3; ++m) CHECK(me.E(m, k) >= me.E(m - 1, k));
      CHECK(me.E(0, k) >= 0.0);
    }
  }
}

// The lens slices shrink, so E^1 is conserved once the energy leaving through the boundary is added back.
TEST_CASE("flat E^1 is conserved up to the boundary flux", "[energy]") {
  const Solved& s = flat();
  for (std::size_t e = 0; e < s.sols.size(); ++e) {
    const DivergenceReport r = divergence_balance(s.sols[e], s.p.metric[e], s.p.lens, s.p.bg, 1);
    double lost = 0.0;
    for (std::size_t k = 1; k < r.tau.size(); ++k) {
      lost += 0.5 * (r.tau[k] - r.tau[k - 1]) * (r.flux[k] + r.flux[k - 1] + r.bulk_div[k] + r.bulk_div[k - 1] +
                                                 r.bulk_fol[k] + r.bulk_fol[k - 1]);
      CHECK_THAT(r.E[k] - lost, WithinRel(r.E[0], 0.01));
    }
    CHECK(lost < 0.0);
  }
}

TEST_CASE("energies are quadratic in the field", "[energy][property]") {
  const Solved& s = flat();
  std::vector<Solution> scaled = s.sols;
  for (Solution& sol : scaled) {
    for (double& v : sol.u.raw()) v *= -3.0;
    for (double& v : sol.u.time_derivative()) v *= -3.0;
  }
  const EnergyCurve c = energies(s.p, scaled, 3);
  for (std::size_t e = 0; e < c.members.size(); ++e)
    for (int m = 0; m <= 3; ++m)
      for (int k = 0; k < c.members[e].slices(); ++k)
        CHECK_THAT(c.members[e].E(m, k), WithinRel(9.0 * s.curve.members[e].E(m, k), 1e-12));
}

TEST_CASE("energy-Sobolev equivalence on Minkowski", "[energy]") {
  const Solved& s = flat();
  const EquivalenceConstants c = equivalence_constants(s.p.metric, s.p.lens, s.p.bg);
  CHECK(c.M0 == 1.0);
  CHECK(c.A0 == 0.5);
  CHECK(c.A0p == 0.5);
  CHECK_THAT(c.B, WithinAbs(1.0, 1e-15));
  CHECK_THAT(c.Bp, WithinAbs(1.0, 1e-15));
  for (const MemberEnergy& me : s.curve.members)
    for (int k = 0; k < me.slices(); ++k) CHECK_THAT(me.E(0, k), WithinRel(0.5 * me.slice_norm2(0, k), 1e-12));
  const EquivalenceReport r = check_equivalence(s.curve, c);
  CHECK(r.pass);
  CHECK(r.violations == 0);
  CHECK(r.min_lower_ratio >= 1.0 / 1.05);
  CHECK(r.max_upper_ratio <= 1.05);
}

TEST_CASE("equivalence holds for the rough scenarios", "[energy]") {
  for (const char* name : {"kink.yaml", "oscillatory.yaml"}) {
    INFO(name);
    const Solved s = solved(scenario(name), 3);
    const EquivalenceConstants c = equivalence_constants(s.p.metric, s.p.lens, s.p.bg);
    CHECK(check_equivalence(s.curve, c).pass);
    CHECK(c.M0 >= 1.0);
    CHECK(c.Ap <= c.A);
  }
}

TEST_CASE("dominant energy condition", "[energy]") {
  const Vec2 dt{1.0, 0.0};
  double e = 0, f = 0;
  // j = 0 with |v| = 1: T(dt, dt) = 1/2 and T(dt, .) = (1/2, 0) is timelike
  CHECK(dec_holds(Mat2{0.5, 0.0, 0.0, -0.5}, kEta, dt, &e, &f));
  CHECK(e > 0.0);
  CHECK(f < 0.0);
  CHECK(dec_holds(Mat2{}, kEta, dt));
  // a negative-energy tensor fails
  CHECK_FALSE(dec_holds(Mat2{-1.0, 0.0, 0.0, 0.0}, kEta, dt));
  // a spacelike flux fails
  CHECK_FALSE(dec_holds(Mat2{0.1, 1.0, 1.0, 0.1}, kEta, dt));

  const Solved& s = flat();
  std::vector<std::vector<TensorFieldGrid>> stacks;
  for (const Solution& sol : s.sols) stacks.push_back(derivative_stack(sol.u, s.p.bg, 3));
  for (int j = 0; j <= 3; ++j) {
    const DecReport r = check_dec(stacks, s.p.metric, s.p.lens, j, 10000, 42);
    CHECK(r.pass);
    CHECK(r.samples == 10000);
    CHECK(r.failures == 0);
  }

  std::mt19937_64 rng(1);
  for (int n = 0; n < 100; ++n) {
    const Vec2 w = sample_timelike(kEta, rng);
    CHECK(kEta.form(w, w) < 0.0);
  }
  CHECK_THROWS_AS(sample_timelike(Mat2{1.0, 0.0, 0.0, 1.0}, rng), GeometryError);
}

TEST_CASE("divergence balance for the flat wave", "[energy]") {
  const Solved& s = flat();
  for (std::size_t e = 0; e < s.sols.size(); ++e) {
    const DivergenceReport r = divergence_balance(s.sols[e], s.p.metric[e], s.p.lens, s.p.bg, 1);
    CHECK(r.flux_nonpositive);
    CHECK(r.max_defect <= 1e-3 * r.scale);
    CHECK(r.C <= 0.05);
    CHECK_THAT(r.scale, WithinRel(3 * M_PI / 2, 1e-3));
  }
  Solution zero = s.sols[0];
  std::fill(zero.u.raw().begin(), zero.u.raw().end(), 0.0);
  std::fill(zero.u.time_derivative().begin(), zero.u.time_derivative().end(), 0.0);
  const DivergenceReport z = divergence_balance(zero, s.p.metric[0], s.p.lens, s.p.bg, 1);
  CHECK(z.max_defect == 0.0);
  CHECK(z.C == 0.0);
  CHECK(z.flux_nonpositive);
}

TEST_CASE("Gronwall rates", "[energy]") {
  SECTION("synthetic exponential") {
    EnergyCurve c;
    c.m_max = 1;
    for (double eps : {0.5, 0.25, 0.125, 0.0625}) {
      MemberEnergy me;
      me.eps = eps;
      me.m_max = 1;
      me.dtau = 0.05;
      me.e_term.assign(2, {});
      for (int k = 0; k <= 10; ++k) {
        me.tau.push_back(0.05 * k);
        me.e_term[0].push_back(0.0);
        me.e_term[1].push_back(std::exp(2.0 * 0.05 * k));
      }
      me.f_volume2.assign(11, 0.0);
      c.eps.push_back(eps);
      c.tau = me.tau;
      c.members.push_back(me);
    }
    const GronwallFit g = fit_gronwall(c);
    CHECK_THAT(g.c3, WithinRel(2.0, 1e-12));
    CHECK_THAT(g.variation, WithinRel(1.0, 1e-12));
    CHECK(g.holds);
    CHECK(minimal_rate(c.tau, c.members[0].curve(1), c.members[0].f_volume2, 1.0) > 1.99);
  }
  SECTION("flat conservation") {
    const GronwallFit g = fit_gronwall(flat().curve);
    CHECK(g.holds);
    CHECK(g.c3 <= 0.05);
  }
  SECTION("negative energies are a data error") {
    EnergyCurve c = flat().curve;
    c.members[0].e_term[0][2] = -1.0;
    CHECK_THROWS_AS(fit_gronwall(c), DataError);
  }
}

TEST_CASE("sup bounds from energies", "[energy]") {
  const Solved& s = flat();
  const EquivalenceConstants c = equivalence_constants(s.p.metric, s.p.lens, s.p.bg);
  const SupReport r = sup_from_energy(s.sols, s.curve, s.p.lens, s.p.bg, c, 1, 0, 1);
  CHECK(r.pass);
  CHECK(r.max_ratio < 1.0);
  CHECK_THROWS_AS(sup_from_energy(s.sols, s.curve, s.p.lens, s.p.bg, c, 0, 0, 0), PreconditionError);
  CHECK_THROWS_AS(sup_from_energy(s.sols, s.curve, s.p.lens, s.p.bg, c, 1, 2, 1), PreconditionError);

  // embedding constant: flat slices have unit weight
  const Lens& lens = s.p.lens;
  const double expect = std::sqrt(std::max(2.0 / lens.min_length(), 2.0 * lens.base().length()));
  CHECK_THAT(r.c_emb, WithinRel(expect, 1e-12));

  Scenario sc = scenario("flat_wave.yaml");
  sc.data.u0 = {expr::parse_expr("2.5")};
  sc.data.u1 = {expr::parse_expr("0")};
  const Solved k = solved(sc, 1);
  const EquivalenceConstants ck = equivalence_constants(k.p.metric, k.p.lens, k.p.bg);
  const SupReport rk = sup_from_energy(k.sols, k.curve, k.p.lens, k.p.bg, ck, 1, 0, 0);
  CHECK(rk.pass);
  CHECK(rk.max_ratio < 1.0);
  CHECK(rk.lhs.front() == 2.5);
}
