#pragma once

// Moderate / negligible classification of eps-nets of numbers, and the
// existence and uniqueness experiments built on it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "genwave/energy.hpp"
#include "genwave/problem.hpp"
#include "genwave/regularization.hpp"

namespace genwave {

enum class VerdictKind { Moderate, Negligible, Neither };

inline const char* verdict_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::Moderate: return "moderate";
    case VerdictKind::Negligible: return "negligible";
    case VerdictKind::Neither: return "neither";
  }
  return "?";
}

struct AsymptoticVerdict {
  VerdictKind kind = VerdictKind::Moderate;
  int N = 0;              // certified growth order when moderate
  double slope = 0.0;     // least-squares slope of log value against log eps
  double residual = 0.0;  // max deviation from the fit, in decades
  int m_test = 5;

  bool moderate() const { return kind == VerdictKind::Moderate; }
  bool negligible() const { return kind == VerdictKind::Negligible; }
};

/// Values below this count as zero.
inline constexpr double kTiny = 1e-300;

/// Classifies a net of nonnegative numbers:
///   negligible  if every value is below 1e-300 or the slope is at least m_test,
///   neither     if the fit residual exceeds 0.5 decades,
///   moderate(N) otherwise, with N = max(0, ceil(-slope - 0.25)).
inline AsymptoticVerdict classify_net(const std::vector<double>& values, const EpsilonNet& net, int m_test = 5) {
  if (values.size() != net.size()) throw DataError("value count does not match the net size");
  std::vector<double> eps, vals;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!std::isfinite(values[j])) continue;
    if (values[j] < 0.0) throw DataError("net values must be nonnegative");
    eps.push_back(net[j]);
    vals.push_back(values[j]);
  }
  if (vals.size() < 4) throw DataError("classification needs at least 4 finite values");
  AsymptoticVerdict v;
  v.m_test = m_test;
  if (std::all_of(vals.begin(), vals.end(), [](double d) { return d < kTiny; })) {
    v.kind = VerdictKind::Negligible;
    v.slope = std::numeric_limits<double>::infinity();
    return v;
  }
  const LogLogFit f = fit_loglog(eps, vals, kTiny);
  v.slope = f.slope;
  v.residual = f.residual;
  if (f.slope >= m_test) {
    v.kind = VerdictKind::Negligible;
  } else if (f.residual > 0.5) {
    v.kind = VerdictKind::Neither;
  } else {
    v.kind = VerdictKind::Moderate;
    v.N = std::max(0, static_cast<int>(std::ceil(-f.slope - 0.25)));
  }
  return v;
}

struct NamedVerdict {
  std::string quantity;
  std::vector<double> values;
  AsymptoticVerdict verdict;
};

/// sup over the lens of |u|, |partial_t u| and |partial_x u| per member.
struct SupNorms {
  std::vector<double> eps, u, dt_u, dx_u;
};

inline SupNorms sup_norms(const std::vector<Solution>& sols, const Lens& lens, FdScheme fd = {}) {
  SupNorms s;
  const GridSpec& grid = lens.grid();
  for (const Solution& sol : sols) {
    const TensorFieldGrid dt = partial_derivative(sol.u, 0, fd);
    const TensorFieldGrid dx = partial_derivative(sol.u, 1, fd);
    double a = 0, b = 0, c = 0;
    for (int k = 0; k < grid.slices(); ++k) {
      const Window w = lens.inner(k);
      for (int i = w.lo; i <= w.hi; ++i) {
        a = std::max(a, pointwise_norm(sol.u.point(k, i), sol.u.slots(), sol.u.upper_mask()));
        b = std::max(b, pointwise_norm(dt.point(k, i), dt.slots(), dt.upper_mask()));
        c = std::max(c, pointwise_norm(dx.point(k, i), dx.slots(), dx.upper_mask()));
      }
    }
    s.eps.push_back(sol.eps);
    s.u.push_back(a);
    s.dt_u.push_back(b);
    s.dx_u.push_back(c);
  }
  return s;
}

/// sup over tau of E^m per member.
inline std::vector<double> sup_energy(const EnergyCurve& c, int m) {
  std::vector<double> out;
  for (const MemberEnergy& me : c.members) {
    double s = 0.0;
    for (int k = 0; k < me.slices(); ++k) s = std::max(s, me.E(m, k));
    out.push_back(s);
  }
  return out;
}

struct ExistenceReport {
  bool hypotheses_hold = true;  // coefficient conditions passed
  bool exists = true;           // every classified net is moderate (negligible nets included)
  int m_max = 0;
  std::vector<NamedVerdict> verdicts;
  SupNorms sups;
};

/// Classifies sup_tau E^m (m <= m_max) and the sup norms of the solution and its first derivatives.
/// A negligible net is also moderate, so only "neither" defeats existence.
inline ExistenceReport existence_pipeline(const Problem& p, const std::vector<Solution>& sols, const EnergyCurve& curve,
                                          const ConditionReport* conditions = nullptr) {
  ExistenceReport r;
  r.m_max = curve.m_max;
  r.hypotheses_hold = conditions ? conditions->all_pass() : true;
  const int mt = p.scenario.options.m_test;
  for (int m = 0; m <= curve.m_max; ++m) {
    NamedVerdict nv{"sup_E" + std::to_string(m), sup_energy(curve, m), {}};
    nv.verdict = classify_net(nv.values, p.net, mt);
    r.verdicts.push_back(nv);
  }
  r.sups = sup_norms(sols, p.lens, p.fd());
  for (auto [name, vals] : {std::pair{"sup_u", &r.sups.u}, std::pair{"sup_dt_u", &r.sups.dt_u},
                            std::pair{"sup_dx_u", &r.sups.dx_u}}) {
    NamedVerdict nv{name, *vals, {}};
    nv.verdict = classify_net(nv.values, p.net, mt);
    r.verdicts.push_back(nv);
  }
  r.exists = std::none_of(r.verdicts.begin(), r.verdicts.end(),
                          [](const NamedVerdict& v) { return v.verdict.kind == VerdictKind::Neither; });
  return r;
}

inline ExistenceReport existence_pipeline(const Scenario& sc) {
  const Problem p = prepare(sc);
  const auto sols = solve(p);
  const EnergyCurve curve = energies(p, sols, p.m_max());
  const ConditionReport cond = check_conditions(p.metric, p.coeffs, p.lens, p.bg);
  return existence_pipeline(p, sols, curve, &cond);
}

/// Fixed smooth bump centred in the lens base, half-width a quarter of the base width, peak 1.
inline double perturbation_bump(const Interval& base, double x) {
  const double c = 0.5 * (base.lo + base.hi);
  const double w = 0.25 * base.length();
  return std::exp(1.0) * bump((x - c) / w);
}

struct UniquenessReport {
  PerturbationSpec perturbation;
  std::vector<double> eps, scale;
  std::vector<NamedVerdict> verdicts;
  double linearity_error = 0.0;  // max |difference - perturbation-only solution| on the lens
  bool negligible = true;
  bool linear = true;
  bool pass = true;
};

/// Difference of two solutions on their common windows.
inline Solution difference(const Solution& a, const Solution& b) {
  Solution d = a;
  auto& du = d.u.raw();
  auto& dv = d.u.time_derivative();
  for (std::size_t q = 0; q < du.size(); ++q) {
    du[q] = a.u.raw()[q] - b.u.raw()[q];
    dv[q] = a.u.time_derivative()[q] - b.u.time_derivative()[q];
  }
  for (int k = 0; k < d.u.grid().slices(); ++k) {
    d.u.valid(k).lo = std::max(a.u.valid(k).lo, b.u.valid(k).lo);
    d.u.valid(k).hi = std::min(a.u.valid(k).hi, b.u.valid(k).hi);
  }
  return d;
}

/// Solves with data perturbed by s(eps) phi in u0 and F, and classifies the difference to the base solution.
inline UniquenessReport uniqueness_pipeline(const Problem& p, const std::vector<Solution>& base,
                                            const PerturbationSpec& pert) {
  UniquenessReport r;
  r.perturbation = pert;
  const GridSpec& g = p.grid();
  const int nc = rank_components(p.scenario.rank);
  std::vector<CauchyData> perturbed = p.data, only(p.data.size());
  for (std::size_t j = 0; j < p.net.size(); ++j) {
    const double s = pert.scale(p.net[j]);
    r.eps.push_back(p.net[j]);
    r.scale.push_back(s);
    CauchyData& d = perturbed[j];
    CauchyData& o = only[j];
    o.rank = d.rank;
    o.u0.assign(d.u0.size(), 0.0);
    o.u1.assign(d.u1.size(), 0.0);
    o.source.assign(d.u0.size(), 0.0);
    if (d.source.empty()) d.source.assign(d.u0.size(), 0.0);
    for (int i = 0; i < g.nx; ++i) {
      const double phi = s * perturbation_bump(p.scenario.lens_base, g.x(i));
      for (int c = 0; c < nc; ++c) {
        d.u0[i * nc + c] += phi;
        d.source[i * nc + c] += phi;
        o.u0[i * nc + c] = phi;
        o.source[i * nc + c] = phi;
      }
    }
  }
  const auto sols = solve_family(p.metric, p.coeffs, perturbed, p.lens, p.bg, p.cfl, p.solver);

  CoefficientSlots homogeneous = p.scenario.coeffs;
  for (auto& f : homogeneous.F) f = CoefficientSlot::constant(0.0);
  const CoefficientFamily hcoeffs = build_coefficient_family(homogeneous, p.net, g);
  const auto pert_only = solve_family(p.metric, hcoeffs, only, p.lens, p.bg, p.cfl, p.solver);

  std::vector<Solution> diffs;
  for (std::size_t j = 0; j < sols.size(); ++j) diffs.push_back(difference(sols[j], base[j]));

  for (std::size_t j = 0; j < diffs.size(); ++j)
    for (int k = 0; k < g.slices(); ++k) {
      const Window w = p.lens.inner(k);
      for (int i = w.lo; i <= w.hi; ++i)
        for (int c = 0; c < nc; ++c)
          r.linearity_error = std::max(r.linearity_error, std::fabs(diffs[j].u.at(k, i, c) - pert_only[j].u.at(k, i, c)));
    }
  r.linear = r.linearity_error <= 1e-10;

  const int mt = p.scenario.options.m_test;
  const SupNorms sn = sup_norms(diffs, p.lens, p.fd());
  NamedVerdict nv{"diff_sup_u", sn.u, {}};
  nv.verdict = classify_net(nv.values, p.net, mt);
  r.verdicts.push_back(nv);
  const EnergyCurve curve = compute_energy_curve(diffs, p.metric, nullptr, nullptr, p.lens, p.bg, p.m_max(), p.fd());
  for (int m = 0; m <= curve.m_max; ++m) {
    NamedVerdict e{"diff_sup_E" + std::to_string(m), sup_energy(curve, m), {}};
    e.verdict = classify_net(e.values, p.net, mt);
    r.verdicts.push_back(e);
  }
  r.negligible = std::all_of(r.verdicts.begin(), r.verdicts.end(),
                             [](const NamedVerdict& v) { return v.verdict.negligible(); });
  r.pass = r.negligible && r.linear;
  return r;
}

inline UniquenessReport uniqueness_pipeline(const Scenario& sc, const PerturbationSpec& pert) {
  const Problem p = prepare(sc);
  return uniqueness_pipeline(p, solve(p), pert);
}

}  // namespace genwave
