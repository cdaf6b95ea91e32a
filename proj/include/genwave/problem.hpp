#pragma once

// A scenario resolved into solver inputs: families, CFL step, lens and sampled data.

#include <algorithm>
#include <vector>

#include "genwave/energy.hpp"
#include "genwave/regularization.hpp"
#include "genwave/scenario.hpp"
#include "genwave/solver.hpp"

namespace genwave {

struct Problem {
  Scenario scenario;
  EpsilonNet net;
  BackgroundGeometry bg;
  MetricFamily metric;
  CoefficientFamily coeffs;
  CflInfo cfl;
  Lens lens;
  SolverOptions solver;
  std::vector<CauchyData> data;  // one per member

  const GridSpec& grid() const { return lens.grid(); }
  FdScheme fd() const { return solver.fd; }
  int m_max() const { return scenario.options.m_max; }
};

/// Derivative orders the pipelines take of a solution beyond the energies themselves.
inline int required_margin_orders(const Options& o) { return std::max(o.m_max, 2); }

/// Builds families, the CFL step, the lens and the Cauchy data. `grid` replaces the scenario grid when given.
inline Problem prepare(const Scenario& sc, const GridSpec* grid = nullptr) {
  sc.validate();
  Problem p;
  p.scenario = sc;
  if (grid) p.scenario.grid = *grid;
  const GridSpec& g = p.scenario.grid;
  g.validate();
  p.net = sc.net.build();
  p.bg = sc.background.build();
  p.bg.validate_on(g);
  p.metric = build_metric_family(sc.metric, p.net, g);
  p.coeffs = build_coefficient_family(sc.coeffs, p.net, g);
  p.cfl = cfl_timestep(p.metric, sc.lens_base, sc.options.cfl_factor);
  p.lens = build_lens(g, p.cfl.c_lens, sc.lens_base);
  p.solver.cfl_factor = sc.options.cfl_factor;
  p.solver.dissipation = sc.options.dissipation;
  p.solver.fd.order = sc.options.fd_order;
  p.solver.margin_orders = required_margin_orders(sc.options);
  for (double eps : p.net.eps) p.data.push_back(sample_cauchy_data(sc.data, sc.rank, g, eps));
  check_extent(p.lens, p.cfl, p.solver);
  return p;
}

/// Same scenario with nx -> 2 nx - 1 and nt -> 2 nt on the same extent.
inline GridSpec refined(const GridSpec& g) {
  GridSpec r = g;
  r.nx = 2 * g.nx - 1;
  r.nt = 2 * g.nt;
  return r;
}

inline std::vector<Solution> solve(const Problem& p) {
  return solve_family(p.metric, p.coeffs, p.data, p.lens, p.bg, p.cfl, p.solver);
}

inline EnergyCurve energies(const Problem& p, const std::vector<Solution>& sols, int m_max) {
  return compute_energy_curve(sols, p.metric, &p.coeffs, &p.data, p.lens, p.bg, m_max, p.fd());
}

}  // namespace genwave
