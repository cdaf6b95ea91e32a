#pragma once

// In-memory description of one experiment: grid, lens, net, background,
// coefficient slots, Cauchy data and numeric options.

#include <cmath>
#include <string>
#include <vector>

#include "genwave/errors.hpp"
#include "genwave/expr.hpp"
#include "genwave/geometry.hpp"
#include "genwave/regularization.hpp"

namespace genwave {

enum class Pipeline { Solve, Conditions, Energy, Existence, Uniqueness, All };

inline const char* pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::Solve: return "solve";
    case Pipeline::Conditions: return "conditions";
    case Pipeline::Energy: return "energy";
    case Pipeline::Existence: return "existence";
    case Pipeline::Uniqueness: return "uniqueness";
    case Pipeline::All: return "all";
  }
  return "?";
}

inline Pipeline parse_pipeline(const std::string& s) {
  for (Pipeline p : {Pipeline::Solve, Pipeline::Conditions, Pipeline::Energy, Pipeline::Existence,
                     Pipeline::Uniqueness, Pipeline::All})
    if (s == pipeline_name(p)) return p;
  throw ConfigError("unknown pipeline '" + s + "'");
}

inline Rank parse_rank(const std::string& s) {
  if (s == "scalar") return Rank::Scalar;
  if (s == "vector") return Rank::Vector;
  if (s == "covector") return Rank::Covector;
  throw ConfigError("unknown rank '" + s + "'");
}

struct NetSpec {
  double eps0 = 0.5;
  double ratio = 0.5;
  int count = 4;
  EpsilonNet build() const { return EpsilonNet::geometric(eps0, ratio, count); }
};

struct BackgroundSpec {
  std::string preset = "minkowski";
  expr::Expr phi = expr::Expr::number(0.0);

  BackgroundGeometry build() const {
    if (preset == "minkowski") return BackgroundGeometry::minkowski();
    if (preset == "conformal") {
      if (phi.depends_on_eps()) throw ConfigError("background conformal factor must not depend on eps");
      return BackgroundGeometry::conformal(phi);
    }
    throw ConfigError("unknown background preset '" + preset + "'");
  }
};

/// Negligible (exp(-1/eps)) or power-law (eps^power) scale of the uniqueness perturbation.
struct PerturbationSpec {
  std::string kind = "exp";
  double power = 1.0;

  double scale(double eps) const {
    if (kind == "exp") return std::exp(-1.0 / eps);
    if (kind == "power") return std::pow(eps, power);
    if (kind == "zero") return 0.0;
    throw ConfigError("unknown perturbation kind '" + kind + "'");
  }
};

struct Options {
  double cfl_factor = 0.5;
  int m_max = 3;
  int m_test = 5;
  double dissipation = 0.0;
  int fd_order = 2;
  int dec_samples = 10000;
  double gronwall_cprime = 1.0;
  PerturbationSpec perturbation;
};

/// Cauchy data per component, as expressions in (x, eps) on the initial slice.
struct DataSpec {
  std::vector<expr::Expr> u0;
  std::vector<expr::Expr> u1;
};

struct Scenario {
  std::string name = "scenario";
  GridSpec grid;
  Interval lens_base;
  NetSpec net;
  BackgroundSpec background;
  MetricSlots metric;
  CoefficientSlots coeffs = CoefficientSlots::zero(Rank::Scalar);
  Rank rank = Rank::Scalar;
  DataSpec data;
  Pipeline pipeline = Pipeline::All;
  Options options;

  void validate() const {
    grid.validate();
    if (coeffs.rank != rank) throw RankError("coefficient rank does not match the field rank");
    coeffs.validate();
    const std::size_t nc = rank_components(rank);
    if (data.u0.size() != nc || data.u1.size() != nc) {
      throw RankError(std::string("initial data needs ") + std::to_string(nc) + " component(s) for a " +
                      rank_name(rank) + " field");
    }
    if (!(options.cfl_factor > 0.0 && options.cfl_factor <= 1.0)) throw ConfigError("cfl_factor must lie in (0, 1]");
    if (options.m_max < 0 || options.m_max > 3) throw ConfigError("m_max must lie in 0..3");
    if (options.m_test < 1) throw ConfigError("m_test must be positive");
    if (options.fd_order != 2 && options.fd_order != 4) throw ConfigError("fd_order must be 2 or 4");
    if (options.dissipation < 0.0) throw ConfigError("dissipation must be nonnegative");
    if (options.dec_samples < 1) throw ConfigError("dec_samples must be positive");
  }
};

}  // namespace genwave
