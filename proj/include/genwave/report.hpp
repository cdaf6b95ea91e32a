#pragma once

// CSV and JSON artifact writers. All numbers are printed with 17 significant digits.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "genwave/asymptotics.hpp"
#include "genwave/energy.hpp"
#include "genwave/regularization.hpp"

namespace genwave {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kJsonSchemaVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

using ojson = nlohmann::ordered_json;

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Finite doubles as numbers, everything else as null.
inline ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline ojson num_array(const std::vector<double>& v) {
  ojson a = ojson::array();
  for (double d : v) a.push_back(num(d));
  return a;
}

inline const char* energies_header() { return "m,tau,eps,E,sobolev_slice,sobolev_volume"; }
inline const char* sup_norms_header() { return "quantity,eps,value"; }

/// energies.csv: one row per (m, eps, tau), m outermost.
inline std::string energies_csv(const EnergyCurve* curve) {
  std::string out = std::string(energies_header()) + "\n";
  if (!curve) return out;
  for (int m = 0; m <= curve->m_max; ++m)
    for (const MemberEnergy& me : curve->members)
      for (int k = 0; k < me.slices(); ++k) {
        out += std::to_string(m) + "," + fmt17(me.tau[k]) + "," + fmt17(me.eps) + "," + fmt17(me.E(m, k)) + "," +
               fmt17(me.slice_norm(m, k)) + "," + fmt17(me.volume_norm(m, k)) + "\n";
      }
  return out;
}

/// sup_norms.csv: one row per (quantity, eps) of every classified net.
inline std::string sup_norms_csv(const std::vector<NamedVerdict>& nets, const EpsilonNet& net) {
  std::string out = std::string(sup_norms_header()) + "\n";
  for (const NamedVerdict& nv : nets)
    for (std::size_t j = 0; j < nv.values.size(); ++j)
      out += nv.quantity + "," + fmt17(net[j]) + "," + fmt17(nv.values[j]) + "\n";
  return out;
}

inline ojson conditions_json(const ConditionReport* r) {
  ojson j;
  j["schema_version"] = kJsonSchemaVersion;
  if (!r) {
    j["computed"] = false;
    return j;
  }
  j["computed"] = true;
  j["eps"] = num_array(r->eps);
  ojson qs = ojson::array();
  for (const QuantityReport& q : r->quantities) {
    qs.push_back({{"name", q.name},
                  {"sup", num_array(q.sup)},
                  {"slope", num(q.slope)},
                  {"ratio", num(q.ratio)},
                  {"bounded", q.bounded}});
  }
  j["quantities"] = qs;
  j["M0"] = num(r->M0);
  j["two_sided_bound"] = r->two_sided_bound;
  j["det_inf"] = num_array(r->det_inf);
  j["det_slope"] = num(r->det_slope);
  j["det_m_fit"] = r->det_m_fit;
  j["det_positive"] = r->det_positive;
  j["all_pass"] = r->all_pass();
  return j;
}

inline ojson verdict_json(const NamedVerdict& nv) {
  const AsymptoticVerdict& v = nv.verdict;
  ojson j;
  j["quantity"] = nv.quantity;
  j["slope"] = num(v.slope);
  j["residual"] = num(v.residual);
  j["verdict"] = verdict_name(v.kind);
  j["N"] = v.moderate() ? ojson(v.N) : ojson(nullptr);
  j["m_test"] = v.m_test;
  return j;
}

struct Check {
  std::string name;
  bool pass = true;
  ojson details = ojson::object();
};

inline ojson verdicts_json(const std::vector<NamedVerdict>& nets, const std::vector<Check>& checks) {
  ojson j;
  j["schema_version"] = kJsonSchemaVersion;
  ojson a = ojson::array();
  for (const NamedVerdict& nv : nets) a.push_back(verdict_json(nv));
  j["asymptotic"] = a;
  ojson c = ojson::array();
  bool all = true;
  for (const Check& ch : checks) {
    c.push_back({{"name", ch.name}, {"pass", ch.pass}, {"details", ch.details}});
    all = all && ch.pass;
  }
  j["checks"] = c;
  j["all_pass"] = all;
  return j;
}

}  // namespace genwave
