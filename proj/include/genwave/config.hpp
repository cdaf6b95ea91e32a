#pragma once

// Scenario files (YAML; JSON manifests are accepted too) to Scenario, and back to JSON.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>
#include <json.hpp>

#include "genwave/errors.hpp"
#include "genwave/expr.hpp"
#include "genwave/scenario.hpp"

namespace genwave {

struct LoadedConfig {
  Scenario scenario;
  std::optional<std::uint64_t> seed;  // present when loading a run manifest
};

namespace config_detail {

inline std::string at(const YAML::Node& n, const std::string& field) {
  std::ostringstream os;
  const YAML::Mark m = n.Mark();
  if (!m.is_null() && m.line >= 0) os << "line " << m.line + 1 << ": ";
  os << "field '" << field << "'";
  return os.str();
}

[[noreturn]] inline void fail(const YAML::Node& n, const std::string& field, const std::string& what) {
  throw ConfigError(at(n, field) + ": " + what);
}

inline void check_keys(const YAML::Node& n, const std::string& field, std::initializer_list<const char*> allowed) {
  if (!n.IsMap()) fail(n, field, "expected a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    if (!ok.count(key)) fail(kv.first, field.empty() ? key : field + "." + key, "unknown field");
  }
}

inline expr::Expr expression(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) fail(n, field, "expected a number or an expression string");
  const std::string text = n.as<std::string>();
  try {
    return expr::parse_expr(text);
  } catch (const expr::ParseError& e) {
    fail(n, field, std::string("cannot parse expression '") + text + "': " + e.what());
  }
}

/// A number, or a constant expression such as "2*pi".
inline double number(const YAML::Node& n, const std::string& field) {
  const expr::Expr e = expression(n, field);
  if (!e.is_constant()) fail(n, field, "expected a constant");
  return e.eval({0.0, 0.0, 1.0});
}

inline int integer(const YAML::Node& n, const std::string& field) {
  const double v = number(n, field);
  if (v != std::floor(v) || std::fabs(v) > 1e9) fail(n, field, "expected an integer");
  return static_cast<int>(v);
}

inline YAML::Node required(const YAML::Node& parent, const char* key, const std::string& field) {
  const YAML::Node n = parent[key];
  if (!n) fail(parent, field.empty() ? key : field + "." + key, "missing required field");
  return n;
}

inline Interval interval(const YAML::Node& n, const std::string& field) {
  if (!n.IsSequence() || n.size() != 2) fail(n, field, "expected [lo, hi]");
  return {number(n[0], field + "[0]"), number(n[1], field + "[1]")};
}

inline CoefficientSlot slot(const YAML::Node& n, const std::string& field) {
  if (n.IsMap()) {
    if (n["expr"]) {
      check_keys(n, field, {"expr"});
      return CoefficientSlot::expression(expression(n["expr"], field + ".expr"));
    }
    check_keys(n, field, {"profile", "base", "amplitude", "location", "frequency"});
    RoughProfile p;
    try {
      p.kind = parse_profile_kind(required(n, "profile", field).as<std::string>());
    } catch (const ConfigError& e) {
      fail(n, field + ".profile", e.what());
    }
    if (n["base"]) p.base = number(n["base"], field + ".base");
    if (n["amplitude"]) p.amplitude = number(n["amplitude"], field + ".amplitude");
    if (n["location"]) p.location = number(n["location"], field + ".location");
    if (n["frequency"]) p.frequency = number(n["frequency"], field + ".frequency");
    return CoefficientSlot::rough(p);
  }
  return CoefficientSlot::expression(expression(n, field));
}

inline void flatten(const YAML::Node& n, const std::string& field, std::vector<CoefficientSlot>& out) {
  if (n.IsSequence()) {
    for (std::size_t q = 0; q < n.size(); ++q) flatten(n[q], field + "[" + std::to_string(q) + "]", out);
  } else {
    out.push_back(slot(n, field));
  }
}

inline std::vector<CoefficientSlot> slots(const YAML::Node& n, const std::string& field, std::size_t count) {
  std::vector<CoefficientSlot> out;
  flatten(n, field, out);
  if (out.size() == 1 && count > 1 && !n.IsSequence()) out.assign(count, out[0]);
  if (out.size() != count) {
    fail(n, field, "expected " + std::to_string(count) + " component(s), got " + std::to_string(out.size()));
  }
  return out;
}

inline std::vector<expr::Expr> data_components(const YAML::Node& n, const std::string& field, std::size_t count) {
  std::vector<expr::Expr> out;
  if (n.IsSequence()) {
    for (std::size_t q = 0; q < n.size(); ++q) out.push_back(expression(n[q], field + "[" + std::to_string(q) + "]"));
  } else {
    out.push_back(expression(n, field));
  }
  if (out.size() != count) {
    fail(n, field, "expected " + std::to_string(count) + " component(s), got " + std::to_string(out.size()));
  }
  return out;
}

inline Scenario scenario(const YAML::Node& root) {
  check_keys(root, "", {"name", "grid", "lens", "net", "background", "metric", "rank", "coefficients", "data",
                        "pipeline", "options"});
  Scenario sc;
  if (root["name"]) sc.name = root["name"].as<std::string>();

  const YAML::Node grid = required(root, "grid", "");
  check_keys(grid, "grid", {"extent", "nx", "t0", "t_max", "nt"});
  const Interval ext = interval(required(grid, "extent", "grid"), "grid.extent");
  sc.grid.a = ext.lo;
  sc.grid.b = ext.hi;
  sc.grid.nx = integer(required(grid, "nx", "grid"), "grid.nx");
  sc.grid.t0 = grid["t0"] ? number(grid["t0"], "grid.t0") : 0.0;
  sc.grid.t_max = number(required(grid, "t_max", "grid"), "grid.t_max");
  sc.grid.nt = integer(required(grid, "nt", "grid"), "grid.nt");
  try {
    sc.grid.validate();
  } catch (const Error& e) {
    fail(grid, "grid", e.what());
  }

  const YAML::Node lens = required(root, "lens", "");
  check_keys(lens, "lens", {"base"});
  sc.lens_base = interval(required(lens, "base", "lens"), "lens.base");

  if (const YAML::Node net = root["net"]) {
    check_keys(net, "net", {"eps0", "ratio", "count"});
    if (net["eps0"]) sc.net.eps0 = number(net["eps0"], "net.eps0");
    if (net["ratio"]) sc.net.ratio = number(net["ratio"], "net.ratio");
    if (net["count"]) sc.net.count = integer(net["count"], "net.count");
    try {
      sc.net.build();
    } catch (const Error& e) {
      fail(net, "net", e.what());
    }
  }

  if (const YAML::Node bg = root["background"]) {
    check_keys(bg, "background", {"preset", "phi"});
    if (bg["preset"]) sc.background.preset = bg["preset"].as<std::string>();
    if (bg["phi"]) sc.background.phi = expression(bg["phi"], "background.phi");
    if (sc.background.preset != "minkowski" && sc.background.preset != "conformal") {
      fail(bg["preset"], "background.preset", "expected minkowski or conformal");
    }
    if (sc.background.phi.depends_on_eps()) fail(bg["phi"], "background.phi", "must not depend on eps");
  }

  if (const YAML::Node m = root["metric"]) {
    check_keys(m, "metric", {"g00", "g01", "g11"});
    if (m["g00"]) sc.metric.g00 = slot(m["g00"], "metric.g00");
    if (m["g01"]) sc.metric.g01 = slot(m["g01"], "metric.g01");
    if (m["g11"]) sc.metric.g11 = slot(m["g11"], "metric.g11");
  }

  if (root["rank"]) {
    try {
      sc.rank = parse_rank(root["rank"].as<std::string>());
    } catch (const ConfigError& e) {
      fail(root["rank"], "rank", e.what());
    }
  }
  const std::size_t nc = rank_components(sc.rank);
  sc.coeffs = CoefficientSlots::zero(sc.rank);
  if (const YAML::Node c = root["coefficients"]) {
    check_keys(c, "coefficients", {"B", "C", "F"});
    if (c["B"]) sc.coeffs.B = slots(c["B"], "coefficients.B", 2 * nc * nc);
    if (c["C"]) sc.coeffs.C = slots(c["C"], "coefficients.C", nc * nc);
    if (c["F"]) sc.coeffs.F = slots(c["F"], "coefficients.F", nc);
  }

  const YAML::Node data = required(root, "data", "");
  check_keys(data, "data", {"u0", "u1"});
  sc.data.u0 = data_components(required(data, "u0", "data"), "data.u0", nc);
  sc.data.u1 = data["u1"] ? data_components(data["u1"], "data.u1", nc)
                          : std::vector<expr::Expr>(nc, expr::Expr::number(0.0));

  if (root["pipeline"]) {
    try {
      sc.pipeline = parse_pipeline(root["pipeline"].as<std::string>());
    } catch (const ConfigError& e) {
      fail(root["pipeline"], "pipeline", e.what());
    }
  }

  if (const YAML::Node o = root["options"]) {
    check_keys(o, "options", {"cfl_factor", "m_max", "m_test", "dissipation", "fd_order", "dec_samples",
                              "gronwall_cprime", "perturbation"});
    Options& op = sc.options;
    if (o["cfl_factor"]) op.cfl_factor = number(o["cfl_factor"], "options.cfl_factor");
    if (o["m_max"]) op.m_max = integer(o["m_max"], "options.m_max");
    if (o["m_test"]) op.m_test = integer(o["m_test"], "options.m_test");
    if (o["dissipation"]) op.dissipation = number(o["dissipation"], "options.dissipation");
    if (o["fd_order"]) op.fd_order = integer(o["fd_order"], "options.fd_order");
    if (o["dec_samples"]) op.dec_samples = integer(o["dec_samples"], "options.dec_samples");
    if (o["gronwall_cprime"]) op.gronwall_cprime = number(o["gronwall_cprime"], "options.gronwall_cprime");
    if (const YAML::Node p = o["perturbation"]) {
      check_keys(p, "options.perturbation", {"kind", "power"});
      if (p["kind"]) op.perturbation.kind = p["kind"].as<std::string>();
      if (p["power"]) op.perturbation.power = number(p["power"], "options.perturbation.power");
      if (op.perturbation.kind != "exp" && op.perturbation.kind != "power" && op.perturbation.kind != "zero") {
        fail(p, "options.perturbation.kind", "expected exp, power or zero");
      }
    }
  }
  try {
    sc.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return sc;
}

}  // namespace config_detail

/// Parses a scenario document (YAML or JSON). A run manifest is recognised by its "scenario" key.
inline LoadedConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError("config must be a mapping");
  LoadedConfig out;
  try {
    if (root["scenario"] && root["tool"]) {
      out.scenario = config_detail::scenario(root["scenario"]);
      if (root["seed"]) out.seed = root["seed"].as<std::uint64_t>();
    } else {
      out.scenario = config_detail::scenario(root);
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  return out;
}

inline LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Scenario -> JSON (fully resolved, re-loadable)

namespace config_detail {

inline nlohmann::ordered_json slot_json(const CoefficientSlot& s) {
  switch (s.kind) {
    case CoefficientSlot::Kind::Constant: return s.value;
    case CoefficientSlot::Kind::Expression: return s.e.to_string();
    case CoefficientSlot::Kind::Profile: {
      nlohmann::ordered_json j;
      j["profile"] = profile_name(s.profile.kind);
      j["base"] = s.profile.base;
      j["amplitude"] = s.profile.amplitude;
      j["location"] = s.profile.location;
      j["frequency"] = s.profile.frequency;
      return j;
    }
  }
  return nullptr;
}

inline nlohmann::ordered_json slots_json(const std::vector<CoefficientSlot>& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& s : v) a.push_back(slot_json(s));
  return a;
}

}  // namespace config_detail

inline nlohmann::ordered_json scenario_json(const Scenario& sc) {
  using config_detail::slot_json;
  using config_detail::slots_json;
  nlohmann::ordered_json j;
  j["name"] = sc.name;
  j["grid"] = {{"extent", {sc.grid.a, sc.grid.b}},
               {"nx", sc.grid.nx},
               {"t0", sc.grid.t0},
               {"t_max", sc.grid.t_max},
               {"nt", sc.grid.nt}};
  j["lens"] = {{"base", {sc.lens_base.lo, sc.lens_base.hi}}};
  j["net"] = {{"eps0", sc.net.eps0}, {"ratio", sc.net.ratio}, {"count", sc.net.count}};
  j["background"] = {{"preset", sc.background.preset}, {"phi", sc.background.phi.to_string()}};
  j["metric"] = {{"g00", slot_json(sc.metric.g00)}, {"g01", slot_json(sc.metric.g01)}, {"g11", slot_json(sc.metric.g11)}};
  j["rank"] = rank_name(sc.rank);
  j["coefficients"] = {{"B", slots_json(sc.coeffs.B)}, {"C", slots_json(sc.coeffs.C)}, {"F", slots_json(sc.coeffs.F)}};
  nlohmann::ordered_json u0 = nlohmann::ordered_json::array(), u1 = nlohmann::ordered_json::array();
  for (const auto& e : sc.data.u0) u0.push_back(e.to_string());
  for (const auto& e : sc.data.u1) u1.push_back(e.to_string());
  j["data"] = {{"u0", u0}, {"u1", u1}};
  j["pipeline"] = pipeline_name(sc.pipeline);
  const Options& o = sc.options;
  j["options"] = {{"cfl_factor", o.cfl_factor},
                  {"m_max", o.m_max},
                  {"m_test", o.m_test},
                  {"dissipation", o.dissipation},
                  {"fd_order", o.fd_order},
                  {"dec_samples", o.dec_samples},
                  {"gronwall_cprime", o.gronwall_cprime},
                  {"perturbation", {{"kind", o.perturbation.kind}, {"power", o.perturbation.power}}}};
  return j;
}

}  // namespace genwave
