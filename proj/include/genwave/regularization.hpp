#pragma once

// Epsilon nets, mollified rough profiles, per-eps metric and coefficient
// families, and the coefficient condition checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "genwave/errors.hpp"
#include "genwave/expr.hpp"
#include "genwave/geometry.hpp"
#include "genwave/linalg.hpp"

namespace genwave {

/// eps_j = eps0 * ratio^j, j = 0 .. count-1.
struct EpsilonNet {
  std::vector<double> eps;

  static EpsilonNet geometric(double eps0, double ratio, int count) {
    if (!(eps0 > 0.0 && eps0 <= 1.0)) throw PreconditionError("eps0 must lie in (0, 1]");
    if (!(ratio > 0.0 && ratio < 1.0)) throw PreconditionError("net ratio must lie in (0, 1)");
    if (count < 4) throw PreconditionError("an eps-net needs at least 4 members");
    EpsilonNet n;
    for (int j = 0; j < count; ++j) n.eps.push_back(eps0 * std::pow(ratio, j));
    return n;
  }

  /// Arbitrary values; used for singleton solves and tests. Must be strictly decreasing in (0, 1].
  static EpsilonNet from_values(std::vector<double> values) {
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (!(values[j] > 0.0 && values[j] <= 1.0)) throw PreconditionError("eps values must lie in (0, 1]");
      if (j > 0 && !(values[j] < values[j - 1])) throw PreconditionError("eps values must be strictly decreasing");
    }
    EpsilonNet n;
    n.eps = std::move(values);
    return n;
  }

  std::size_t size() const { return eps.size(); }
  double operator[](std::size_t j) const { return eps[j]; }
  double min() const { return eps.back(); }
  double max() const { return eps.front(); }
};

enum class ProfileKind { Smooth, LipschitzKink, Jump, Oscillatory };

inline const char* profile_name(ProfileKind k) {
  switch (k) {
    case ProfileKind::Smooth: return "smooth";
    case ProfileKind::LipschitzKink: return "lipschitz_kink";
    case ProfileKind::Jump: return "jump";
    case ProfileKind::Oscillatory: return "oscillatory";
  }
  return "?";
}

inline ProfileKind parse_profile_kind(const std::string& s) {
  if (s == "smooth") return ProfileKind::Smooth;
  if (s == "lipschitz_kink" || s == "kink") return ProfileKind::LipschitzKink;
  if (s == "jump") return ProfileKind::Jump;
  if (s == "oscillatory") return ProfileKind::Oscillatory;
  throw ConfigError("unknown profile kind '" + s + "'");
}

/// Rough coefficient shape, mollified in x before use.
///   smooth:         base + amplitude (x - location)
///   lipschitz_kink: base + amplitude |x - location|
///   jump:           base, plus amplitude for x >= location
///   oscillatory:    base + amplitude sin(frequency (x - location))
struct RoughProfile {
  ProfileKind kind = ProfileKind::Smooth;
  double base = 0.0;
  double amplitude = 1.0;
  double location = 0.0;
  double frequency = 1.0;

  double operator()(double x) const {
    const double y = x - location;
    switch (kind) {
      case ProfileKind::Smooth: return base + amplitude * y;
      case ProfileKind::LipschitzKink: return base + amplitude * std::fabs(y);
      case ProfileKind::Jump: return y < 0.0 ? base : base + amplitude;
      case ProfileKind::Oscillatory: return base + amplitude * std::sin(frequency * y);
    }
    return base;
  }
};

/// Unnormalized bump exp(-1/(1-s^2)) on (-1, 1).
inline double bump(double s) {
  const double q = 1.0 - s * s;
  return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
}

/// Midpoint rule for the normalized bump on [-1, 1]; the weights sum to one exactly in the discrete sense.
struct MollifierRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit MollifierRule(int n = 1024) {
    const double h = 2.0 / n;
    double mass = 0.0;
    for (int k = 0; k < n; ++k) {
      const double s = -1.0 + (k + 0.5) * h;
      nodes.push_back(s);
      weights.push_back(bump(s) * h);
      mass += weights.back();
    }
    for (double& w : weights) w /= mass;
  }

  static const MollifierRule& standard() {
    static const MollifierRule rule;
    return rule;
  }
};

/// Continuous normalization constant of the bump: the integral of exp(-1/(1-s^2)) over [-1, 1].
inline double bump_mass() {
  static const double mass = [] {
    const int n = 1 << 16;
    const double h = 2.0 / n;
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += bump(-1.0 + (k + 0.5) * h) * h;
    return s;
  }();
  return mass;
}

/// (f * rho_eps)(x) at one point.
template <class F>
double mollify_at(const F& f, double eps, double x, const MollifierRule& rule = MollifierRule::standard()) {
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) acc += rule.weights[k] * f(x - eps * rule.nodes[k]);
  return acc;
}

/// Samples of profile * rho_eps on the grid points.
inline std::vector<double> mollify(const RoughProfile& p, double eps, const GridSpec& grid,
                                   const MollifierRule& rule = MollifierRule::standard()) {
  if (!(eps > 0.0)) throw PreconditionError("mollification needs eps > 0");
  if (!(grid.dx() < eps / 4.0)) {
    std::ostringstream os;
    os << "grid spacing " << grid.dx() << " does not resolve the mollifier at eps=" << eps
       << " (need dx < eps/4)";
    throw ResolutionError(os.str());
  }
  std::vector<double> out(grid.nx);
  for (int i = 0; i < grid.nx; ++i) out[i] = mollify_at(p, eps, grid.x(i), rule);
  return out;
}

/// A coefficient slot of a scenario: a number, an expression in (t, x, eps), or a rough profile.
struct CoefficientSlot {
  enum class Kind { Constant, Expression, Profile };
  Kind kind = Kind::Constant;
  double value = 0.0;
  expr::Expr e = expr::Expr::number(0.0);
  RoughProfile profile;

  static CoefficientSlot constant(double v) {
    CoefficientSlot s;
    s.value = v;
    s.e = expr::Expr::number(v);
    return s;
  }
  static CoefficientSlot expression(const expr::Expr& ex) {
    if (ex.is_constant()) return constant(ex.eval({0.0, 0.0, 1.0}));
    CoefficientSlot s;
    s.kind = Kind::Expression;
    s.e = ex;
    return s;
  }
  static CoefficientSlot expression(const std::string& text) { return expression(expr::parse_expr(text)); }
  static CoefficientSlot rough(const RoughProfile& p) {
    CoefficientSlot s;
    s.kind = Kind::Profile;
    s.profile = p;
    return s;
  }

  bool zero() const { return kind == Kind::Constant && value == 0.0; }
  bool time_dependent() const { return kind == Kind::Expression && e.depends_on_t(); }
  bool eps_dependent() const { return kind == Kind::Profile || (kind == Kind::Expression && e.depends_on_eps()); }
};

/// One slot sampled for a fixed eps: x-only slots are tabulated per grid index,
/// time-dependent expressions are evaluated on demand.
class SampledSlot {
 public:
  SampledSlot() = default;
  SampledSlot(const CoefficientSlot& slot, double eps, const GridSpec& grid) : eps_(eps), grid_(grid) {
    switch (slot.kind) {
      case CoefficientSlot::Kind::Constant:
        constant_ = true;
        value_ = slot.value;
        break;
      case CoefficientSlot::Kind::Profile:
        samples_ = mollify(slot.profile, eps, grid);
        break;
      case CoefficientSlot::Kind::Expression:
        if (slot.e.depends_on_t()) {
          dynamic_ = true;
          e_ = slot.e;
        } else {
          samples_.resize(grid.nx);
          for (int i = 0; i < grid.nx; ++i) samples_[i] = slot.e.eval({0.0, grid.x(i), eps});
        }
        break;
    }
  }

  double operator()(double t, int i) const {
    if (constant_) return value_;
    if (dynamic_) return e_.eval({t, grid_.x(i), eps_});
    return samples_[i];
  }

  /// d/dt at (t, x_i); zero unless the slot depends on t.
  double dt(double t, int i) const {
    if (!dynamic_) return 0.0;
    const double h = 1e-4;
    auto f = [&](double s) { return e_.eval({s, grid_.x(i), eps_}); };
    return (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12 * h);
  }

  /// d/dx at grid index i (second-order differences, one-sided at the ends).
  double dx(double t, int i) const {
    if (constant_) return 0.0;
    const double h = grid_.dx();
    const int n = grid_.nx;
    if (i == 0) return (-3 * (*this)(t, 0) + 4 * (*this)(t, 1) - (*this)(t, 2)) / (2 * h);
    if (i == n - 1) return (3 * (*this)(t, n - 1) - 4 * (*this)(t, n - 2) + (*this)(t, n - 3)) / (2 * h);
    return ((*this)(t, i + 1) - (*this)(t, i - 1)) / (2 * h);
  }

  bool constant() const { return constant_; }
  bool zero() const { return constant_ && value_ == 0.0; }
  bool time_dependent() const { return dynamic_; }

 private:
  bool constant_ = false;
  bool dynamic_ = false;
  double value_ = 0.0;
  double eps_ = 1.0;
  GridSpec grid_;
  std::vector<double> samples_;
  expr::Expr e_ = expr::Expr::number(0.0);
};

/// Contravariant metric slots g^{00}, g^{01}, g^{11}.
struct MetricSlots {
  CoefficientSlot g00 = CoefficientSlot::constant(-1.0);
  CoefficientSlot g01 = CoefficientSlot::constant(0.0);
  CoefficientSlot g11 = CoefficientSlot::constant(1.0);

  bool time_dependent() const { return g00.time_dependent() || g01.time_dependent() || g11.time_dependent(); }
};

/// The metric g_eps for one member of the net.
class MetricMember {
 public:
  MetricMember() = default;
  MetricMember(const MetricSlots& slots, double eps, const GridSpec& grid)
      : eps_(eps), grid_(grid), g00_(slots.g00, eps, grid), g01_(slots.g01, eps, grid), g11_(slots.g11, eps, grid),
        dynamic_(slots.time_dependent()) {}

  double eps() const { return eps_; }
  const GridSpec& grid() const { return grid_; }
  bool time_dependent() const { return dynamic_; }

  /// g_eps^{ab}.
  Mat2 inverse(double t, int i) const {
    const double a01 = g01_(t, i);
    return Mat2{g00_(t, i), a01, a01, g11_(t, i)};
  }
  /// g_eps,ab.
  Mat2 metric(double t, int i) const { return inverse(t, i).inverse(); }
  /// xi^a = g^{ab} sigma_b with sigma = dt.
  Vec2 xi(double t, int i) const { return {g00_(t, i), g01_(t, i)}; }

  /// partial_c g^{ab}, indexed [c].
  std::array<Mat2, 2> inverse_gradient(double t, int i) const {
    const double dt01 = g01_.dt(t, i), dx01 = g01_.dx(t, i);
    return {Mat2{g00_.dt(t, i), dt01, dt01, g11_.dt(t, i)}, Mat2{g00_.dx(t, i), dx01, dx01, g11_.dx(t, i)}};
  }

  const SampledSlot& g00() const { return g00_; }
  const SampledSlot& g01() const { return g01_; }
  const SampledSlot& g11() const { return g11_; }

 private:
  double eps_ = 1.0;
  GridSpec grid_;
  SampledSlot g00_, g01_, g11_;
  bool dynamic_ = false;
};

struct MetricFamily {
  EpsilonNet net;
  GridSpec grid;
  std::vector<MetricMember> members;

  std::size_t size() const { return members.size(); }
  const MetricMember& operator[](std::size_t j) const { return members[j]; }
};

/// Lower-order coefficients: B[a][A][B'] at index (a*nc + A)*nc + B', C[A][B'], F[A].
/// For a vector field, A and B' are upper/lower component indices of the matrix acting on u.
struct CoefficientSlots {
  Rank rank = Rank::Scalar;
  std::vector<CoefficientSlot> B;
  std::vector<CoefficientSlot> C;
  std::vector<CoefficientSlot> F;

  static CoefficientSlots zero(Rank r) {
    CoefficientSlots s;
    s.rank = r;
    const int nc = rank_components(r);
    s.B.assign(2 * nc * nc, CoefficientSlot::constant(0.0));
    s.C.assign(nc * nc, CoefficientSlot::constant(0.0));
    s.F.assign(nc, CoefficientSlot::constant(0.0));
    return s;
  }

  void validate() const {
    const std::size_t nc = rank_components(rank);
    if (B.size() != 2 * nc * nc || C.size() != nc * nc || F.size() != nc) {
      throw RankError(std::string("coefficient shapes do not match a ") + rank_name(rank) + " field");
    }
  }
};

struct CoefficientMember {
  Rank rank = Rank::Scalar;
  std::vector<SampledSlot> B, C, F;
  bool b_zero = true, c_zero = true, f_zero = true;
};

struct CoefficientFamily {
  EpsilonNet net;
  std::vector<CoefficientMember> members;
  const CoefficientMember& operator[](std::size_t j) const { return members[j]; }
};

namespace detail {

inline std::string where(double eps, double t, double x) {
  std::ostringstream os;
  os.precision(10);
  os << "eps=" << eps << ", t=" << t << ", x=" << x;
  return os.str();
}

}  // namespace detail

/// Samples the metric for every member and verifies Lorentzian signature and
/// pointwise inversion at every grid point and slice time.
inline MetricFamily build_metric_family(const MetricSlots& slots, const EpsilonNet& net, const GridSpec& grid) {
  grid.validate();
  MetricFamily fam;
  fam.net = net;
  fam.grid = grid;
  for (double eps : net.eps) {
    MetricMember mem(slots, eps, grid);
    const int ns = mem.time_dependent() ? grid.slices() : 1;
    for (int k = 0; k < ns; ++k) {
      const double t = grid.tau(k);
      for (int i = 0; i < grid.nx; ++i) {
        const Mat2 gi = mem.inverse(t, i);
        if (!std::isfinite(gi.a00) || !std::isfinite(gi.a01) || !std::isfinite(gi.a11)) {
          throw ScenarioError("metric is not finite at " + detail::where(eps, t, grid.x(i)));
        }
        if (!(gi.det() < 0.0)) {
          throw ScenarioError("metric is not Lorentzian (det g^{-1} >= 0) at " + detail::where(eps, t, grid.x(i)));
        }
        const Mat2 g = gi.inverse();
        const Mat2 id = g * gi;
        const double scale = std::max(1.0, g.frobenius() * gi.frobenius());
        if (std::fabs(id.a00 - 1) > 1e-12 * scale || std::fabs(id.a11 - 1) > 1e-12 * scale ||
            std::fabs(id.a01) > 1e-12 * scale || std::fabs(id.a10) > 1e-12 * scale) {
          throw InversionError("metric inversion is inaccurate at " + detail::where(eps, t, grid.x(i)));
        }
      }
    }
    fam.members.push_back(std::move(mem));
  }
  return fam;
}

inline CoefficientFamily build_coefficient_family(const CoefficientSlots& slots, const EpsilonNet& net,
                                                  const GridSpec& grid) {
  slots.validate();
  CoefficientFamily fam;
  fam.net = net;
  for (double eps : net.eps) {
    CoefficientMember m;
    m.rank = slots.rank;
    for (const auto& s : slots.B) {
      m.B.emplace_back(s, eps, grid);
      m.b_zero = m.b_zero && s.zero();
    }
    for (const auto& s : slots.C) {
      m.C.emplace_back(s, eps, grid);
      m.c_zero = m.c_zero && s.zero();
    }
    for (const auto& s : slots.F) {
      m.F.emplace_back(s, eps, grid);
      m.f_zero = m.f_zero && s.zero();
    }
    fam.members.push_back(std::move(m));
  }
  return fam;
}

/// Least-squares fit of log(value) against log(eps); returns {slope, intercept, max residual in decades}.
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

inline LogLogFit fit_loglog(const std::vector<double>& eps, const std::vector<double>& values, double floor = 1e-300) {
  const std::size_t n = eps.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t j = 0; j < n; ++j) {
    lx[j] = std::log(eps[j]);
    ly[j] = std::log(std::max(values[j], floor));
  }
  double mx = 0, my = 0;
  for (std::size_t j = 0; j < n; ++j) {
    mx += lx[j];
    my += ly[j];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < n; ++j) {
    sxx += (lx[j] - mx) * (lx[j] - mx);
    sxy += (lx[j] - mx) * (ly[j] - my);
  }
  LogLogFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  for (std::size_t j = 0; j < n; ++j) {
    f.residual = std::max(f.residual, std::fabs(ly[j] - (f.intercept + f.slope * lx[j])) / std::log(10.0));
  }
  return f;
}

/// Sup over the lens per eps of one coefficient quantity, its slope and the O(1) verdict.
struct QuantityReport {
  std::string name;
  std::vector<double> sup;
  double slope = 0.0;
  double ratio = 1.0;
  bool bounded = true;
};

struct ConditionReport {
  std::vector<double> eps;
  std::vector<QuantityReport> quantities;  // inverse metric, its gradient, metric, B, C
  double M0 = 1.0;
  bool two_sided_bound = true;
  std::vector<double> det_inf;
  double det_slope = 0.0;
  int det_m_fit = 0;
  bool det_positive = true;

  const QuantityReport& quantity(const std::string& n) const {
    for (const auto& q : quantities)
      if (q.name == n) return q;
    throw PreconditionError("no quantity named " + n);
  }
  bool all_pass() const {
    bool ok = two_sided_bound && det_positive;
    for (const auto& q : quantities) ok = ok && q.bounded;
    return ok;
  }
};

inline QuantityReport summarize_quantity(std::string name, const std::vector<double>& eps, std::vector<double> sup) {
  QuantityReport q;
  q.name = std::move(name);
  q.sup = std::move(sup);
  const double top = *std::max_element(q.sup.begin(), q.sup.end());
  if (top < 1e-12) {
    q.slope = 0.0;
    q.ratio = 1.0;
    q.bounded = true;
    return q;
  }
  q.slope = fit_loglog(eps, q.sup).slope;
  // eps is decreasing, so front is eps_max and back is eps_min
  q.ratio = q.sup.front() > 0 ? q.sup.back() / q.sup.front() : std::numeric_limits<double>::infinity();
  q.bounded = q.slope >= -0.1 && q.ratio <= 3.0;
  return q;
}

/// Evaluates the uniform coefficient bounds, the two-sided bound on -g^{-1}(dt, dt)
/// and the power-law lower bound on |det g| over the lens.
inline ConditionReport check_conditions(const MetricFamily& fam, const CoefficientFamily& coeffs, const Lens& lens,
                                        const BackgroundGeometry& bg) {
  const GridSpec& grid = fam.grid;
  const std::size_t ne = fam.size();
  ConditionReport rep;
  rep.eps = fam.net.eps;
  std::vector<double> s_ginv(ne, 0), s_grad(ne, 0), s_g(ne, 0), s_b(ne, 0), s_c(ne, 0);
  rep.det_inf.assign(ne, std::numeric_limits<double>::infinity());
  double M0 = 1.0;
  bool timelike = true;

  for (std::size_t j = 0; j < ne; ++j) {
    const MetricMember& mem = fam[j];
    const CoefficientMember& cm = coeffs[j];
    for (int k = 0; k < lens.slices(); ++k) {
      const double t = grid.tau(k);
      const Window w = lens.inner(k);
      for (int i = w.lo; i <= w.hi; ++i) {
        const Mat2 gi = mem.inverse(t, i);
        const Mat2 g = gi.inverse();
        s_ginv[j] = std::max(s_ginv[j], gi.frobenius());
        s_g[j] = std::max(s_g[j], g.frobenius());
        rep.det_inf[j] = std::min(rep.det_inf[j], std::fabs(g.det()));

        const auto dgi = mem.inverse_gradient(t, i);
        const Christoffel gam = bg.flat() ? Christoffel{} : bg.christoffel(t, grid.x(i));
        double n2 = 0.0;
        for (int c = 0; c < 2; ++c)
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
              double v = dgi[c](a, b);
              for (int d = 0; d < 2; ++d) v += gam(a, c, d) * gi(d, b) + gam(b, c, d) * gi(a, d);
              n2 += v * v;
            }
        s_grad[j] = std::max(s_grad[j], std::sqrt(n2));

        const double q = -gi.a00;
        if (!(q > 0.0)) timelike = false;
        else M0 = std::max(M0, std::max(q, 1.0 / q));

        double nb = 0.0, nc = 0.0;
        for (const auto& s : cm.B) nb += s(t, i) * s(t, i);
        for (const auto& s : cm.C) nc += s(t, i) * s(t, i);
        s_b[j] = std::max(s_b[j], std::sqrt(nb));
        s_c[j] = std::max(s_c[j], std::sqrt(nc));
      }
    }
  }
  rep.quantities.push_back(summarize_quantity("inverse_metric", rep.eps, s_ginv));
  rep.quantities.push_back(summarize_quantity("inverse_metric_gradient", rep.eps, s_grad));
  rep.quantities.push_back(summarize_quantity("metric", rep.eps, s_g));
  rep.quantities.push_back(summarize_quantity("B", rep.eps, s_b));
  rep.quantities.push_back(summarize_quantity("C", rep.eps, s_c));

  rep.two_sided_bound = timelike;
  rep.M0 = timelike ? M0 : std::numeric_limits<double>::infinity();

  bool det_ok = true;
  int m_fit = 0;
  for (std::size_t j = 0; j < ne; ++j) {
    const double inf = rep.det_inf[j];
    const double eps = rep.eps[j];
    if (!(inf > 0.0) || !std::isfinite(inf)) {
      det_ok = false;
      continue;
    }
    if (eps >= 1.0) continue;  // eps^m is 1 for every m
    // smallest integer m >= 0 with inf >= eps^m
    const int m = std::max(0, static_cast<int>(std::ceil(std::log(inf) / std::log(eps) - 1e-12)));
    m_fit = std::max(m_fit, m);
  }
  rep.det_slope = det_ok ? fit_loglog(rep.eps, rep.det_inf).slope : 0.0;
  rep.det_m_fit = m_fit;
  rep.det_positive = det_ok && m_fit < 1000;
  return rep;
}

}  // namespace genwave
