#pragma once

// Grids, the smooth background metric, tensor fields on the (t, x) grid,
// covariant derivatives, pointwise norms and the shrinking lens.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "genwave/errors.hpp"
#include "genwave/expr.hpp"
#include "genwave/linalg.hpp"

namespace genwave {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Uniform grid: nx points on [a, b] and nt + 1 slice times on [t0, t_max].
struct GridSpec {
  double a = 0.0;
  double b = 1.0;
  int nx = 8;
  double t0 = 0.0;
  double t_max = 1.0;
  int nt = 2;

  void validate() const {
    if (nx < 8) throw PreconditionError("grid needs nx >= 8, got " + std::to_string(nx));
    if (nt < 2) throw PreconditionError("grid needs nt >= 2, got " + std::to_string(nt));
    if (!(b > a)) throw PreconditionError("grid needs b > a");
    if (!(t_max > t0)) throw PreconditionError("grid needs t_max > t0");
  }

  double dx() const { return (b - a) / (nx - 1); }
  double x(int i) const { return a + i * dx(); }
  int slices() const { return nt + 1; }
  double dtau() const { return (t_max - t0) / nt; }
  double tau(int k) const { return k == nt ? t_max : t0 + k * dtau(); }
  double gamma() const { return t_max - t0; }
};

/// Inclusive index range [lo, hi]; empty when lo > hi.
struct Window {
  int lo = 0;
  int hi = -1;
  bool empty() const { return lo > hi; }
  bool contains(int i) const { return i >= lo && i <= hi; }
  bool contains(const Window& w) const { return w.empty() || (w.lo >= lo && w.hi <= hi); }
  int size() const { return empty() ? 0 : hi - lo + 1; }
};

/// Christoffel symbols Gamma^a_{bc}, stored at [a*4 + b*2 + c].
struct Christoffel {
  std::array<double, 8> v{};
  double operator()(int a, int b, int c) const { return v[a * 4 + b * 2 + c]; }
  double& at(int a, int b, int c) { return v[a * 4 + b * 2 + c]; }
  bool zero() const {
    return std::all_of(v.begin(), v.end(), [](double d) { return d == 0.0; });
  }
};

namespace detail {

inline std::string point_str(double t, double x) {
  std::ostringstream os;
  os.precision(10);
  os << "(t=" << t << ", x=" << x << ")";
  return os.str();
}

/// Fourth-order central difference of f at s with step h.
template <class F>
auto central_diff(const F& f, double s, double h) {
  return (f(s - 2 * h) - f(s - h) * 8.0 + f(s + h) * 8.0 - f(s + 2 * h)) * (1.0 / (12.0 * h));
}

}  // namespace detail

/// Smooth Lorentzian background metric g-hat with signature (-, +).
class BackgroundGeometry {
 public:
  using MetricFn = std::function<Mat2(double, double)>;

  /// Minkowski.
  BackgroundGeometry()
      : metric_([](double, double) { return Mat2::diag(-1.0, 1.0); }), flat_(true), time_dependent_(false),
        name_("minkowski") {}

  static BackgroundGeometry minkowski() { return BackgroundGeometry(); }

  /// g-hat = exp(2 phi) * eta.
  static BackgroundGeometry conformal(const expr::Expr& phi) {
    BackgroundGeometry g;
    g.metric_ = [phi](double t, double x) {
      const double f = std::exp(2.0 * phi.eval({t, x, 1.0}));
      return Mat2::diag(-f, f);
    };
    g.flat_ = false;
    g.time_dependent_ = phi.depends_on_t();
    g.name_ = "conformal(" + phi.to_string() + ")";
    return g;
  }

  static BackgroundGeometry custom(MetricFn metric, bool time_dependent, std::string name = "custom") {
    BackgroundGeometry g;
    g.metric_ = std::move(metric);
    g.flat_ = false;
    g.time_dependent_ = time_dependent;
    g.name_ = std::move(name);
    return g;
  }

  /// Covariant components g-hat_{ab}.
  Mat2 metric(double t, double x) const { return metric_(t, x); }

  Mat2 inverse_metric(double t, double x) const {
    const Mat2 g = metric_(t, x);
    const double d = g.det();
    if (!(d < 0.0)) {
      throw GeometryError("background metric is degenerate or not Lorentzian at " + detail::point_str(t, x));
    }
    return g.inverse();
  }

  /// Gamma^a_{bc} = 1/2 g^{ad} (d_b g_{dc} + d_c g_{bd} - d_d g_{bc}); symmetric in (b, c) by construction.
  Christoffel christoffel(double t, double x) const {
    Christoffel gam;
    if (flat_) return gam;
    const Mat2 ginv = inverse_metric(t, x);
    std::array<Mat2, 2> dg;  // dg[d] = partial_d g_{ab}
    dg[0] = detail::central_diff([&](double s) { return metric_(s, x); }, t, kStep);
    dg[1] = detail::central_diff([&](double s) { return metric_(t, s); }, x, kStep);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = b; c < 2; ++c) {
          double s = 0.0;
          for (int d = 0; d < 2; ++d) s += ginv(a, d) * (dg[b](d, c) + dg[c](b, d) - dg[d](b, c));
          gam.at(a, b, c) = 0.5 * s;
          gam.at(a, c, b) = 0.5 * s;
        }
    return gam;
  }

  /// partial_d Gamma^a_{bc}, indexed [d].
  std::array<Christoffel, 2> christoffel_gradient(double t, double x) const {
    std::array<Christoffel, 2> out{};
    if (flat_) return out;
    auto along = [&](int dir) {
      Christoffel r;
      auto at = [&](double s) { return dir == 0 ? christoffel(s, x) : christoffel(t, s); };
      const double c = dir == 0 ? t : x;
      const double h = kGradStep;
      const Christoffel m2 = at(c - 2 * h), m1 = at(c - h), p1 = at(c + h), p2 = at(c + 2 * h);
      for (int q = 0; q < 8; ++q) r.v[q] = (m2.v[q] - 8 * m1.v[q] + 8 * p1.v[q] - p2.v[q]) / (12 * h);
      return r;
    };
    out[0] = time_dependent_ ? along(0) : Christoffel{};
    out[1] = along(1);
    return out;
  }

  /// sqrt|det g-hat|, the density of the volume form mu-hat.
  double volume_density(double t, double x) const { return std::sqrt(std::fabs(metric_(t, x).det())); }

  /// sqrt(g-hat_{xx}), the density of the induced form mu-hat_tau on a slice t = const.
  double slice_density(double t, double x) const { return std::sqrt(metric_(t, x).a11); }

  /// Throws GeometryError at the first grid point where det g-hat >= 0.
  void validate_on(const GridSpec& grid) const {
    for (int k = 0; k < grid.slices(); ++k) {
      for (int i = 0; i < grid.nx; ++i) {
        const Mat2 g = metric_(grid.tau(k), grid.x(i));
        if (!(g.det() < 0.0) || g.a01 != g.a10) {
          throw GeometryError("background metric is not Lorentzian at " + detail::point_str(grid.tau(k), grid.x(i)));
        }
      }
      if (!time_dependent_) break;
    }
  }

  bool flat() const noexcept { return flat_; }
  bool time_dependent() const noexcept { return time_dependent_; }
  const std::string& name() const noexcept { return name_; }

 private:
  static constexpr double kStep = 1e-3;
  static constexpr double kGradStep = 2e-3;

  MetricFn metric_;
  bool flat_ = false;
  bool time_dependent_ = true;
  std::string name_;
};

/// Christoffel symbols of g-hat at grid point (slice k, index i).
inline Christoffel christoffels(const BackgroundGeometry& bg, const GridSpec& grid, int k, int i) {
  return bg.christoffel(grid.tau(k), grid.x(i));
}

/// Slicing by h(t, x) = t: sigma = dt, its g-hat norm and the unit normal.
struct Foliation {
  static constexpr Vec2 sigma() { return {1.0, 0.0}; }

  /// (-g-hat^{-1}(sigma, sigma))^{1/2}.
  static double sigma_norm(const BackgroundGeometry& bg, double t, double x) {
    const double g00 = bg.inverse_metric(t, x).a00;
    if (!(g00 < 0.0)) throw GeometryError("dt is not timelike for the background metric at " + detail::point_str(t, x));
    return std::sqrt(-g00);
  }

  static Vec2 sigma_hat(const BackgroundGeometry& bg, double t, double x) {
    return {1.0 / sigma_norm(bg, t, x), 0.0};
  }
};

/// Riemannian metric used for pointwise norms; coordinate-constant, default Euclidean.
class RiemannianBackground {
 public:
  RiemannianBackground() = default;
  explicit RiemannianBackground(const Mat2& m) : m_(m) {
    const auto [l0, l1] = symmetric_eigenvalues(m);
    if (m.a01 != m.a10 || !(l0 > 0.0)) throw PreconditionError("Riemannian background must be symmetric positive definite");
    inv_ = m.inverse();
    euclid_ = false;
  }

  /// Covariant m_{ab}.
  const Mat2& lower() const noexcept { return m_; }
  /// Contravariant m^{ab}.
  const Mat2& upper() const noexcept { return inv_; }
  bool euclidean() const noexcept { return euclid_; }

 private:
  Mat2 m_ = Mat2::identity();
  Mat2 inv_ = Mat2::identity();
  bool euclid_ = true;
};

enum class Rank { Scalar, Vector, Covector };

inline int rank_slots(Rank r) { return r == Rank::Scalar ? 0 : 1; }
inline int rank_components(Rank r) { return r == Rank::Scalar ? 1 : kDim; }
inline const char* rank_name(Rank r) {
  return r == Rank::Scalar ? "scalar" : (r == Rank::Vector ? "vector" : "covector");
}

/// Bitmask of upper slots for a field of rank r carrying `order` derivative slots.
/// Slot 0 is the outermost derivative; the tensor slot, if any, is last.
inline unsigned upper_slot_mask(Rank r, int order) {
  return r == Rank::Vector ? (1u << order) : 0u;
}

/// Samples of a rank-(k,l) field (k + l <= 1), or of its j-th covariant derivative,
/// on every slice of a grid. Each slice carries its own valid index window.
class TensorFieldGrid {
 public:
  TensorFieldGrid() = default;
  TensorFieldGrid(const GridSpec& grid, Rank rank, int order = 0)
      : grid_(grid), rank_(rank), order_(order),
        ncomp_(rank_components(rank) << order),
        data_(static_cast<std::size_t>(grid.slices()) * grid.nx * ncomp_, 0.0),
        valid_(grid.slices(), Window{0, grid.nx - 1}) {}

  const GridSpec& grid() const noexcept { return grid_; }
  Rank rank() const noexcept { return rank_; }
  int order() const noexcept { return order_; }
  int components() const noexcept { return ncomp_; }
  int slots() const noexcept { return order_ + rank_slots(rank_); }
  unsigned upper_mask() const noexcept { return upper_slot_mask(rank_, order_); }

  double& at(int k, int i, int c) { return data_[index(k, i, c)]; }
  double at(int k, int i, int c) const { return data_[index(k, i, c)]; }
  double* point(int k, int i) { return data_.data() + index(k, i, 0); }
  const double* point(int k, int i) const { return data_.data() + index(k, i, 0); }

  Window& valid(int k) { return valid_[k]; }
  const Window& valid(int k) const { return valid_[k]; }

  /// Optional exact time derivative of an order-0 field (same layout as the values).
  bool has_time_derivative() const noexcept { return !dt_.empty(); }
  std::vector<double>& time_derivative() { return dt_; }
  const std::vector<double>& time_derivative() const { return dt_; }
  double time_derivative_at(int k, int i, int c) const { return dt_[index(k, i, c)]; }
  void enable_time_derivative() { dt_.assign(data_.size(), 0.0); }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

 private:
  std::size_t index(int k, int i, int c) const {
    return (static_cast<std::size_t>(k) * grid_.nx + i) * ncomp_ + c;
  }

  GridSpec grid_;
  Rank rank_ = Rank::Scalar;
  int order_ = 0;
  int ncomp_ = 1;
  std::vector<double> data_;
  std::vector<Window> valid_;
  std::vector<double> dt_;
};

/// Spatial finite-difference accuracy (2 or 4).
struct FdScheme {
  int order = 2;
  int radius() const { return order / 2; }
  void validate() const {
    if (order != 2 && order != 4) throw PreconditionError("finite-difference order must be 2 or 4");
  }
};

namespace detail {

template <class F>
double dx1(const F& f, int i, double h, int order) {
  if (order == 4) return (f(i - 2) - 8.0 * f(i - 1) + 8.0 * f(i + 1) - f(i + 2)) / (12.0 * h);
  return (f(i + 1) - f(i - 1)) / (2.0 * h);
}

template <class F>
double dx2(const F& f, int i, double h, int order) {
  if (order == 4)
    return (-f(i - 2) + 16.0 * f(i - 1) - 30.0 * f(i) + 16.0 * f(i + 1) - f(i + 2)) / (12.0 * h * h);
  return (f(i + 1) - 2.0 * f(i) + f(i - 1)) / (h * h);
}

/// Second-order time difference on slices; one-sided at the two ends.
template <class F>
double dt1(const F& f, int k, int last, double h) {
  if (k == 0) return (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
  if (k == last) return (3.0 * f(last) - 4.0 * f(last - 1) + f(last - 2)) / (2.0 * h);
  return (f(k + 1) - f(k - 1)) / (2.0 * h);
}

inline std::pair<int, int> time_stencil(int k, int last) {
  if (k == 0) return {0, 2};
  if (k == last) return {last - 2, last};
  return {k - 1, k + 1};
}

/// Connection matrices for one application of the covariant derivative along direction d,
/// acting on a field whose slots have the given upper mask. Returns the correction for component c.
inline double connection_term(const double* comps, int nslots, unsigned upper, const Christoffel& gam, int d, int c) {
  double acc = 0.0;
  for (int s = 0; s < nslots; ++s) {
    const int shift = nslots - 1 - s;
    const int idx = (c >> shift) & 1;
    const int base = c & ~(1 << shift);
    for (int e = 0; e < 2; ++e) {
      const double val = comps[base | (e << shift)];
      if (upper & (1u << s)) acc += gam(idx, d, e) * val;
      else acc -= gam(e, d, idx) * val;
    }
  }
  return acc;
}

/// Christoffel symbols on every (slice, x) point of a grid, or none for flat backgrounds.
class ChristoffelTable {
 public:
  ChristoffelTable(const BackgroundGeometry& bg, const GridSpec& grid) : grid_(grid), flat_(bg.flat()) {
    if (flat_) return;
    per_slice_ = bg.time_dependent();
    const int ns = per_slice_ ? grid.slices() : 1;
    table_.resize(static_cast<std::size_t>(ns) * grid.nx);
    for (int k = 0; k < ns; ++k)
      for (int i = 0; i < grid.nx; ++i) table_[static_cast<std::size_t>(k) * grid.nx + i] = bg.christoffel(grid.tau(k), grid.x(i));
  }
  bool flat() const { return flat_; }
  const Christoffel& at(int k, int i) const {
    return table_[static_cast<std::size_t>(per_slice_ ? k : 0) * grid_.nx + i];
  }

 private:
  GridSpec grid_;
  bool flat_;
  bool per_slice_ = false;
  std::vector<Christoffel> table_;
};

}  // namespace detail

/// One application of the covariant derivative: rank (k, l) -> (k, l + 1).
/// The new lower index becomes the outermost derivative slot.
inline TensorFieldGrid covariant_derivative_once(const TensorFieldGrid& f, const detail::ChristoffelTable& gam,
                                                 FdScheme fd = {}) {
  fd.validate();
  const GridSpec& grid = f.grid();
  const int nc = f.components();
  const int last = grid.nt;
  const int r = fd.radius();
  const double hx = grid.dx(), ht = grid.dtau();
  const bool exact_dt = f.has_time_derivative() && f.order() == 0;
  TensorFieldGrid out(grid, f.rank(), f.order() + 1);
  const int nslots = f.slots();
  const unsigned upper = f.upper_mask();

  for (int k = 0; k <= last; ++k) {
    Window w = f.valid(k);
    if (!exact_dt) {
      const auto [k0, k1] = detail::time_stencil(k, last);
      for (int q = k0; q <= k1; ++q) {
        w.lo = std::max(w.lo, f.valid(q).lo);
        w.hi = std::min(w.hi, f.valid(q).hi);
      }
    }
    w.lo += r;
    w.hi -= r;
    out.valid(k) = w;
    if (w.empty()) {
      throw StencilError("insufficient margin for covariant derivative of order " + std::to_string(f.order() + 1) +
                         " on slice " + std::to_string(k));
    }
    for (int i = w.lo; i <= w.hi; ++i) {
      double* dst = out.point(k, i);
      const double* src = f.point(k, i);
      for (int c = 0; c < nc; ++c) {
        const double pt = exact_dt ? f.time_derivative_at(k, i, c)
                                   : detail::dt1([&](int q) { return f.at(q, i, c); }, k, last, ht);
        const double px = detail::dx1([&](int q) { return f.at(k, q, c); }, i, hx, fd.order);
        dst[c] = pt;
        dst[nc + c] = px;
      }
      if (!gam.flat() && nslots > 0) {
        const Christoffel& g = gam.at(k, i);
        for (int d = 0; d < 2; ++d)
          for (int c = 0; c < nc; ++c) dst[d * nc + c] += detail::connection_term(src, nslots, upper, g, d, c);
      }
    }
  }
  return out;
}

/// j-fold covariant derivative, rank (k, l) -> (k, l + j).
inline TensorFieldGrid covariant_derivative(const TensorFieldGrid& f, const BackgroundGeometry& bg, int order,
                                            FdScheme fd = {}) {
  if (order < 0) throw PreconditionError("derivative order must be nonnegative");
  if (f.order() + order > 4) throw RankError("derivative stacks are limited to total order 4");
  const detail::ChristoffelTable gam(bg, f.grid());
  TensorFieldGrid cur = f;
  for (int j = 0; j < order; ++j) cur = covariant_derivative_once(cur, gam, fd);
  return cur;
}

/// All covariant derivatives of orders 0..m_max.
inline std::vector<TensorFieldGrid> derivative_stack(const TensorFieldGrid& f, const BackgroundGeometry& bg, int m_max,
                                                     FdScheme fd = {}) {
  const detail::ChristoffelTable gam(bg, f.grid());
  std::vector<TensorFieldGrid> stack;
  stack.reserve(m_max + 1);
  stack.push_back(f);
  for (int j = 1; j <= m_max; ++j) stack.push_back(covariant_derivative_once(stack.back(), gam, fd));
  return stack;
}

/// Componentwise partial derivative along axis 0 (t) or 1 (x); rank and order are unchanged.
inline TensorFieldGrid partial_derivative(const TensorFieldGrid& f, int axis, FdScheme fd = {}) {
  const GridSpec& grid = f.grid();
  const int last = grid.nt, nc = f.components();
  TensorFieldGrid out(grid, f.rank(), f.order());
  const bool exact_dt = axis == 0 && f.has_time_derivative();
  for (int k = 0; k <= last; ++k) {
    Window w = f.valid(k);
    if (axis == 0 && !exact_dt) {
      const auto [k0, k1] = detail::time_stencil(k, last);
      for (int q = k0; q <= k1; ++q) {
        w.lo = std::max(w.lo, f.valid(q).lo);
        w.hi = std::min(w.hi, f.valid(q).hi);
      }
    }
    if (axis == 1) {
      w.lo += fd.radius();
      w.hi -= fd.radius();
    }
    out.valid(k) = w;
    if (w.empty()) throw StencilError("insufficient margin for partial derivative on slice " + std::to_string(k));
    for (int i = w.lo; i <= w.hi; ++i)
      for (int c = 0; c < nc; ++c) {
        double v;
        if (axis == 0) {
          v = exact_dt ? f.time_derivative_at(k, i, c)
                       : detail::dt1([&](int q) { return f.at(q, i, c); }, k, last, grid.dtau());
        } else {
          v = detail::dx1([&](int q) { return f.at(k, q, c); }, i, grid.dx(), fd.order);
        }
        out.at(k, i, c) = v;
      }
  }
  return out;
}

/// Squared pointwise norm m^{..} m_{..} v v of the components at one point.
inline double contract_norm2(const double* comps, int nslots, unsigned upper, const RiemannianBackground& m) {
  const int n = 1 << nslots;
  if (m.euclidean()) {
    double s = 0.0;
    for (int c = 0; c < n; ++c) s += comps[c] * comps[c];
    return s;
  }
  double s = 0.0;
  for (int A = 0; A < n; ++A)
    for (int B = 0; B < n; ++B) {
      double w = 1.0;
      for (int q = 0; q < nslots; ++q) {
        const int sh = nslots - 1 - q;
        const int ia = (A >> sh) & 1, ib = (B >> sh) & 1;
        w *= (upper & (1u << q)) ? m.lower()(ia, ib) : m.upper()(ia, ib);
      }
      s += w * comps[A] * comps[B];
    }
  return s;
}

/// W_{cd} = sum over the remaining slots of D[c, K] D[d, R] contracted with m.
/// Slot 0 of `comps` is the free index c.
inline Mat2 first_slot_gram(const double* comps, int nslots, unsigned upper, const RiemannianBackground& m) {
  const int rest = nslots - 1;
  const int n = 1 << rest;
  const unsigned rest_upper = upper >> 1;
  Mat2 w;
  for (int c = 0; c < 2; ++c)
    for (int d = c; d < 2; ++d) {
      const double* pc = comps + c * n;
      const double* pd = comps + d * n;
      double s = 0.0;
      if (m.euclidean()) {
        for (int A = 0; A < n; ++A) s += pc[A] * pd[A];
      } else {
        for (int A = 0; A < n; ++A)
          for (int B = 0; B < n; ++B) {
            double wt = 1.0;
            for (int q = 0; q < rest; ++q) {
              const int sh = rest - 1 - q;
              const int ia = (A >> sh) & 1, ib = (B >> sh) & 1;
              wt *= (rest_upper & (1u << q)) ? m.lower()(ia, ib) : m.upper()(ia, ib);
            }
            s += wt * pc[A] * pd[B];
          }
      }
      w.at(c, d) = s;
      w.at(d, c) = s;
    }
  return w;
}

/// |v| at every valid point, as a scalar field.
inline TensorFieldGrid pointwise_norm(const TensorFieldGrid& f, const RiemannianBackground& m = {}) {
  const GridSpec& grid = f.grid();
  TensorFieldGrid out(grid, Rank::Scalar, 0);
  for (int k = 0; k < grid.slices(); ++k) {
    out.valid(k) = f.valid(k);
    for (int i = f.valid(k).lo; i <= f.valid(k).hi; ++i)
      out.at(k, i, 0) = std::sqrt(contract_norm2(f.point(k, i), f.slots(), f.upper_mask(), m));
  }
  return out;
}

/// Pointwise norm of a single tensor value (rank taken from the slot count).
inline double pointwise_norm(const double* comps, int nslots, unsigned upper, const RiemannianBackground& m = {}) {
  return std::sqrt(contract_norm2(comps, nslots, upper, m));
}

/// Piecewise-linear value of grid samples f(i) at coordinate x.
template <class F>
double interpolate(const F& f, const GridSpec& grid, double x) {
  const double s = (x - grid.a) / grid.dx();
  int i = static_cast<int>(std::floor(s));
  i = std::clamp(i, 0, grid.nx - 2);
  const double w = s - i;
  if (w <= 0.0) return f(i);
  if (w >= 1.0) return f(i + 1);
  return (1.0 - w) * f(i) + w * f(i + 1);
}

/// Exact integral of the piecewise-linear interpolant of f(i) over [s.lo, s.hi];
/// reduces to the composite trapezoid rule when the endpoints are grid points.
template <class F>
double integrate_slice(const F& f, const GridSpec& grid, Interval s) {
  const double h = grid.dx();
  const double fl = (s.lo - grid.a) / h, fr = (s.hi - grid.a) / h;
  const int i0 = static_cast<int>(std::floor(fl + 1e-9));
  const int i1 = static_cast<int>(std::ceil(fr - 1e-9));
  double total = 0.0;
  for (int i = i0; i < i1; ++i) {
    const double xa = grid.x(i);
    const double y0 = std::max(s.lo, xa), y1 = std::min(s.hi, xa + h);
    if (y1 <= y0) continue;
    const double fa = f(i), fb = f(i + 1);
    const double v0 = fa + (fb - fa) * (y0 - xa) / h;
    const double v1 = fa + (fb - fa) * (y1 - xa) / h;
    total += 0.5 * (y1 - y0) * (v0 + v1);
  }
  return total;
}

/// Foliated domain: slices S_tau = [lo + c (tau - t0), hi - c (tau - t0)] shrinking at speed c_max.
class Lens {
 public:
  Lens() = default;
  Lens(const GridSpec& grid, Interval base, double c_max) : grid_(grid), base_(base), c_max_(c_max) {}

  const GridSpec& grid() const noexcept { return grid_; }
  const Interval& base() const noexcept { return base_; }
  double c_max() const noexcept { return c_max_; }
  int slices() const { return grid_.slices(); }

  Interval slice(int k) const {
    const double d = c_max_ * (grid_.tau(k) - grid_.t0);
    return {base_.lo + d, base_.hi - d};
  }

  /// Grid points lying inside S_tau.
  Window inner(int k) const {
    const Interval s = slice(k);
    const double h = grid_.dx();
    return {static_cast<int>(std::ceil((s.lo - grid_.a) / h - 1e-9)),
            static_cast<int>(std::floor((s.hi - grid_.a) / h + 1e-9))};
  }

  /// Smallest index range whose cells cover S_tau (what slice quadrature touches).
  Window support(int k) const {
    const Interval s = slice(k);
    const double h = grid_.dx();
    return {static_cast<int>(std::floor((s.lo - grid_.a) / h + 1e-9)),
            static_cast<int>(std::ceil((s.hi - grid_.a) / h - 1e-9))};
  }

  /// Shortest slice length (the last slice).
  double min_length() const { return slice(grid_.nt).length(); }

 private:
  GridSpec grid_;
  Interval base_;
  double c_max_ = 1.0;
};

/// Builds the lens; a lens that collapses before t_max is an error.
inline Lens build_lens(const GridSpec& grid, double c_max, Interval base) {
  grid.validate();
  if (!(c_max > 0.0)) throw PreconditionError("lens speed c_max must be positive");
  const double tol = 1e-12 * (grid.b - grid.a);
  if (base.lo < grid.a - tol || base.hi > grid.b + tol || !(base.hi > base.lo)) {
    throw DomainError("lens base does not fit in the spatial extent");
  }
  const double gamma = grid.gamma();
  const double max_gamma = std::max(0.0, (base.length() - 4.0 * grid.dx()) / (2.0 * c_max));
  Lens lens(grid, base, c_max);
  const bool collapsed = !(base.length() > 2.0 * c_max * gamma) || lens.inner(grid.nt).size() < 4;
  if (collapsed) {
    std::ostringstream os;
    os.precision(10);
    os << "lens collapses before t_max: slice width reaches zero at tau=" << base.length() / (2.0 * c_max)
       << "; maximal admissible gamma is " << max_gamma;
    throw DomainError(os.str(), max_gamma);
  }
  for (int k = 0; k < grid.slices(); ++k) {
    if (lens.inner(k).size() < 4) throw DomainError("lens slice has fewer than 4 grid points", max_gamma);
  }
  return lens;
}

}  // namespace genwave
