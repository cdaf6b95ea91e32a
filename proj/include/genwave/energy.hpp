#pragma once

// Sobolev norms, energy tensors and energy integrals of solutions, and the
// checks built on them: norm equivalence, dominant energy condition,
// divergence balance, Gronwall-type growth and the sup bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "genwave/errors.hpp"
#include "genwave/geometry.hpp"
#include "genwave/regularization.hpp"
#include "genwave/solver.hpp"

namespace genwave {

/// Energy tensor of order j at one point from the order-j derivative components.
///   j = 0: T = -1/2 G |v|^2
///   j > 0: T = G W G - 1/2 tr(G W) G, W_cd the Gram matrix of the first slot
inline Mat2 energy_tensor_at(const double* comps, int j, int nslots, unsigned upper, const Mat2& G,
                             const RiemannianBackground& m) {
  if (j == 0) return G * (-0.5 * contract_norm2(comps, nslots, upper, m));
  const Mat2 W = first_slot_gram(comps, nslots, upper, m);
  const Mat2 GW = G * W;
  Mat2 T = GW * G - G * (0.5 * GW.trace());
  T.a10 = T.a01 = 0.5 * (T.a01 + T.a10);
  return T;
}

/// Energy tensor field of one order on every slice (contravariant components per point).
struct EnergyTensorGrid {
  int order = 0;
  GridSpec grid;
  std::vector<Mat2> T;  // [k * nx + i]
  std::vector<Window> valid;

  const Mat2& at(int k, int i) const { return T[static_cast<std::size_t>(k) * grid.nx + i]; }
};

inline EnergyTensorGrid energy_tensor(const TensorFieldGrid& dj, const MetricMember& mem, int j,
                                      const RiemannianBackground& m = {}) {
  if (dj.order() != j) throw RankError("derivative order does not match the energy order");
  const GridSpec& grid = dj.grid();
  EnergyTensorGrid out;
  out.order = j;
  out.grid = grid;
  out.T.assign(static_cast<std::size_t>(grid.slices()) * grid.nx, Mat2{});
  out.valid.resize(grid.slices());
  for (int k = 0; k < grid.slices(); ++k) {
    out.valid[k] = dj.valid(k);
    const double t = grid.tau(k);
    for (int i = dj.valid(k).lo; i <= dj.valid(k).hi; ++i)
      out.T[static_cast<std::size_t>(k) * grid.nx + i] =
          energy_tensor_at(dj.point(k, i), j, dj.slots(), dj.upper_mask(), mem.inverse(t, i), m);
  }
  return out;
}

/// Per-point background densities: nu = sqrt|det g-hat| and the slice density sqrt(g-hat_xx).
class Densities {
 public:
  Densities(const BackgroundGeometry& bg, const GridSpec& grid) : grid_(grid), dyn_(bg.time_dependent()) {
    const int ns = dyn_ ? grid.slices() : 1;
    vol_.resize(static_cast<std::size_t>(ns) * grid.nx);
    slice_.resize(vol_.size());
    for (int k = 0; k < ns; ++k)
      for (int i = 0; i < grid.nx; ++i) {
        vol_[static_cast<std::size_t>(k) * grid.nx + i] = bg.volume_density(grid.tau(k), grid.x(i));
        slice_[static_cast<std::size_t>(k) * grid.nx + i] = bg.slice_density(grid.tau(k), grid.x(i));
      }
  }
  double volume(int k, int i) const { return vol_[idx(k, i)]; }
  double slice(int k, int i) const { return slice_[idx(k, i)]; }

 private:
  std::size_t idx(int k, int i) const { return static_cast<std::size_t>(dyn_ ? k : 0) * grid_.nx + i; }
  GridSpec grid_;
  bool dyn_;
  std::vector<double> vol_, slice_;
};

namespace detail {

inline void require_support(const TensorFieldGrid& f, const Lens& lens, int k, int order) {
  const Window s = lens.support(k);
  if (!f.valid(k).contains(s)) {
    throw StencilError("derivative of order " + std::to_string(order) + " is not available on lens slice " +
                       std::to_string(k) + "; widen the spatial extent or lower m_max");
  }
}

/// Trapezoid-in-time cumulative integral of per-slice values.
inline std::vector<double> cumulative_time_integral(const std::vector<double>& f, double dtau) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t k = 1; k < f.size(); ++k) out[k] = out[k - 1] + 0.5 * dtau * (f[k - 1] + f[k]);
  return out;
}

}  // namespace detail

/// Slice integrals of all order terms for one member, from which E^m and the Sobolev norms follow.
struct MemberEnergy {
  double eps = 1.0;
  int m_max = 0;
  std::vector<double> tau;
  double dtau = 0.0;
  // [j][k]
  std::vector<std::vector<double>> e_term;  // integral of T_j(sigma, sigma-hat) mu-hat_tau over S_tau
  std::vector<std::vector<double>> s_term;  // integral of |D^j v|^2 mu-hat_tau over S_tau
  std::vector<std::vector<double>> v_term;  // integral of |D^j v|^2 sqrt|det g-hat| dx over S_tau
  std::vector<double> f_volume2;            // squared order-0 volume norm of the source over Omega_tau

  int slices() const { return static_cast<int>(tau.size()); }

  double E(int m, int k) const {
    double s = 0.0;
    for (int j = 0; j <= m; ++j) s += e_term[j][k];
    return s;
  }
  double slice_norm2(int m, int k) const {
    double s = 0.0;
    for (int j = 0; j <= m; ++j) s += s_term[j][k];
    return s;
  }
  double slice_norm(int m, int k) const { return std::sqrt(slice_norm2(m, k)); }
  double volume_norm(int m, int k) const {
    double s = 0.0;
    for (int q = 1; q <= k; ++q)
      for (int j = 0; j <= m; ++j) s += 0.5 * dtau * (v_term[j][q - 1] + v_term[j][q]);
    return std::sqrt(s);
  }
  std::vector<double> curve(int m) const {
    std::vector<double> c(tau.size());
    for (int k = 0; k < slices(); ++k) c[k] = E(m, k);
    return c;
  }
};

struct EnergyCurve {
  int m_max = 0;
  std::vector<double> tau;
  std::vector<double> eps;
  std::vector<MemberEnergy> members;
};

/// Energy integrals and Sobolev norms of a solution for orders 0..m_max on every lens slice.
inline MemberEnergy compute_member_energy(const Solution& sol, const MetricMember& mem, const CoefficientMember* coeffs,
                                          const std::vector<double>* source, const Lens& lens,
                                          const BackgroundGeometry& bg, int m_max, FdScheme fd = {},
                                          const RiemannianBackground& m = {}) {
  const GridSpec& grid = lens.grid();
  const auto stack = derivative_stack(sol.u, bg, m_max, fd);
  const Densities dens(bg, grid);
  MemberEnergy me;
  me.eps = sol.eps;
  me.m_max = m_max;
  me.dtau = grid.dtau();
  for (int k = 0; k < grid.slices(); ++k) me.tau.push_back(grid.tau(k));
  me.e_term.assign(m_max + 1, std::vector<double>(grid.slices(), 0.0));
  me.s_term = me.e_term;
  me.v_term = me.e_term;

  std::vector<double> fe(grid.nx), fs(grid.nx), fv(grid.nx);
  for (int j = 0; j <= m_max; ++j) {
    const TensorFieldGrid& d = stack[j];
    for (int k = 0; k < grid.slices(); ++k) {
      detail::require_support(d, lens, k, j);
      const Window s = lens.support(k);
      const double t = grid.tau(k);
      for (int i = s.lo; i <= s.hi; ++i) {
        const double* p = d.point(k, i);
        const double n2 = contract_norm2(p, d.slots(), d.upper_mask(), m);
        const Mat2 T = energy_tensor_at(p, j, d.slots(), d.upper_mask(), mem.inverse(t, i), m);
        // T(sigma, sigma-hat) mu-hat_tau = T^{00} sqrt(g-hat_xx) / |sigma| = T^{00} sqrt|det g-hat|
        fe[i] = T.a00 * dens.volume(k, i);
        fs[i] = n2 * dens.slice(k, i);
        fv[i] = n2 * dens.volume(k, i);
      }
      const Interval S = lens.slice(k);
      me.e_term[j][k] = integrate_slice([&](int i) { return fe[i]; }, grid, S);
      me.s_term[j][k] = integrate_slice([&](int i) { return fs[i]; }, grid, S);
      me.v_term[j][k] = integrate_slice([&](int i) { return fv[i]; }, grid, S);
    }
  }

  std::vector<double> fslice(grid.slices(), 0.0);
  const bool any_source = (coeffs && !coeffs->f_zero) || (source && !source->empty());
  if (any_source) {
    const int nc = rank_components(sol.u.rank());
    const unsigned upper = upper_slot_mask(sol.u.rank(), 0);
    std::vector<double> f(nc);
    for (int k = 0; k < grid.slices(); ++k) {
      const Window s = lens.support(k);
      const double t = grid.tau(k);
      for (int i = s.lo; i <= s.hi; ++i) {
        for (int c = 0; c < nc; ++c) {
          f[c] = (coeffs && !coeffs->f_zero) ? coeffs->F[c](t, i) : 0.0;
          if (source && !source->empty()) f[c] += (*source)[static_cast<std::size_t>(i) * nc + c];
        }
        fv[i] = contract_norm2(f.data(), rank_slots(sol.u.rank()), upper, m) * dens.volume(k, i);
      }
      fslice[k] = integrate_slice([&](int i) { return fv[i]; }, grid, lens.slice(k));
    }
  }
  me.f_volume2 = detail::cumulative_time_integral(fslice, grid.dtau());
  return me;
}

/// Energies for every member, computed concurrently and stored in net order.
inline EnergyCurve compute_energy_curve(const std::vector<Solution>& sols, const MetricFamily& fam,
                                        const CoefficientFamily* coeffs, const std::vector<CauchyData>* data,
                                        const Lens& lens, const BackgroundGeometry& bg, int m_max, FdScheme fd = {},
                                        const RiemannianBackground& m = {}) {
  EnergyCurve c;
  c.m_max = m_max;
  for (int k = 0; k < lens.slices(); ++k) c.tau.push_back(lens.grid().tau(k));
  std::vector<std::future<MemberEnergy>> jobs;
  for (std::size_t j = 0; j < sols.size(); ++j) {
    const CoefficientMember* cm = coeffs ? &(*coeffs)[j] : nullptr;
    const std::vector<double>* src = nullptr;
    if (data && !data->empty()) {
      const CauchyData& d = data->size() == 1 ? (*data)[0] : (*data)[j];
      if (!d.source.empty()) src = &d.source;
    }
    jobs.push_back(std::async(std::launch::async, [&, j, cm, src] {
      return compute_member_energy(sols[j], fam[j], cm, src, lens, bg, m_max, fd, m);
    }));
  }
  for (auto& f : jobs) c.members.push_back(f.get());
  for (const auto& me : c.members) c.eps.push_back(me.eps);
  return c;
}

/// Sobolev norms (slice, volume) of a field on S_tau and Omega_tau, orders 0..m.
inline std::pair<double, double> sobolev_norms(const TensorFieldGrid& field, const Lens& lens, int k, int m,
                                               const BackgroundGeometry& bg, FdScheme fd = {},
                                               const RiemannianBackground& mb = {}) {
  const GridSpec& grid = lens.grid();
  const auto stack = derivative_stack(field, bg, m, fd);
  const Densities dens(bg, grid);
  std::vector<double> fs(grid.nx), fv(grid.nx);
  double slice2 = 0.0;
  std::vector<double> vol(k + 1, 0.0);
  for (int j = 0; j <= m; ++j) {
    for (int q = 0; q <= k; ++q) {
      detail::require_support(stack[j], lens, q, j);
      const Window s = lens.support(q);
      for (int i = s.lo; i <= s.hi; ++i) {
        const double n2 = contract_norm2(stack[j].point(q, i), stack[j].slots(), stack[j].upper_mask(), mb);
        fs[i] = n2 * dens.slice(q, i);
        fv[i] = n2 * dens.volume(q, i);
      }
      vol[q] += integrate_slice([&](int i) { return fv[i]; }, grid, lens.slice(q));
      if (q == k) slice2 += integrate_slice([&](int i) { return fs[i]; }, grid, lens.slice(q));
    }
  }
  const auto cum = detail::cumulative_time_integral(vol, grid.dtau());
  return {std::sqrt(slice2), std::sqrt(cum[k])};
}

/// E^m on slice k of one solution.
inline double energy_integral(const Solution& sol, const MetricMember& mem, const Lens& lens, int k, int m,
                              const BackgroundGeometry& bg, FdScheme fd = {}) {
  const MemberEnergy me = compute_member_energy(sol, mem, nullptr, nullptr, lens, bg, m, fd);
  return me.E(m, k);
}

// ---------------------------------------------------------------------------
// norm equivalence

struct EquivalenceConstants {
  double M0 = 1.0;
  double sigma_min = 1.0, sigma_max = 1.0;
  double A0 = 0.5, A0p = 0.5;
  double B = 1.0, Bp = 1.0;
  double A = 0.5, Ap = 0.5;
};

/// Constants of the energy/Sobolev sandwich over the lens and the whole net.
inline EquivalenceConstants equivalence_constants(const MetricFamily& fam, const Lens& lens,
                                                  const BackgroundGeometry& bg, const RiemannianBackground& m = {}) {
  const GridSpec& grid = lens.grid();
  EquivalenceConstants c;
  double M0 = 1.0, smin = std::numeric_limits<double>::infinity(), smax = 0.0;
  double B = 0.0, Bp = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.slices(); ++k) {
    const Window s = lens.support(k);
    const double t = grid.tau(k);
    for (int i = s.lo; i <= s.hi; ++i) {
      const double sn = Foliation::sigma_norm(bg, t, grid.x(i));
      smin = std::min(smin, sn);
      smax = std::max(smax, sn);
      for (const MetricMember& mem : fam.members) {
        const Mat2 G = mem.inverse(t, i);
        const double q = -G.a00;
        if (!(q > 0.0)) throw GeometryError("dt is not timelike for g_eps at " + detail::point_str(t, grid.x(i)));
        M0 = std::max(M0, std::max(q, 1.0 / q));
        const Vec2 xi = mem.xi(t, i);
        const Mat2 R = G - Mat2::symmetric(xi[0] * xi[0], xi[0] * xi[1], xi[1] * xi[1]) * (2.0 / G.a00);
        const auto [lo, hi] = generalized_eigenvalues(R, m.upper());
        B = std::max(B, hi);
        Bp = std::min(Bp, lo);
      }
    }
  }
  c.M0 = M0;
  c.sigma_min = smin;
  c.sigma_max = smax;
  c.A0 = M0 / (2.0 * smin);
  c.A0p = 1.0 / (2.0 * smax * M0);
  c.B = B;
  c.Bp = Bp;
  c.A = std::max(c.A0, B * c.A0);
  c.Ap = std::min(c.A0p, Bp * c.A0p);
  return c;
}

struct EquivalenceReport {
  bool pass = true;
  double slack = 1.05;
  double min_lower_ratio = std::numeric_limits<double>::infinity();  // E / (A' |v|^2)
  double max_upper_ratio = 0.0;                                      // E / (A |v|^2)
  int violations = 0;
  std::string first_violation;
};

inline EquivalenceReport check_equivalence(const EnergyCurve& curve, const EquivalenceConstants& c,
                                           double slack = 1.05) {
  EquivalenceReport r;
  r.slack = slack;
  for (const MemberEnergy& me : curve.members)
    for (int m = 0; m <= curve.m_max; ++m)
      for (int k = 0; k < me.slices(); ++k) {
        const double E = me.E(m, k);
        const double n2 = me.slice_norm2(m, k);
        const bool ok = c.Ap / slack * n2 <= E && E <= slack * c.A * n2;
        if (n2 > 0.0) {
          r.min_lower_ratio = std::min(r.min_lower_ratio, E / (c.Ap * n2));
          r.max_upper_ratio = std::max(r.max_upper_ratio, E / (c.A * n2));
        }
        if (!ok) {
          if (r.violations == 0) {
            std::ostringstream os;
            os << "m=" << m << " tau=" << me.tau[k] << " eps=" << me.eps << ": E=" << E << " norm^2=" << n2;
            r.first_violation = os.str();
          }
          ++r.violations;
          r.pass = false;
        }
      }
  return r;
}

// ---------------------------------------------------------------------------
// dominant energy condition

struct DecReport {
  int order = 0;
  long samples = 0;
  long failures = 0;
  double min_energy = std::numeric_limits<double>::infinity();  // min T(w, w) / (|T| |w|^2)
  double max_flux = -std::numeric_limits<double>::infinity();   // max g(Tw, Tw) / (|T|^2 |w|^2 |g|)
  bool pass = true;
};

/// Random g-timelike covector by rejection sampling in [-1, 1]^2.
template <class Rng>
Vec2 sample_timelike(const Mat2& G, Rng& rng, double t = 0.0, double x = 0.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const Vec2 w{u(rng), u(rng)};
    if (G.form(w, w) < 0.0) return w;
  }
  throw GeometryError("no timelike covector found; metric is not Lorentzian at " + detail::point_str(t, x));
}

/// Checks T(w, w) >= 0 and g(T w, T w) <= 0 at one point for one covector.
inline bool dec_holds(const Mat2& T, const Mat2& G, const Vec2& w, double* energy = nullptr, double* flux = nullptr) {
  const Mat2 g = G.inverse();
  const double tn = T.frobenius();
  const double w2 = w[0] * w[0] + w[1] * w[1];
  const double e = T.form(w, w);
  const Vec2 Tw = T * w;
  const double f = g.form(Tw, Tw);
  if (energy) *energy = tn > 0 ? e / (tn * w2) : 0.0;
  if (flux) *flux = tn > 0 ? f / (tn * tn * w2 * g.frobenius()) : 0.0;
  return e >= -1e-10 * tn * w2 && f <= 1e-10 * tn * tn * w2 * g.frobenius();
}

/// DEC at n_samples random (member, slice, lens point, timelike covector) draws for order j.
inline DecReport check_dec(const std::vector<std::vector<TensorFieldGrid>>& stacks, const MetricFamily& fam,
                           const Lens& lens, int j, long n_samples, std::uint64_t seed,
                           const RiemannianBackground& m = {}) {
  DecReport r;
  r.order = j;
  const GridSpec& grid = lens.grid();
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(j) * 0xBF58476D1CE4E5B9ULL + 1);
  std::uniform_int_distribution<std::size_t> pick_member(0, stacks.size() - 1);
  std::uniform_int_distribution<int> pick_slice(0, grid.nt);
  for (long n = 0; n < n_samples; ++n) {
    const std::size_t e = pick_member(rng);
    const int k = pick_slice(rng);
    const Window w = lens.inner(k);
    std::uniform_int_distribution<int> pick_point(w.lo, w.hi);
    const int i = pick_point(rng);
    const TensorFieldGrid& d = stacks[e][j];
    if (!d.valid(k).contains(i)) throw StencilError("DEC sample outside the derivative window");
    const double t = grid.tau(k);
    const Mat2 G = fam[e].inverse(t, i);
    const Mat2 T = energy_tensor_at(d.point(k, i), j, d.slots(), d.upper_mask(), G, m);
    const Vec2 om = sample_timelike(G, rng, t, grid.x(i));
    double en = 0, fl = 0;
    const bool ok = dec_holds(T, G, om, &en, &fl);
    r.min_energy = std::min(r.min_energy, en);
    r.max_flux = std::max(r.max_flux, fl);
    ++r.samples;
    if (!ok) {
      ++r.failures;
      r.pass = false;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// divergence balance

struct DivergenceReport {
  double eps = 1.0;
  int m = 1;
  std::vector<double> tau, E, dEdtau, flux, bulk_div, bulk_fol, defect;
  double max_defect = 0.0;        // max over interior slices of |dE/dtau - (flux + bulk)|
  double scale = 0.0;             // max E
  double max_flux = 0.0;          // largest flux value (should be <= 0)
  double C = 0.0;                 // minimal C >= 0 for the integral inequality
  bool flux_nonpositive = true;
};

/// Discrete balance dE/dtau = flux + bulk for E^m of one solution, and the fitted constant of
///   E(tau) <= E(0) + C int_0^tau E + int_{Omega_tau} sigma_b D_a T^{ab}.
inline DivergenceReport divergence_balance(const Solution& sol, const MetricMember& mem, const Lens& lens,
                                           const BackgroundGeometry& bg, int m, FdScheme fd = {},
                                           const RiemannianBackground& mb = {}) {
  const GridSpec& grid = lens.grid();
  const auto stack = derivative_stack(sol.u, bg, m, fd);
  const Densities dens(bg, grid);
  const detail::ChristoffelTable gam(bg, grid);
  const int ns = grid.slices();
  const int nx = grid.nx;

  // total energy tensor of orders 0..m
  std::vector<Mat2> T(static_cast<std::size_t>(ns) * nx);
  std::vector<Window> valid(ns);
  for (int k = 0; k < ns; ++k) {
    Window w = stack[0].valid(k);
    for (int j = 1; j <= m; ++j) {
      w.lo = std::max(w.lo, stack[j].valid(k).lo);
      w.hi = std::min(w.hi, stack[j].valid(k).hi);
    }
    valid[k] = w;
    const double t = grid.tau(k);
    for (int i = w.lo; i <= w.hi; ++i) {
      const Mat2 G = mem.inverse(t, i);
      Mat2 sum;
      for (int j = 0; j <= m; ++j)
        sum = sum + energy_tensor_at(stack[j].point(k, i), j, stack[j].slots(), stack[j].upper_mask(), G, mb);
      T[static_cast<std::size_t>(k) * nx + i] = sum;
    }
  }
  auto Tat = [&](int k, int i) -> const Mat2& { return T[static_cast<std::size_t>(k) * nx + i]; };

  DivergenceReport r;
  r.eps = sol.eps;
  r.m = m;
  const double c = lens.c_max();
  const double h = grid.dx(), ht = grid.dtau();
  std::vector<double> fe(nx), fb(nx), ff(nx), fx(nx);
  for (int k = 0; k < ns; ++k) {
    const Window s = lens.support(k);
    const auto [k0, k1] = detail::time_stencil(k, grid.nt);
    for (int q = k0; q <= k1; ++q)
      if (!valid[q].contains(Window{s.lo - 1, s.hi + 1}))
        throw StencilError("energy tensor not available around lens slice " + std::to_string(k));
    for (int i = s.lo - 1; i <= s.hi + 1; ++i) fx[i] = dens.volume(k, i) * Tat(k, i).a10;
    for (int i = s.lo; i <= s.hi; ++i) {
      const Mat2& Ti = Tat(k, i);
      const double nu = dens.volume(k, i);
      fe[i] = nu * Ti.a00;
      const double dT00 = detail::dt1([&](int q) { return Tat(q, i).a00; }, k, grid.nt, ht);
      const double dT10 = (Tat(k, i + 1).a10 - Tat(k, i - 1).a10) / (2 * h);
      double conn = 0.0, fol = 0.0;
      if (!gam.flat()) {
        const Christoffel& g = gam.at(k, i);
        for (int a = 0; a < 2; ++a)
          for (int d = 0; d < 2; ++d) {
            conn += g(a, a, d) * Ti(d, 0) + g(0, a, d) * Ti(a, d);
            fol += g(0, a, d) * Ti(a, d);
          }
      }
      fb[i] = nu * (dT00 + dT10 + conn);
      ff[i] = -nu * fol;
    }
    const Interval S = lens.slice(k);
    r.tau.push_back(grid.tau(k));
    r.E.push_back(integrate_slice([&](int i) { return fe[i]; }, grid, S));
    r.bulk_div.push_back(integrate_slice([&](int i) { return fb[i]; }, grid, S));
    r.bulk_fol.push_back(integrate_slice([&](int i) { return ff[i]; }, grid, S));
    auto interp = [&](auto comp, double x) {
      return interpolate([&](int i) { return dens.volume(k, i) * comp(Tat(k, i)); }, grid, x);
    };
    const double J1r = interp([](const Mat2& M) { return M.a10; }, S.hi);
    const double J0r = interp([](const Mat2& M) { return M.a00; }, S.hi);
    const double J1l = interp([](const Mat2& M) { return M.a10; }, S.lo);
    const double J0l = interp([](const Mat2& M) { return M.a00; }, S.lo);
    r.flux.push_back(-(J1r + c * J0r) + (J1l - c * J0l));
  }
  r.scale = *std::max_element(r.E.begin(), r.E.end());
  r.dEdtau.assign(ns, 0.0);
  r.defect.assign(ns, 0.0);
  for (int k = 1; k < ns - 1; ++k) {
    r.dEdtau[k] = (r.E[k + 1] - r.E[k - 1]) / (2 * ht);
    r.defect[k] = std::fabs(r.dEdtau[k] - (r.flux[k] + r.bulk_div[k] + r.bulk_fol[k]));
    r.max_defect = std::max(r.max_defect, r.defect[k]);
  }
  r.max_flux = *std::max_element(r.flux.begin(), r.flux.end());
  r.flux_nonpositive = r.max_flux <= 1e-9 * std::max(r.scale, 1e-300) || r.max_flux <= 1e-300;

  const auto intE = detail::cumulative_time_integral(r.E, ht);
  const auto intD = detail::cumulative_time_integral(r.bulk_div, ht);
  double C = 0.0;
  for (int k = 1; k < ns; ++k) {
    const double excess = r.E[k] - r.E[0] - intD[k];
    if (excess > 0.0 && intE[k] > 0.0) C = std::max(C, excess / intE[k]);
  }
  r.C = C;
  return r;
}

// ---------------------------------------------------------------------------
// Gronwall-type growth

struct GronwallFit {
  double c_prime = 1.0;
  std::vector<double> eps;
  std::vector<double> c3_per_eps;   // minimal exponential rate for E^1 per member
  double c3 = 0.0;                  // shared rate (max over the net)
  double variation = 1.0;           // max/min of per-member rates, each floored
  double floor = 0.05;
  bool holds = true;                // E^1 <= (E^1_0 + C' |F|^2) e^{C''' tau} with the shared rate
  // higher orders: required C'' eps^{-N} per order
  struct Higher {
    int m = 2;
    std::vector<double> required;   // per member
    double N = 0.0;
    double c2 = 0.0;
  };
  std::vector<Higher> higher;
};

inline void validate_energies(const EnergyCurve& curve) {
  for (const MemberEnergy& me : curve.members)
    for (int m = 0; m <= curve.m_max; ++m)
      for (int k = 0; k < me.slices(); ++k) {
        const double E = me.E(m, k);
        const double scale = std::max(1e-300, me.E(curve.m_max, k));
        if (!std::isfinite(E) || E < -1e-12 * scale) {
          std::ostringstream os;
          os << "energy E^" << m << " is negative or not finite at tau=" << me.tau[k] << ", eps=" << me.eps;
          throw DataError(os.str());
        }
        if (m > 0 && E < me.E(m - 1, k) - 1e-12 * scale) {
          throw DataError("energies are not monotone in the order");
        }
      }
}

/// Minimal rate c >= 0 with E(tau) <= (E(0) + C' f2(tau)) e^{c tau} for all tau.
inline double minimal_rate(const std::vector<double>& tau, const std::vector<double>& E,
                           const std::vector<double>& f2, double c_prime) {
  double c = 0.0;
  for (std::size_t k = 1; k < tau.size(); ++k) {
    const double base = E[0] + c_prime * f2[k];
    const double dt = tau[k] - tau[0];
    if (E[k] <= base) continue;
    if (base <= 0.0) return std::numeric_limits<double>::infinity();
    c = std::max(c, std::log(E[k] / base) / dt);
  }
  return c;
}

inline GronwallFit fit_gronwall(const EnergyCurve& curve, double c_prime = 1.0, double floor = 0.05) {
  validate_energies(curve);
  GronwallFit g;
  g.c_prime = c_prime;
  g.floor = floor;
  g.eps = curve.eps;
  if (curve.m_max < 1) throw PreconditionError("Gronwall fit needs energies of order 1");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const MemberEnergy& me : curve.members) {
    const double c = minimal_rate(me.tau, me.curve(1), me.f_volume2, c_prime);
    g.c3_per_eps.push_back(c);
    g.c3 = std::max(g.c3, c);
    lo = std::min(lo, std::max(c, floor));
    hi = std::max(hi, std::max(c, floor));
  }
  g.variation = hi / lo;
  g.holds = std::isfinite(g.c3);
  for (const MemberEnergy& me : curve.members) {
    const auto E = me.curve(1);
    for (int k = 0; k < me.slices(); ++k) {
      const double bound = (E[0] + c_prime * me.f_volume2[k]) * std::exp(g.c3 * (me.tau[k] - me.tau[0]));
      if (E[k] > bound * (1 + 1e-12)) g.holds = false;
    }
  }

  for (int m = 2; m <= curve.m_max; ++m) {
    GronwallFit::Higher hm;
    hm.m = m;
    for (const MemberEnergy& me : curve.members) {
      const auto Em = me.curve(m);
      const auto Em1 = me.curve(m - 1);
      const auto iEm = detail::cumulative_time_integral(Em, me.dtau);
      const auto iEm1 = detail::cumulative_time_integral(Em1, me.dtau);
      double req = 0.0;
      for (int k = 1; k < me.slices(); ++k) {
        const double excess = Em[k] - Em[0] - c_prime * me.f_volume2[k] - g.c3 * iEm[k];
        if (excess > 0.0 && iEm1[k] > 0.0) req = std::max(req, excess / iEm1[k]);
      }
      hm.required.push_back(req);
    }
    // N from the members that need a positive constant at all
    std::vector<double> pe, pv;
    for (std::size_t e = 0; e < hm.required.size(); ++e)
      if (hm.required[e] > 0.0) {
        pe.push_back(curve.eps[e]);
        pv.push_back(hm.required[e]);
      }
    if (pv.size() >= 2) hm.N = std::max(0.0, -fit_loglog(pe, pv).slope);
    for (std::size_t e = 0; e < pv.size(); ++e) hm.c2 = std::max(hm.c2, pv[e] * std::pow(pe[e], hm.N));
    g.higher.push_back(hm);
  }
  return g;
}

// ---------------------------------------------------------------------------
// sup bound

struct SupReport {
  int s = 1;
  int alpha_t = 0, alpha_x = 0;
  double c_emb = 0.0;
  std::vector<double> eps, lhs, rhs, ratio;
  double max_ratio = 0.0;
  bool pass = true;
};

/// Embedding constant on slices of length in [L_min, L_max] with slice weight >= w_min:
///   sup |f|^2 <= (max(2 / L_min, 2 L_max) / w_min) (|f|^2_{L2} + |f'|^2_{L2}).
inline double embedding_constant(const Lens& lens, const BackgroundGeometry& bg) {
  const GridSpec& grid = lens.grid();
  const double Lmin = lens.min_length(), Lmax = lens.base().length();
  double wmin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid.slices(); ++k) {
    const Window s = lens.support(k);
    for (int i = s.lo; i <= s.hi; ++i) wmin = std::min(wmin, bg.slice_density(grid.tau(k), grid.x(i)));
  }
  return std::sqrt(std::max(2.0 / Lmin, 2.0 * Lmax) / wmin);
}

/// sup over the lens of |partial^alpha u| against C_emb / sqrt(A') sup_tau (E^{s+|alpha|})^{1/2}.
inline SupReport sup_from_energy(const std::vector<Solution>& sols, const EnergyCurve& curve, const Lens& lens,
                                 const BackgroundGeometry& bg, const EquivalenceConstants& consts, int s, int alpha_t,
                                 int alpha_x, FdScheme fd = {}, const RiemannianBackground& m = {}) {
  const int n = 2;
  if (s <= (n - 1) / 2.0) throw PreconditionError("sup bound needs s > (n-1)/2");
  const int order = s + alpha_t + alpha_x;
  if (order > curve.m_max) throw PreconditionError("sup bound needs energies of order " + std::to_string(order));
  SupReport r;
  r.s = s;
  r.alpha_t = alpha_t;
  r.alpha_x = alpha_x;
  r.c_emb = embedding_constant(lens, bg);
  const GridSpec& grid = lens.grid();
  for (std::size_t e = 0; e < sols.size(); ++e) {
    TensorFieldGrid f = sols[e].u;
    for (int q = 0; q < alpha_t; ++q) f = partial_derivative(f, 0, fd);
    for (int q = 0; q < alpha_x; ++q) f = partial_derivative(f, 1, fd);
    double sup = 0.0;
    for (int k = 0; k < grid.slices(); ++k) {
      const Window w = lens.inner(k);
      if (!f.valid(k).contains(w)) throw StencilError("derivative not available on the lens");
      for (int i = w.lo; i <= w.hi; ++i) sup = std::max(sup, pointwise_norm(f.point(k, i), f.slots(), f.upper_mask(), m));
    }
    double emax = 0.0;
    for (int k = 0; k < grid.slices(); ++k) emax = std::max(emax, curve.members[e].E(order, k));
    const double rhs = r.c_emb / std::sqrt(consts.Ap) * std::sqrt(emax);
    r.eps.push_back(sols[e].eps);
    r.lhs.push_back(sup);
    r.rhs.push_back(rhs);
    const double ratio = rhs > 0 ? sup / rhs : (sup > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    r.ratio.push_back(ratio);
    r.max_ratio = std::max(r.max_ratio, ratio);
  }
  r.pass = r.max_ratio <= 1.0;
  return r;
}

}  // namespace genwave
