#pragma once

// Method-of-lines RK4 solver for
//   g^{ab} D_a D_b u + B^a D_a u + C u = F
// on the (t, x) grid, one member of the eps-net at a time.

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "genwave/errors.hpp"
#include "genwave/geometry.hpp"
#include "genwave/regularization.hpp"
#include "genwave/scenario.hpp"

namespace genwave {

struct SolverOptions {
  double cfl_factor = 0.5;
  double dissipation = 0.0;
  FdScheme fd;
  /// Derivative orders the caller will take of the solution on the lens; sets the required margin.
  int margin_orders = 4;
};

struct CflInfo {
  double c_lens = 1.0;  // sup of characteristic speeds over the lens base, all slices and members
  double c_grid = 1.0;  // same over the whole spatial extent; sets the step
  double dt_max = 0.0;  // cfl_factor * dx / c_grid
  double dt = 0.0;      // largest step <= dt_max dividing the slice spacing
  int substeps = 1;
};

/// Largest |c| with g^{00} c^2 - 2 g^{01} c + g^{11} = 0.
inline double characteristic_speed(const Mat2& gi, double t = 0.0, double x = 0.0) {
  const double g00 = gi.a00, g01 = gi.a01, g11 = gi.a11;
  const double disc = g01 * g01 - g00 * g11;
  if (!(g00 < 0.0) || !(disc > 0.0)) {
    throw HyperbolicityError("equation is not hyperbolic with respect to t at " + detail::point_str(t, x));
  }
  const double s = std::sqrt(disc);
  return std::max(std::fabs((g01 + s) / g00), std::fabs((g01 - s) / g00));
}

inline CflInfo cfl_timestep(const MetricFamily& fam, Interval base, double cfl_factor = 0.5) {
  if (!(cfl_factor > 0.0 && cfl_factor <= 1.0)) throw CflError("cfl_factor must lie in (0, 1]");
  const GridSpec& grid = fam.grid;
  CflInfo info;
  info.c_lens = 0.0;
  info.c_grid = 0.0;
  for (const MetricMember& mem : fam.members) {
    const int ns = mem.time_dependent() ? grid.slices() : 1;
    for (int k = 0; k < ns; ++k)
      for (int i = 0; i < grid.nx; ++i) {
        const double t = grid.tau(k), x = grid.x(i);
        const double c = characteristic_speed(mem.inverse(t, i), t, x);
        info.c_grid = std::max(info.c_grid, c);
        if (base.contains(x)) info.c_lens = std::max(info.c_lens, c);
      }
  }
  if (info.c_lens == 0.0) info.c_lens = info.c_grid;
  info.dt_max = cfl_factor * grid.dx() / info.c_grid;
  info.substeps = std::max(1, static_cast<int>(std::ceil(grid.dtau() / info.dt_max - 1e-9)));
  info.dt = grid.dtau() / info.substeps;
  return info;
}

/// Grid samples of Cauchy data: u0 and u1 = D_xi u on the initial slice, [i * nc + A].
/// `source` is an optional extra right-hand side added to F (same layout, time-independent).
struct CauchyData {
  Rank rank = Rank::Scalar;
  std::vector<double> u0, u1, source;
};

inline CauchyData sample_cauchy_data(const DataSpec& spec, Rank rank, const GridSpec& grid, double eps) {
  const int nc = rank_components(rank);
  if (static_cast<int>(spec.u0.size()) != nc || static_cast<int>(spec.u1.size()) != nc) {
    throw RankError("initial data component count does not match the field rank");
  }
  CauchyData d;
  d.rank = rank;
  d.u0.resize(static_cast<std::size_t>(grid.nx) * nc);
  d.u1.resize(d.u0.size());
  for (int i = 0; i < grid.nx; ++i)
    for (int c = 0; c < nc; ++c) {
      d.u0[i * nc + c] = spec.u0[c].eval({grid.t0, grid.x(i), eps});
      d.u1[i * nc + c] = spec.u1[c].eval({grid.t0, grid.x(i), eps});
    }
  return d;
}

/// u and v = partial_t u on the initial slice.
struct InitialState {
  std::vector<double> u, v;
};

namespace detail {

using Small = std::array<double, 4>;  // nc x nc matrix, [A * nc + B]

/// Connection matrices (Gm_b)^A_B acting on the field components.
inline std::array<Small, 2> connection_matrices(Rank rank, const Christoffel& gam) {
  std::array<Small, 2> gm{};
  if (rank == Rank::Scalar) return gm;
  for (int b = 0; b < 2; ++b)
    for (int A = 0; A < 2; ++A)
      for (int B = 0; B < 2; ++B) gm[b][A * 2 + B] = rank == Rank::Vector ? gam(A, b, B) : -gam(B, b, A);
  return gm;
}

inline double fd_x(const double* f, int stride, int i, int n, double h, int order) {
  auto at = [&](int q) { return f[static_cast<std::size_t>(q) * stride]; };
  if (order == 4 && i >= 2 && i <= n - 3) return (at(i - 2) - 8 * at(i - 1) + 8 * at(i + 1) - at(i + 2)) / (12 * h);
  if (i >= 1 && i <= n - 2) return (at(i + 1) - at(i - 1)) / (2 * h);
  if (i == 0) return (-3 * at(0) + 4 * at(1) - at(2)) / (2 * h);
  return (3 * at(n - 1) - 4 * at(n - 2) + at(n - 3)) / (2 * h);
}

}  // namespace detail

/// partial_t u from u0 and u1 = xi^a D_a u:
///   v = (u1 - xi^x D_x u0 - xi^t (D_t - partial_t) u0) / xi^t.
inline InitialState convert_initial_data(const CauchyData& data, const MetricMember& mem, const BackgroundGeometry& bg,
                                         FdScheme fd = {}) {
  const GridSpec& grid = mem.grid();
  const int nc = rank_components(data.rank);
  const int n = grid.nx;
  InitialState s;
  s.u = data.u0;
  s.v.assign(data.u0.size(), 0.0);
  const double t0 = grid.t0;
  for (int i = 0; i < n; ++i) {
    const Vec2 xi = mem.xi(t0, i);
    if (std::fabs(xi[0]) < 1e-12) {
      throw DegenerateNormalError("xi^t vanishes on the initial slice at " + detail::point_str(t0, grid.x(i)));
    }
    std::array<detail::Small, 2> gm{};
    if (!bg.flat() && data.rank != Rank::Scalar) gm = detail::connection_matrices(data.rank, bg.christoffel(t0, grid.x(i)));
    for (int A = 0; A < nc; ++A) {
      double dxu = detail::fd_x(data.u0.data() + A, nc, i, n, grid.dx(), fd.order);
      double gtu = 0.0;
      for (int B = 0; B < nc; ++B) {
        dxu += gm[1][A * nc + B] * data.u0[i * nc + B];
        gtu += gm[0][A * nc + B] * data.u0[i * nc + B];
      }
      s.v[i * nc + A] = (data.u1[i * nc + A] - xi[1] * dxu - xi[0] * gtu) / xi[0];
    }
  }
  return s;
}

/// Solution samples on every slice: u with v = partial_t u attached as its time derivative.
struct Solution {
  double eps = 1.0;
  TensorFieldGrid u;
  CflInfo cfl;
  long steps = 0;
};

namespace detail {

/// Coefficients of the first-order system at one point:
///   v_t = (F - Mu u - Mv v - Mx u_x - 2 g01 v_x - g11 u_xx) / g00.
struct PointOperator {
  double g00 = -1, g01 = 0, g11 = 1;
  Small Mu{}, Mv{}, Mx{};
  std::array<double, 2> F{};
};

class Operator {
 public:
  Operator(const MetricMember& mem, const CoefficientMember& coeffs, const BackgroundGeometry& bg,
           const std::vector<double>* source)
      : mem_(mem), co_(coeffs), bg_(bg), source_(source), nc_(rank_components(coeffs.rank)) {
    bool dyn = mem.time_dependent() || bg.time_dependent();
    for (const auto* group : {&co_.B, &co_.C, &co_.F})
      for (const auto& s : *group) dyn = dyn || s.time_dependent();
    dynamic_ = dyn;
    if (!dynamic_) {
      const int n = mem.grid().nx;
      table_.resize(n);
      for (int i = 0; i < n; ++i) table_[i] = compute(mem.grid().t0, i);
    }
  }

  PointOperator at(double t, int i) const { return dynamic_ ? compute(t, i) : table_[i]; }
  int components() const { return nc_; }

 private:
  PointOperator compute(double t, int i) const {
    const int nc = nc_;
    PointOperator p;
    const Mat2 gi = mem_.inverse(t, i);
    p.g00 = gi.a00;
    p.g01 = gi.a01;
    p.g11 = gi.a11;
    std::array<Small, 2> Bm{};
    if (!co_.b_zero)
      for (int a = 0; a < 2; ++a)
        for (int q = 0; q < nc * nc; ++q) Bm[a][q] = co_.B[a * nc * nc + q](t, i);
    for (int q = 0; q < nc * nc; ++q) {
      p.Mu[q] = co_.c_zero ? 0.0 : co_.C[q](t, i);
      p.Mv[q] = Bm[0][q];
      p.Mx[q] = Bm[1][q];
    }
    for (int A = 0; A < nc; ++A) {
      p.F[A] = co_.f_zero ? 0.0 : co_.F[A](t, i);
      if (source_) p.F[A] += (*source_)[static_cast<std::size_t>(i) * nc + A];
    }
    if (bg_.flat()) return p;

    const double x = mem_.grid().x(i);
    const Christoffel gam = bg_.christoffel(t, x);
    std::array<double, 2> gc{};
    for (int d = 0; d < 2; ++d)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) gc[d] += gi(a, b) * gam(d, a, b);
    for (int A = 0; A < nc; ++A) {
      p.Mv[A * nc + A] -= gc[0];
      p.Mx[A * nc + A] -= gc[1];
    }
    if (co_.rank == Rank::Scalar) return p;

    const auto gm = connection_matrices(co_.rank, gam);
    const auto dgam = bg_.christoffel_gradient(t, x);
    const std::array<Small, 2> dg0 = connection_matrices(co_.rank, dgam[0]);
    const std::array<Small, 2> dg1 = connection_matrices(co_.rank, dgam[1]);
    auto dgm = [&](int a, int b) -> const Small& { return a == 0 ? dg0[b] : dg1[b]; };
    for (int A = 0; A < 2; ++A)
      for (int B = 0; B < 2; ++B) {
        const int q = A * 2 + B;
        for (int b = 0; b < 2; ++b) {
          p.Mv[q] += 2.0 * gi(0, b) * gm[b][q];
          p.Mx[q] += 2.0 * gi(1, b) * gm[b][q];
        }
        double mu = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            double prod = 0.0;
            for (int E = 0; E < 2; ++E) prod += gm[a][A * 2 + E] * gm[b][E * 2 + B];
            mu += gi(a, b) * (dgm(a, b)[q] + prod);
          }
        for (int d = 0; d < 2; ++d) mu -= gc[d] * gm[d][q];
        for (int a = 0; a < 2; ++a)
          for (int E = 0; E < 2; ++E) mu += Bm[a][A * 2 + E] * gm[a][E * 2 + B];
        p.Mu[q] += mu;
      }
    return p;
  }

  const MetricMember& mem_;
  const CoefficientMember& co_;
  const BackgroundGeometry& bg_;
  const std::vector<double>* source_;
  int nc_;
  bool dynamic_ = true;
  std::vector<PointOperator> table_;
};

inline int stencil_radius(const SolverOptions& o) { return std::max(o.fd.radius(), o.dissipation > 0.0 ? 2 : 0); }

/// Valid index window of the solution after `steps` RK4 steps started on the full grid.
inline Window solver_window(const GridSpec& grid, long steps, int radius) {
  const long shrink = 4L * radius * steps;
  return {static_cast<int>(std::min<long>(shrink, grid.nx)), static_cast<int>(grid.nx - 1 - std::min<long>(shrink, grid.nx))};
}

}  // namespace detail

/// Throws DomainError unless every lens slice, widened by the derivative margin,
/// stays inside the window the solver can fill.
inline void check_extent(const Lens& lens, const CflInfo& cfl, const SolverOptions& opt) {
  const GridSpec& grid = lens.grid();
  const int r = detail::stencil_radius(opt);
  const int rd = opt.fd.radius();
  const int J = opt.margin_orders;
  double need_lo = grid.a, need_hi = grid.b;
  bool ok = true;
  for (int k = 0; k <= grid.nt; ++k) {
    const int kk = std::min(k + J, grid.nt);
    const Window w = detail::solver_window(grid, static_cast<long>(kk) * cfl.substeps, r);
    const Window s = lens.support(k);
    const int margin = (J + 1) * rd;
    if (s.lo < w.lo + margin || s.hi > w.hi - margin) ok = false;
    const double cells = 4.0 * r * kk * cfl.substeps + margin;
    need_lo = std::min(need_lo, grid.x(s.lo) - cells * grid.dx());
    need_hi = std::max(need_hi, grid.x(s.hi) + cells * grid.dx());
  }
  if (!ok) {
    std::ostringstream os;
    os.precision(6);
    const double pad_lo = grid.a - need_lo, pad_hi = need_hi - grid.b;
    os << "spatial extent [" << grid.a << ", " << grid.b << "] is too small for the lens: the scheme's domain of "
       << "dependence shrinks by " << 4 * r << " cells per step; widen the extent by about " << std::max(pad_lo, 0.0)
       << " on the left and " << std::max(pad_hi, 0.0) << " on the right (more if nx is kept fixed)";
    throw DomainError(os.str());
  }
}

/// Advances one member from converted data over all slices of the lens grid.
inline Solution solve_one(const MetricMember& mem, const CoefficientMember& coeffs, const InitialState& init,
                          const CauchyData& data, const Lens& lens, const BackgroundGeometry& bg, const CflInfo& cfl,
                          const SolverOptions& opt = {}) {
  opt.fd.validate();
  const GridSpec& grid = lens.grid();
  const int n = grid.nx;
  const int nc = rank_components(coeffs.rank);
  if (init.u.size() != static_cast<std::size_t>(n) * nc) throw RankError("initial state size does not match the grid");
  if (cfl.dt > cfl.dt_max * (1 + 1e-12)) throw CflError("time step violates the CFL bound");
  check_extent(lens, cfl, opt);

  const detail::Operator op(mem, coeffs, bg, data.source.empty() ? nullptr : &data.source);
  const int r = detail::stencil_radius(opt);
  const double h = grid.dx();
  const double ko = opt.dissipation / (16.0 * h);

  Solution sol;
  sol.eps = mem.eps();
  sol.cfl = cfl;
  sol.u = TensorFieldGrid(grid, coeffs.rank, 0);
  sol.u.enable_time_derivative();

  std::vector<double> u = init.u, v = init.v;
  const std::size_t N = u.size();
  std::vector<double> ku[4], kv[4];
  for (int q = 0; q < 4; ++q) {
    ku[q].assign(N, 0.0);
    kv[q].assign(N, 0.0);
  }
  std::vector<double> us(N), vs(N);

  auto store = [&](int k, Window w) {
    sol.u.valid(k) = w;
    auto& dt = sol.u.time_derivative();
    for (int i = w.lo; i <= w.hi; ++i)
      for (int c = 0; c < nc; ++c) {
        sol.u.at(k, i, c) = u[i * nc + c];
        dt[(static_cast<std::size_t>(k) * n + i) * nc + c] = v[i * nc + c];
      }
  };

  auto rhs = [&](double t, const std::vector<double>& U, const std::vector<double>& V, Window in, std::vector<double>& dU,
                 std::vector<double>& dV) {
    const Window out{in.lo + r, in.hi - r};
    for (int i = out.lo; i <= out.hi; ++i) {
      const detail::PointOperator p = op.at(t, i);
      for (int A = 0; A < nc; ++A) {
        const double* uc = U.data() + A;
        const double* vc = V.data() + A;
        const double ux = detail::dx1([&](int q) { return uc[q * nc]; }, i, h, opt.fd.order);
        const double vx = detail::dx1([&](int q) { return vc[q * nc]; }, i, h, opt.fd.order);
        const double uxx = detail::dx2([&](int q) { return uc[q * nc]; }, i, h, opt.fd.order);
        double acc = p.F[A] - 2.0 * p.g01 * vx - p.g11 * uxx;
        for (int B = 0; B < nc; ++B) {
          const double uxB = B == A ? ux : detail::dx1([&](int q) { return U[q * nc + B]; }, i, h, opt.fd.order);
          acc -= p.Mu[A * nc + B] * U[i * nc + B] + p.Mv[A * nc + B] * V[i * nc + B] + p.Mx[A * nc + B] * uxB;
        }
        double du = V[i * nc + A];
        double dv = acc / p.g00;
        if (ko != 0.0) {
          auto d4 = [&](const double* f) {
            return f[(i - 2) * nc] - 4 * f[(i - 1) * nc] + 6 * f[i * nc] - 4 * f[(i + 1) * nc] + f[(i + 2) * nc];
          };
          du -= ko * d4(uc);
          dv -= ko * d4(vc);
        }
        dU[i * nc + A] = du;
        dV[i * nc + A] = dv;
      }
    }
    return out;
  };

  Window w{0, n - 1};
  store(0, w);
  long step = 0;
  const double dt = cfl.dt;
  for (int k = 1; k <= grid.nt; ++k) {
    for (int s = 0; s < cfl.substeps; ++s, ++step) {
      const double t = grid.t0 + static_cast<double>(step) * dt;
      const Window w1 = rhs(t, u, v, w, ku[0], kv[0]);
      for (int i = w1.lo * nc; i < (w1.hi + 1) * nc; ++i) {
        us[i] = u[i] + 0.5 * dt * ku[0][i];
        vs[i] = v[i] + 0.5 * dt * kv[0][i];
      }
      const Window w2 = rhs(t + 0.5 * dt, us, vs, w1, ku[1], kv[1]);
      for (int i = w2.lo * nc; i < (w2.hi + 1) * nc; ++i) {
        us[i] = u[i] + 0.5 * dt * ku[1][i];
        vs[i] = v[i] + 0.5 * dt * kv[1][i];
      }
      const Window w3 = rhs(t + 0.5 * dt, us, vs, w2, ku[2], kv[2]);
      for (int i = w3.lo * nc; i < (w3.hi + 1) * nc; ++i) {
        us[i] = u[i] + dt * ku[2][i];
        vs[i] = v[i] + dt * kv[2][i];
      }
      const Window w4 = rhs(t + dt, us, vs, w3, ku[3], kv[3]);
      bool finite = true;
      for (int i = w4.lo * nc; i < (w4.hi + 1) * nc; ++i) {
        u[i] += dt / 6.0 * (ku[0][i] + 2 * ku[1][i] + 2 * ku[2][i] + ku[3][i]);
        v[i] += dt / 6.0 * (kv[0][i] + 2 * kv[1][i] + 2 * kv[2][i] + kv[3][i]);
        finite = finite && std::isfinite(u[i]) && std::isfinite(v[i]);
      }
      if (!finite) {
        std::ostringstream os;
        os << "non-finite values at step " << step << " (t=" << t + dt << ", eps=" << mem.eps() << ")";
        throw InstabilityError(os.str(), step);
      }
      w = w4;
    }
    store(k, w);
  }
  sol.steps = step;
  return sol;
}

/// Convenience: converts the data and solves.
inline Solution solve_one(const MetricMember& mem, const CoefficientMember& coeffs, const CauchyData& data,
                          const Lens& lens, const BackgroundGeometry& bg, const CflInfo& cfl,
                          const SolverOptions& opt = {}) {
  const InitialState init = convert_initial_data(data, mem, bg, opt.fd);
  return solve_one(mem, coeffs, init, data, lens, bg, cfl, opt);
}

namespace detail {

template <class E>
bool rethrow_as(const std::exception_ptr& p, const std::string& prefix) {
  try {
    std::rethrow_exception(p);
  } catch (const E& e) {
    if constexpr (std::is_same_v<E, InstabilityError>) throw InstabilityError(prefix + e.what(), e.step());
    else if constexpr (std::is_same_v<E, DomainError>) throw DomainError(prefix + e.what(), e.max_gamma());
    else throw E(prefix + e.what());
  } catch (...) {
    return false;
  }
  return false;
}

}  // namespace detail

/// Solves every member; data holds one entry per member, or a single entry shared by all.
/// Members run concurrently; the result order follows the net.
inline std::vector<Solution> solve_family(const MetricFamily& fam, const CoefficientFamily& coeffs,
                                          const std::vector<CauchyData>& data, const Lens& lens,
                                          const BackgroundGeometry& bg, const CflInfo& cfl,
                                          const SolverOptions& opt = {}) {
  if (data.size() != 1 && data.size() != fam.size()) throw PreconditionError("need one set of Cauchy data per member");
  std::vector<std::future<Solution>> jobs;
  for (std::size_t j = 0; j < fam.size(); ++j) {
    const CauchyData& d = data.size() == 1 ? data[0] : data[j];
    jobs.push_back(std::async(std::launch::async, [&, j, dd = &d] {
      return solve_one(fam[j], coeffs[j], *dd, lens, bg, cfl, opt);
    }));
  }
  std::vector<Solution> out;
  std::exception_ptr first;
  std::string prefix;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    try {
      out.push_back(jobs[j].get());
    } catch (...) {
      if (!first) {
        first = std::current_exception();
        std::ostringstream os;
        os.precision(10);
        os << "member eps=" << fam.net[j] << ": ";
        prefix = os.str();
      }
    }
  }
  if (first) {
    detail::rethrow_as<InstabilityError>(first, prefix);
    detail::rethrow_as<HyperbolicityError>(first, prefix);
    detail::rethrow_as<DegenerateNormalError>(first, prefix);
    detail::rethrow_as<DomainError>(first, prefix);
    detail::rethrow_as<StencilError>(first, prefix);
    detail::rethrow_as<CflError>(first, prefix);
    detail::rethrow_as<Error>(first, prefix);
    std::rethrow_exception(first);
  }
  return out;
}

}  // namespace genwave
