#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace genwave {

/// Number of spacetime dimensions; index 0 is t, index 1 is x.
inline constexpr int kDim = 2;

using Vec2 = std::array<double, 2>;

/// 2x2 matrix, row-major.
struct Mat2 {
  double a00 = 0, a01 = 0, a10 = 0, a11 = 0;

  static constexpr Mat2 identity() { return {1, 0, 0, 1}; }
  static constexpr Mat2 diag(double d0, double d1) { return {d0, 0, 0, d1}; }
  static constexpr Mat2 symmetric(double s00, double s01, double s11) { return {s00, s01, s01, s11}; }

  constexpr double operator()(int r, int c) const {
    return r == 0 ? (c == 0 ? a00 : a01) : (c == 0 ? a10 : a11);
  }
  constexpr double& at(int r, int c) { return r == 0 ? (c == 0 ? a00 : a01) : (c == 0 ? a10 : a11); }

  constexpr double det() const { return a00 * a11 - a01 * a10; }
  constexpr double trace() const { return a00 + a11; }

  /// Inverse via the adjugate; caller checks det != 0.
  constexpr Mat2 inverse() const {
    const double d = det();
    return {a11 / d, -a01 / d, -a10 / d, a00 / d};
  }

  constexpr Vec2 operator*(const Vec2& v) const { return {a00 * v[0] + a01 * v[1], a10 * v[0] + a11 * v[1]}; }
  constexpr Mat2 operator*(const Mat2& b) const {
    return {a00 * b.a00 + a01 * b.a10, a00 * b.a01 + a01 * b.a11,
            a10 * b.a00 + a11 * b.a10, a10 * b.a01 + a11 * b.a11};
  }
  constexpr Mat2 operator*(double s) const { return {a00 * s, a01 * s, a10 * s, a11 * s}; }
  constexpr Mat2 operator+(const Mat2& b) const { return {a00 + b.a00, a01 + b.a01, a10 + b.a10, a11 + b.a11}; }
  constexpr Mat2 operator-(const Mat2& b) const { return {a00 - b.a00, a01 - b.a01, a10 - b.a10, a11 - b.a11}; }

  /// Quadratic form v^T A w.
  constexpr double form(const Vec2& v, const Vec2& w) const {
    return v[0] * (a00 * w[0] + a01 * w[1]) + v[1] * (a10 * w[0] + a11 * w[1]);
  }

  double frobenius() const { return std::sqrt(a00 * a00 + a01 * a01 + a10 * a10 + a11 * a11); }
};

/// Eigenvalues (ascending) of a symmetric 2x2 matrix.
inline std::pair<double, double> symmetric_eigenvalues(const Mat2& s) {
  const double m = 0.5 * (s.a00 + s.a11);
  const double d = 0.5 * (s.a00 - s.a11);
  const double r = std::hypot(d, 0.5 * (s.a01 + s.a10));
  return {m - r, m + r};
}

/// Eigenvalues (ascending) of the pencil S - lambda * P for symmetric S and SPD P.
inline std::pair<double, double> generalized_eigenvalues(const Mat2& s, const Mat2& p) {
  // det(S - l P) = det(P) l^2 - (s00 p11 + s11 p00 - 2 s01 p01) l + det(S)
  const double a = p.det();
  const double b = -(s.a00 * p.a11 + s.a11 * p.a00 - s.a01 * p.a10 - s.a10 * p.a01);
  const double c = s.det();
  const double disc = std::max(0.0, b * b - 4 * a * c);
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  double l1 = q / a;
  double l2 = q != 0.0 ? c / q : 0.0;
  if (l1 > l2) std::swap(l1, l2);
  return {l1, l2};
}

}  // namespace genwave
