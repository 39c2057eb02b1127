#pragma once

// Small quadrature toolbox shared by the checkers and norm reductions.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nullcone/error.hpp"

namespace nullcone {

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
template <typename Scalar = double>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
gauss_legendre(int n) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (n < 1) throw DomainError("gauss_legendre: n < 1");
  Vec x(n), w(n);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    Scalar z = std::cos(pi * (i + Scalar(0.75)) / (n + Scalar(0.5)));
    Scalar dp = 0;
    for (int it = 0; it < 100; ++it) {
      Scalar p0 = 1, p1 = 0;
      for (int k = 1; k <= n; ++k) {
        const Scalar p2 = p1;
        p1 = p0;
        p0 = ((2 * k - 1) * z * p1 - (k - 1) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1);
      const Scalar dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < Scalar(1e-16)) break;
    }
    // recompute derivative at the converged node
    Scalar p0 = 1, p1 = 0;
    for (int k = 1; k <= n; ++k) {
      const Scalar p2 = p1;
      p1 = p0;
      p0 = ((2 * k - 1) * z * p1 - (k - 1) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1);
    x(i) = -z;
    x(n - 1 - i) = z;
    w(i) = w(n - 1 - i) = 2 / ((1 - z * z) * dp * dp);
  }
  if (n % 2 == 1) x(n / 2) = 0;
  return {x, w};
}

/// n-point Gauss-Legendre rule applied to f on [a, b].
template <typename Fn>
double integrate_gl(Fn&& f, double a, double b, int n = 20) {
  static thread_local std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> cache;
  if (static_cast<int>(cache.size()) <= n) cache.resize(n + 1);
  if (cache[n].first.size() != n) cache[n] = gauss_legendre<double>(n);
  const auto& [x, w] = cache[n];
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0;
  for (int i = 0; i < n; ++i) s += w(i) * f(mid + half * x(i));
  return s * half;
}

/// Integral of f over [0, b] for f with an integrable power singularity at 0.
/// Geometric cells [b q^{k+1}, b q^k] down to b*floor, each with a GL rule.
template <typename Fn>
double integrate_graded(Fn&& f, double b, double floor = 1e-300, double q = 0.5, int n = 20) {
  double s = 0, hi = b;
  while (hi > b * floor) {
    const double lo = hi * q;
    s += integrate_gl(f, lo, hi, n);
    hi = lo;
  }
  return s;
}

/// Integral of f over [a, infinity) via the map u = a + s/(1-s) on graded cells.
template <typename Fn>
double integrate_to_infinity(Fn&& f, double a, int cells = 400, int n = 20) {
  auto g = [&](double s) {
    const double one_minus = 1 - s;
    return f(a + s / one_minus) / (one_minus * one_minus);
  };
  // cells cluster toward s = 1 geometrically in (1 - s)
  double s = 0;
  double lo = 0;
  for (int k = 0; k < cells; ++k) {
    const double hi = 1 - std::pow(0.5, (k + 1) * 0.25);
    if (1 - hi < 1e-14) break;
    s += integrate_gl(g, lo, hi, n);
    lo = hi;
  }
  return s;
}

/// Trapezoid rule on nodes.
inline double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw SizeMismatch("trapezoid: node/value size mismatch");
  double s = 0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) s += 0.5 * (x(i + 1) - x(i)) * (y(i) + y(i + 1));
  return s;
}

// Fornberg weights for the m-th derivative at x0 from the given abscissae.
inline Eigen::VectorXd fd_weights(double x0, const std::vector<double>& x, int m) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, m + 1);
  double c1 = 1, c4 = x[0] - x0;
  c(0, 0) = 1;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c.col(m);
}

/// Integral of the piecewise-cubic interpolant through (x, y): each interval uses
/// its four nearest nodes and 3-point Gauss-Legendre, which is exact for cubics.
inline double cubic_panels(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.size();
  if (n != y.size()) throw SizeMismatch("cubic_panels: node/value size mismatch");
  if (n < 4) return trapezoid(x, y);
  static const double g[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  static const double w[3] = {5.0 / 9, 8.0 / 9, 5.0 / 9};
  double s = 0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Eigen::Index f = std::clamp<Eigen::Index>(i - 1, 0, n - 4);
    const double a = x(i), b = x(i + 1);
    for (int k = 0; k < 3; ++k) {
      const double xx = 0.5 * (a + b) + 0.5 * (b - a) * g[k];
      double val = 0;
      for (Eigen::Index p = f; p < f + 4; ++p) {
        double l = 1;
        for (Eigen::Index q = f; q < f + 4; ++q)
          if (q != p) l *= (xx - x(q)) / (x(p) - x(q));
        val += l * y(p);
      }
      s += 0.5 * (b - a) * w[k] * val;
    }
  }
  return s;
}

}  // namespace nullcone
