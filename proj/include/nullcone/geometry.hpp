#pragma once

// Null coordinates on Minkowski space and the inversion used for the
// conformal compactification about a vertex (T*, 0).

#include <cmath>
#include <Eigen/Core>

#include "nullcone/error.hpp"

namespace nullcone {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

/// Point in (u, v, omega) coordinates, u = (t - r)/2, v = (t + r)/2.
template <typename Scalar = double>
struct NullPoint {
  Scalar u{0};
  Scalar v{0};
  Scalar theta{0};    ///< colatitude of omega
  Scalar azimuth{0};  ///< longitude of omega
  bool direction_defined{true};  ///< false at r = 0

  Scalar r() const { return v - u; }
  Scalar t() const { return u + v; }

  Vec3<Scalar> omega() const {
    using std::cos;
    using std::sin;
    return Vec3<Scalar>(sin(theta) * cos(azimuth), sin(theta) * sin(azimuth),
                        cos(theta));
  }
};

template <typename Scalar>
NullPoint<Scalar> to_null(Scalar t, const Vec3<Scalar>& x) {
  using std::acos;
  using std::atan2;
  const Scalar r = x.norm();
  NullPoint<Scalar> p;
  p.u = (t - r) / 2;
  p.v = (t + r) / 2;
  if (r > Scalar(0)) {
    Scalar c = x(2) / r;
    c = c > Scalar(1) ? Scalar(1) : (c < Scalar(-1) ? Scalar(-1) : c);
    p.theta = acos(c);
    p.azimuth = atan2(x(1), x(0));
  } else {
    p.direction_defined = false;
  }
  return p;
}

/// Inverse of to_null: returns (t, x). At r = 0 the direction is ignored.
template <typename Scalar>
std::pair<Scalar, Vec3<Scalar>> from_null(const NullPoint<Scalar>& p) {
  return {p.t(), p.r() * p.omega()};
}

/// Chart of the inversion about the vertex (T*, 0) with T* = 2U* - 1/2.
template <typename Scalar = double>
struct ConformalChart {
  Scalar u_star_ref{0};
  /// Smallest conformal factor accepted before the chart is declared degenerate.
  Scalar degeneracy_tol{Scalar(1e-14)};

  explicit ConformalChart(Scalar u_star) : u_star_ref(u_star) {}

  Scalar t_star() const { return 2 * u_star_ref - Scalar(0.5); }

  /// Lambda = (t - T*)^2 - |x|^2.
  Scalar lambda(Scalar t, Scalar r) const {
    const Scalar s = t - t_star();
    return (s - r) * (s + r);
  }
};

/// Null data of a physical point relative to a chart and of its image.
template <typename Scalar = double>
struct ConformalNull {
  Scalar u_star, v_star;    ///< (t - T* -/+ r)/2
  Scalar lambda;            ///< 4 u* v*
  Scalar u_tilde, v_tilde;  ///< (4 v*)^-1, (4 u*)^-1
  Scalar r_tilde;           ///< r / Lambda
};

/// Maps (t, x) to (t~, x~) = Lambda^-1 (t - T*, x).
template <typename Scalar>
std::pair<Scalar, Vec3<Scalar>> conformal_forward(const ConformalChart<Scalar>& chart,
                                                  Scalar t, const Vec3<Scalar>& x) {
  const Scalar lam = chart.lambda(t, x.norm());
  if (!(lam > chart.degeneracy_tol)) throw DegenerateChart("conformal factor Lambda <= tolerance");
  return {(t - chart.t_star()) / lam, x / lam};
}

/// Inverse map. The inversion is its own inverse up to the shift by T*.
template <typename Scalar>
std::pair<Scalar, Vec3<Scalar>> conformal_inverse(const ConformalChart<Scalar>& chart,
                                                  Scalar t_tilde, const Vec3<Scalar>& x_tilde) {
  const Scalar r = x_tilde.norm();
  const Scalar lam_tilde = (t_tilde - r) * (t_tilde + r);
  if (!(lam_tilde > chart.degeneracy_tol)) throw DegenerateChart("image conformal factor <= tolerance");
  return {t_tilde / lam_tilde + chart.t_star(), x_tilde / lam_tilde};
}

template <typename Scalar>
ConformalNull<Scalar> conformal_null(const ConformalChart<Scalar>& chart, Scalar t, Scalar r) {
  ConformalNull<Scalar> c;
  const Scalar s = t - chart.t_star();
  c.u_star = (s - r) / 2;
  c.v_star = (s + r) / 2;
  c.lambda = 4 * c.u_star * c.v_star;
  if (!(c.lambda > chart.degeneracy_tol)) throw DegenerateChart("conformal factor Lambda <= tolerance");
  c.u_tilde = 1 / (4 * c.v_star);
  c.v_tilde = 1 / (4 * c.u_star);
  c.r_tilde = r / c.lambda;
  return c;
}

/// Scalar factors with Lb~ = f_Lb L, L~ = f_L Lb, e~ = f_e e.
template <typename Scalar = double>
struct FrameFactors {
  Scalar f_Lb, f_L, f_e;
};

template <typename Scalar>
FrameFactors<Scalar> conformal_frame_factors(Scalar u_star, Scalar v_star) {
  if (!(4 * u_star * v_star > Scalar(1e-14))) throw DegenerateChart("conformal factor Lambda <= tolerance");
  return {-4 * v_star * v_star, -4 * u_star * u_star, 4 * u_star * v_star};
}

}  // namespace nullcone
