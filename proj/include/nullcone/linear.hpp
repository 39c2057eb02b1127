#pragma once

// Closed-form and quadrature solutions of the linear wave equation with cone data.

#include <functional>

#include <Eigen/Core>

#include "nullcone/cone_data.hpp"
#include "nullcone/nonlinearity.hpp"

namespace nullcone {

/// Spherically symmetric data g(v); G(s) = s g(s).
struct SymSolution {
  std::function<double(double)> G;
  std::function<double(double)> dG;  ///< G'(s); centred differences of G when empty
  double r_floor = 1e-6;

  double G_prime(double s) const;
  /// phi(t, r) = (G(v) - G(u)) / r.
  double operator()(double t, double r) const;

  struct NullDerivatives {
    double phi, du, dv;
  };
  /// phi and its u, v derivatives at (u, v).
  NullDerivatives derivatives(double u, double v) const;
};

/// l = 0 part of the data as a symmetric solution.
SymSolution symmetric_part(const ConeData& data);
SymSolution symmetric_from_profile(std::function<double(double)> g);

double exact_spherical(const SymSolution& sol, double t, double r);
double exact_spherical(const ConeData& data, double t, double r);

/// Solution on the axis r = 0: spherical mean of d_v(v phi0) at v = t/2.
double axis_value(const ConeData& data, double t);

/// Solution at (t, x) inside the cone from the boosted spherical mean.
/// The eta-quadrature uses a Gauss-Legendre grid aligned with x of degree quad_lmax
/// (default max(2 L, 48)).
double interior_value(const ConeData& data, double t, const Eigen::Vector3d& x, int quad_lmax = 0);

/// Closed-form field with its derivatives, in Cartesian (t, x).
struct ExactField {
  std::function<double(double, const Eigen::Vector3d&)> phi;
  std::function<Eigen::Vector4d(double, const Eigen::Vector3d&)> dphi;  ///< (d_t, d_x, d_y, d_z)
  std::function<double(double, const Eigen::Vector3d&)> box;           ///< (-d_t^2 + Laplacian) phi
};

using SourceFunction = std::function<double(double, const Eigen::Vector3d&)>;

/// F_mms = box phi - F(phi, d phi).
SourceFunction mms_source(const ExactField& exact, const Nonlinearity& nonlin);

/// Cone data of an exact field: phi(v, v omega) analysed on an angular grid.
ConeData cone_data_of(const ExactField& exact, int lmax, const Eigen::VectorXd& nodes);

/// (v^delta - u^delta) / r, the linear solution for data v^(delta - 1).
ExactField power_law_solution(double delta);
/// cos(t) (1 + a z) + b t, with box phi = cos(t) (1 + a z).
ExactField smooth_test_field(double a, double b);

}  // namespace nullcone
