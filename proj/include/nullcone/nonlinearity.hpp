#pragma once

#include <array>

#include <Eigen/Core>

namespace nullcone {

/// F(phi, d phi) = C0 phi^3 + C1^mu phi d_mu phi with C1 paired with (d_t, d_x, d_y, d_z).
struct Nonlinearity {
  double C0 = 0;
  std::array<double, 4> C1{0, 0, 0, 0};

  bool is_zero() const { return C0 == 0 && C1[0] == 0 && C1[1] == 0 && C1[2] == 0 && C1[3] == 0; }
  bool needs_derivatives() const { return C1[0] != 0 || C1[1] != 0 || C1[2] != 0 || C1[3] != 0; }

  /// dphi = (d_t, d_x, d_y, d_z) phi
  double operator()(double phi, const Eigen::Vector4d& dphi) const {
    double s = 0;
    for (int k = 0; k < 4; ++k) s += C1[k] * dphi(k);
    return C0 * phi * phi * phi + phi * s;
  }
};

}  // namespace nullcone
