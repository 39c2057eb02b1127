#include "nullcone/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nullcone/error.hpp"
#include "nullcone/quadrature.hpp"

namespace nullcone {

namespace {

constexpr double kPi = std::numbers::pi;

// Orthonormal associated Legendre values Pbar[l][m] and their theta
// derivatives at x = cos(theta), normalised so that Y_l0 = Pbar_l^0.
void legendre_table(int lmax, double x, Eigen::MatrixXd& p, Eigen::MatrixXd& dp) {
  const double s = std::sqrt(std::max(0.0, 1 - x * x));
  p.setZero(lmax + 1, lmax + 1);
  dp.setZero(lmax + 1, lmax + 1);
  p(0, 0) = 1 / std::sqrt(4 * kPi);
  for (int m = 1; m <= lmax; ++m) p(m, m) = s * std::sqrt((2.0 * m + 1) / (2.0 * m)) * p(m - 1, m - 1);
  for (int m = 0; m < lmax; ++m) p(m + 1, m) = std::sqrt(2.0 * m + 3) * x * p(m, m);
  for (int m = 0; m <= lmax; ++m) {
    for (int l = m + 2; l <= lmax; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1) / (double(l) * l - double(m) * m));
      const double b = std::sqrt((double(l - 1) * (l - 1) - double(m) * m) / (4.0 * (l - 1) * (l - 1) - 1));
      p(l, m) = a * (x * p(l - 1, m) - b * p(l - 2, m));
    }
  }
  // (1 - x^2) dP/dx = c P_{l-1} - l x P_l, dP/dtheta = -s dP/dx
  for (int l = 0; l <= lmax; ++l) {
    for (int m = 0; m <= l; ++m) {
      const double prev = l - 1 >= m ? p(l - 1, m) : 0.0;
      const double c = l > 0 ? std::sqrt((2.0 * l + 1) * (double(l) * l - double(m) * m) / (2.0 * l - 1)) : 0.0;
      dp(l, m) = s > 0 ? -(c * prev - l * x * p(l, m)) / s : 0.0;
    }
  }
}

}  // namespace

Eigen::RowVectorXd sh_basis_at(int lmax, const Eigen::Vector3d& dir) {
  const double n = dir.norm();
  if (!(n > 0)) throw DomainError("sh_basis_at: zero direction");
  const double x = std::clamp(dir.z() / n, -1.0, 1.0);
  const double az = std::atan2(dir.y(), dir.x());
  Eigen::MatrixXd p, dp;
  legendre_table(lmax, x, p, dp);
  Eigen::RowVectorXd out(num_coeffs(lmax));
  for (int l = 0; l <= lmax; ++l) {
    out(coeff_index(l, 0)) = p(l, 0);
    for (int m = 1; m <= l; ++m) {
      out(coeff_index(l, m)) = std::sqrt(2.0) * p(l, m) * std::cos(m * az);
      out(coeff_index(l, -m)) = std::sqrt(2.0) * p(l, m) * std::sin(m * az);
    }
  }
  return out;
}

int degree_of(int k) {
  int l = static_cast<int>(std::sqrt(static_cast<double>(k)));
  while (l * l > k) --l;
  while ((l + 1) * (l + 1) <= k) ++l;
  return l;
}

AngularGrid::AngularGrid(int lmax, int exact_degree) : lmax_(lmax) {
  if (lmax < 0) throw DomainError("AngularGrid: negative lmax");
  n_theta_ = std::max(lmax + 1, (exact_degree + 2) / 2);
  n_phi_ = std::max(2 * lmax + 1, exact_degree + 1);
  const auto [x, w] = gauss_legendre<double>(n_theta_);
  theta_.resize(n_theta_);
  for (int i = 0; i < n_theta_; ++i) theta_(i) = std::acos(x(i));
  phi_.resize(n_phi_);
  for (int j = 0; j < n_phi_; ++j) phi_(j) = 2 * kPi * j / n_phi_;

  const int nc = num_coeffs(lmax);
  weights_.resize(size());
  basis_.resize(size(), nc);
  basis_dtheta_.resize(size(), nc);
  basis_dphi_sin_.resize(size(), nc);
  Eigen::MatrixXd p, dp;
  for (int i = 0; i < n_theta_; ++i) {
    legendre_table(lmax, x(i), p, dp);
    const double s = std::sin(theta_(i));
    for (int j = 0; j < n_phi_; ++j) {
      const int k = i * n_phi_ + j;
      weights_(k) = w(i) * 2 * kPi / n_phi_;
      for (int l = 0; l <= lmax; ++l) {
        basis_(k, coeff_index(l, 0)) = p(l, 0);
        basis_dtheta_(k, coeff_index(l, 0)) = dp(l, 0);
        basis_dphi_sin_(k, coeff_index(l, 0)) = 0;
        for (int m = 1; m <= l; ++m) {
          const double c = std::cos(m * phi_(j)), sn = std::sin(m * phi_(j));
          const double r2 = std::sqrt(2.0);
          basis_(k, coeff_index(l, m)) = r2 * p(l, m) * c;
          basis_(k, coeff_index(l, -m)) = r2 * p(l, m) * sn;
          basis_dtheta_(k, coeff_index(l, m)) = r2 * dp(l, m) * c;
          basis_dtheta_(k, coeff_index(l, -m)) = r2 * dp(l, m) * sn;
          basis_dphi_sin_(k, coeff_index(l, m)) = -r2 * m * p(l, m) * sn / s;
          basis_dphi_sin_(k, coeff_index(l, -m)) = r2 * m * p(l, m) * c / s;
        }
      }
    }
  }
}

Eigen::VectorXd AngularGrid::synthesize(const AngularField& coeffs) const {
  if (coeffs.size() != basis_.cols()) throw SizeMismatch("synthesize: coefficient count does not match lmax");
  return basis_ * coeffs;
}

AngularField AngularGrid::analyze(const Eigen::VectorXd& values) const {
  if (values.size() != size()) throw SizeMismatch("analyze: node array does not match the grid");
  return basis_.transpose() * weights_.cwiseProduct(values);
}

double AngularGrid::integrate(const Eigen::VectorXd& values) const {
  if (values.size() != size()) throw SizeMismatch("integrate: node array does not match the grid");
  return weights_.dot(values);
}

Sphere::Sphere(int lmax) : lmax_(lmax) {
  for (int f = 1; f <= 3; ++f) grids_[f - 1] = std::make_shared<const AngularGrid>(lmax, (f + 1) * lmax);
  lap_.resize(num_coeffs());
  for (int k = 0; k < num_coeffs(); ++k) {
    const int l = degree_of(k);
    lap_(k) = -double(l) * (l + 1);
  }
}

const AngularGrid& Sphere::grid(int factors) const {
  if (factors < 1 || factors > 3) throw DomainError("Sphere::grid: factors must be 1, 2 or 3");
  return *grids_[factors - 1];
}

AngularField Sphere::laplace_beltrami(const AngularField& f) const {
  if (f.size() != num_coeffs()) throw SizeMismatch("laplace_beltrami: coefficient count");
  return lap_.cwiseProduct(f);
}

Eigen::MatrixXd Sphere::gradient(const AngularField& f, int factors) const {
  const AngularGrid& g = grid(factors);
  if (f.size() != num_coeffs()) throw SizeMismatch("gradient: coefficient count");
  const Eigen::VectorXd dth = g.basis_dtheta() * f;
  const Eigen::VectorXd dph = g.basis_dphi_over_sin() * f;
  Eigen::MatrixXd out(g.size(), 3);
  for (int k = 0; k < g.size(); ++k) {
    const double th = g.theta(k), ph = g.phi(k);
    const Eigen::Vector3d e_th(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th));
    const Eigen::Vector3d e_ph(-std::sin(ph), std::cos(ph), 0.0);
    out.row(k) = (dth(k) * e_th + dph(k) * e_ph).transpose();
  }
  return out;
}

Eigen::VectorXd Sphere::gradient_sq(const AngularField& f, int factors) const {
  const AngularGrid& g = grid(factors);
  if (f.size() != num_coeffs()) throw SizeMismatch("gradient_sq: coefficient count");
  const Eigen::VectorXd dth = g.basis_dtheta() * f;
  const Eigen::VectorXd dph = g.basis_dphi_over_sin() * f;
  return dth.cwiseAbs2() + dph.cwiseAbs2();
}

AngularField Sphere::rotate(const AngularField& f, Axis axis) const {
  const AngularGrid& g = grid(1);
  if (f.size() != num_coeffs()) throw SizeMismatch("rotate: coefficient count");
  const Eigen::VectorXd dth = g.basis_dtheta() * f;
  const Eigen::VectorXd dph = g.basis_dphi_over_sin() * f;  // (1/sin) d_phi
  Eigen::VectorXd out(g.size());
  for (int k = 0; k < g.size(); ++k) {
    const double th = g.theta(k), ph = g.phi(k);
    const double d_phi = dph(k) * std::sin(th);
    const double cot_dphi = dph(k) * std::cos(th);  // cot(theta) d_phi
    switch (axis) {
      case Axis::x: out(k) = -std::sin(ph) * dth(k) - std::cos(ph) * cot_dphi; break;
      case Axis::y: out(k) = std::cos(ph) * dth(k) - std::sin(ph) * cot_dphi; break;
      case Axis::z: out(k) = d_phi; break;
    }
  }
  return g.analyze(out);
}

double Sphere::omega_power_norm_sq(const AngularField& f, int n) const {
  if (f.size() != num_coeffs()) throw SizeMismatch("omega_power_norm_sq: coefficient count");
  double s = 0;
  for (int k = 0; k < f.size(); ++k) s += std::pow(-lap_(k), n) * f(k) * f(k);
  return s;
}

AngularField Sphere::product(const AngularField& f, const AngularField& g) const {
  const AngularGrid& gr = grid(2);
  return gr.analyze(gr.synthesize(f).cwiseProduct(gr.synthesize(g)));
}

AngularField Sphere::product(const AngularField& f, const AngularField& g, const AngularField& h) const {
  const AngularGrid& gr = grid(3);
  return gr.analyze(gr.synthesize(f).cwiseProduct(gr.synthesize(g)).cwiseProduct(gr.synthesize(h)));
}

Eigen::Vector3d Sphere::direction(int k, int factors) const {
  const AngularGrid& g = grid(factors);
  const double th = g.theta(k), ph = g.phi(k);
  return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

}  // namespace nullcone
