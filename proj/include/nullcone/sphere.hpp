#pragma once

// Real spherical harmonics on S^2 with orthonormal normalisation
//   Y_l0 = Pbar_l^0(cos theta),
//   Y_lm = sqrt(2) Pbar_l^m(cos theta) cos(m phi),   m > 0,
//   Y_l,-m = sqrt(2) Pbar_l^m(cos theta) sin(m phi), m > 0,
// stored in a flat vector at index l*l + l + m. No Condon-Shortley phase.

#include <array>
#include <memory>

#include <Eigen/Core>

namespace nullcone {

/// Spectral coefficients a_lm of a real field on S^2, 0 <= l <= L.
using AngularField = Eigen::VectorXd;

constexpr int num_coeffs(int lmax) { return (lmax + 1) * (lmax + 1); }
constexpr int coeff_index(int l, int m) { return l * l + l + m; }
/// Degree l of the coefficient stored at flat index k.
int degree_of(int k);

/// Real orthonormal harmonics Y_k at a direction (need not be normalised).
Eigen::RowVectorXd sh_basis_at(int lmax, const Eigen::Vector3d& dir);

enum class Axis { x = 0, y = 1, z = 2 };

/// Tensor grid of Gauss-Legendre colatitudes and uniform azimuths, exact for
/// band-limited integrands up to a given polynomial degree.
class AngularGrid {
 public:
  /// Grid integrating spherical harmonics of degree <= exact_degree exactly.
  AngularGrid(int lmax, int exact_degree);

  int lmax() const { return lmax_; }
  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }
  int size() const { return n_theta_ * n_phi_; }

  /// Node k = i * n_phi + j.
  double theta(int k) const { return theta_(k / n_phi_); }
  double phi(int k) const { return phi_(k % n_phi_); }
  const Eigen::VectorXd& weights() const { return weights_; }

  /// Node values by coefficient: size() x num_coeffs(lmax).
  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::MatrixXd& basis_dtheta() const { return basis_dtheta_; }
  /// (1/sin theta) d/dphi of each basis function.
  const Eigen::MatrixXd& basis_dphi_over_sin() const { return basis_dphi_sin_; }

  Eigen::VectorXd synthesize(const AngularField& coeffs) const;
  AngularField analyze(const Eigen::VectorXd& values) const;
  double integrate(const Eigen::VectorXd& values) const;

 private:
  int lmax_, n_theta_, n_phi_;
  Eigen::VectorXd theta_, phi_, weights_;
  Eigen::MatrixXd basis_, basis_dtheta_, basis_dphi_sin_;
};

/// Angular calculus at fixed truncation: transforms, Laplace-Beltrami,
/// gradients, rotation generators and dealiased products.
class Sphere {
 public:
  explicit Sphere(int lmax);

  int lmax() const { return lmax_; }
  int num_coeffs() const { return nullcone::num_coeffs(lmax_); }

  /// Grid exact for the projection of a product of `factors` band-limited
  /// fields (1: plain transforms, 2: 3/2-rule, 3: cubic products).
  const AngularGrid& grid(int factors = 1) const;

  Eigen::VectorXd synthesize(const AngularField& f, int factors = 1) const {
    return grid(factors).synthesize(f);
  }
  AngularField analyze(const Eigen::VectorXd& values, int factors = 1) const {
    return grid(factors).analyze(values);
  }

  /// -l(l+1) per coefficient.
  const Eigen::VectorXd& laplacian_eigenvalues() const { return lap_; }
  AngularField laplace_beltrami(const AngularField& f) const;

  /// Node values of |grad_{S^2} f|^2 on grid(factors).
  Eigen::VectorXd gradient_sq(const AngularField& f, int factors = 2) const;
  /// Cartesian components of grad_{S^2} f at the nodes of grid(factors), size() x 3.
  Eigen::MatrixXd gradient(const AngularField& f, int factors = 1) const;
  /// Rotation generator Omega_axis = (x cross grad)_axis applied to f.
  AngularField rotate(const AngularField& f, Axis axis) const;

  /// sum_k (l_k (l_k + 1))^n a_k^2: integral of |d_omega^n f|^2 summed over all
  /// words of n rotation generators.
  double omega_power_norm_sq(const AngularField& f, int n) const;

  AngularField product(const AngularField& f, const AngularField& g) const;
  AngularField product(const AngularField& f, const AngularField& g, const AngularField& h) const;

  /// Cartesian unit vector of node k of grid(factors).
  Eigen::Vector3d direction(int k, int factors = 1) const;

 private:
  int lmax_;
  std::array<std::shared_ptr<const AngularGrid>, 3> grids_;
  Eigen::VectorXd lap_;
};

}  // namespace nullcone
