#include "nullcone/linear.hpp"

#include <cmath>
#include <memory>
#include <numbers>

#include <Eigen/Geometry>

#include "nullcone/error.hpp"
#include "nullcone/sphere.hpp"

namespace nullcone {

namespace {

const double kSqrt4Pi = std::sqrt(4 * std::numbers::pi);

}  // namespace

double SymSolution::G_prime(double s) const {
  if (dG) return dG(s);
  const double h = 1e-4 * std::max(s, 1e-3);
  return (-G(s + 2 * h) + 8 * G(s + h) - 8 * G(s - h) + G(s - 2 * h)) / (12 * h);
}

double SymSolution::operator()(double t, double r) const {
  const double u = 0.5 * (t - r), v = 0.5 * (t + r);
  if (u < -1e-15 || r < 0) throw DomainError("exact_spherical: need 0 <= u <= v");
  if (v > 1 + 1e-14) throw DomainError("exact_spherical: v beyond the data domain");
  if (r <= r_floor) return G_prime(0.5 * t);
  return (G(v) - G(std::max(u, 0.0))) / r;
}

SymSolution::NullDerivatives SymSolution::derivatives(double u, double v) const {
  const double r = v - u;
  if (r <= r_floor) {
    // on the axis phi = G'(m) + O(r^2), d_u phi = d_v phi = G''(m)/2
    const double m = 0.5 * (u + v), h = 1e-4 * std::max(m, 1e-3);
    const double d2 = (G_prime(m + h) - G_prime(m - h)) / (2 * h);
    return {G_prime(m), 0.5 * d2, 0.5 * d2};
  }
  const double phi = (G(v) - G(u)) / r;
  return {phi, (phi - G_prime(u)) / r, (G_prime(v) - phi) / r};
}

SymSolution symmetric_part(const ConeData& data) {
  auto d = std::make_shared<const ConeData>(data);
  SymSolution s;
  s.G = [d](double x) { return x > 0 ? d->radial_G(x) : 0.0; };
  s.dG = [d](double x) { return d->radial_dG(x); };
  return s;
}

SymSolution symmetric_from_profile(std::function<double(double)> g) {
  SymSolution s;
  s.G = [g](double x) { return x > 0 ? x * g(x) : 0.0; };
  return s;
}

double exact_spherical(const SymSolution& sol, double t, double r) { return sol(t, r); }

double exact_spherical(const ConeData& data, double t, double r) { return symmetric_part(data)(t, r); }

double axis_value(const ConeData& data, double t) {
  const double v = 0.5 * t;
  if (!(v > 0) || v > 1 + 1e-14) throw DomainError("axis_value: need 0 < t/2 <= 1");
  // spherical mean of d_v(v phi0) = phi0 + (v d_v) phi0 is its l = 0 coefficient / sqrt(4 pi)
  return (data.at(v, 0)(0) + data.at(v, 1)(0)) / kSqrt4Pi;
}

double interior_value(const ConeData& data, double t, const Eigen::Vector3d& x, int quad_lmax) {
  const double r = x.norm();
  if (!(t > r)) throw DomainError("interior_value: need t > r");
  const double tau = std::sqrt(t * t - r * r);
  if (0.5 * (t + r) > 1 + 1e-14) throw DomainError("interior_value: image leaves the data domain");
  if (quad_lmax <= 0) quad_lmax = std::max(2 * data.lmax, 48);
  // Gauss-Legendre grid with its pole along x, so the dominant dependence on x.eta is resolved in theta.
  const AngularGrid grid(0, 2 * quad_lmax);
  Eigen::Vector3d e3 = r > 0 ? Eigen::Vector3d(x / r) : Eigen::Vector3d::UnitZ();
  Eigen::Vector3d e1 = std::abs(e3.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  e1 = (e1 - e1.dot(e3) * e3).normalized();
  const Eigen::Vector3d e2 = e3.cross(e1);
  double sum = 0;
  for (int k = 0; k < grid.size(); ++k) {
    const double th = grid.theta(k), ph = grid.phi(k);
    const Eigen::Vector3d eta = std::sin(th) * std::cos(ph) * e1 + std::sin(th) * std::sin(ph) * e2 + std::cos(th) * e3;
    const Eigen::Vector3d y = 0.5 * ((t - tau) * e3.dot(eta) * e3 + x + tau * eta);
    const double vy = y.norm();
    if (!(vy > 0)) throw DomainError("interior_value: image point at the vertex");
    const AngularField f = data.at(vy, 0) + data.at(vy, 1);
    sum += grid.weights()(k) * sh_basis_at(data.lmax, y).dot(f);
  }
  return sum / (4 * std::numbers::pi);
}

SourceFunction mms_source(const ExactField& exact, const Nonlinearity& nonlin) {
  return [exact, nonlin](double t, const Eigen::Vector3d& x) {
    double f = exact.box(t, x);
    if (!nonlin.is_zero()) {
      const Eigen::Vector4d d = nonlin.needs_derivatives() ? exact.dphi(t, x) : Eigen::Vector4d::Zero();
      f -= nonlin(exact.phi(t, x), d);
    }
    return f;
  };
}

ConeData cone_data_of(const ExactField& exact, int lmax, const Eigen::VectorXd& nodes) {
  auto grid = std::make_shared<AngularGrid>(lmax, 4 * lmax + 8);
  auto phi = exact.phi;
  return from_function(
      [grid, phi](double v) {
        Eigen::VectorXd vals(grid->size());
        for (int k = 0; k < grid->size(); ++k) {
          const double th = grid->theta(k), ph = grid->phi(k);
          const Eigen::Vector3d w(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
          vals(k) = phi(v, v * w);
        }
        return grid->analyze(vals);
      },
      lmax, nodes);
}

ExactField power_law_solution(double delta) {
  SymSolution s;
  s.G = [delta](double x) { return x > 0 ? std::pow(x, delta) : 0.0; };
  s.dG = [delta](double x) { return delta * std::pow(x, delta - 1); };
  ExactField f;
  f.phi = [s](double t, const Eigen::Vector3d& x) { return s(t, x.norm()); };
  f.dphi = [s](double t, const Eigen::Vector3d& x) {
    const double r = x.norm();
    const auto d = s.derivatives(0.5 * (t - r), 0.5 * (t + r));
    Eigen::Vector4d out;
    out(0) = 0.5 * (d.du + d.dv);
    const double dr = 0.5 * (d.dv - d.du);
    out.tail<3>() = r > 0 ? Eigen::Vector3d(dr * x / r) : Eigen::Vector3d::Zero();
    return out;
  };
  f.box = [](double, const Eigen::Vector3d&) { return 0.0; };
  return f;
}

ExactField smooth_test_field(double a, double b) {
  ExactField f;
  f.phi = [a, b](double t, const Eigen::Vector3d& x) { return std::cos(t) * (1 + a * x.z()) + b * t; };
  f.dphi = [a, b](double t, const Eigen::Vector3d& x) {
    return Eigen::Vector4d(-std::sin(t) * (1 + a * x.z()) + b, 0, 0, a * std::cos(t));
  };
  f.box = [a](double t, const Eigen::Vector3d& x) { return std::cos(t) * (1 + a * x.z()); };
  return f;
}

}  // namespace nullcone
