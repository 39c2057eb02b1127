#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nullcone/sphere.hpp"
#include "nullcone/error.hpp"

using namespace nullcone;

namespace {

AngularField random_field(int lmax, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  AngularField f(num_coeffs(lmax));
  for (int k = 0; k < f.size(); ++k) f(k) = n(rng);
  return f;
}

AngularField unit(int lmax, int l, int m) {
  AngularField f = AngularField::Zero(num_coeffs(lmax));
  f(coeff_index(l, m)) = 1;
  return f;
}

}  // namespace

TEST_CASE("quadrature integrates harmonics up to degree 2L") {
  Sphere s(8);
  const auto& g = s.grid();
  for (int k = 0; k < s.num_coeffs(); ++k) {
    const Eigen::VectorXd y = g.basis().col(k);
    CHECK(g.integrate(y.cwiseAbs2()) == doctest::Approx(1.0).epsilon(1e-13));
    if (k > 0) CHECK(std::abs(g.integrate(y)) < 1e-13);
  }
  const Eigen::MatrixXd gram = g.basis().transpose() * g.weights().asDiagonal() * g.basis();
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("analyze of constants and single harmonics") {
  Sphere s(8);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.grid().size());
  const AngularField a = s.analyze(ones);
  CHECK(a(0) == doctest::Approx(std::sqrt(4 * std::numbers::pi)));
  CHECK(a.tail(a.size() - 1).cwiseAbs().maxCoeff() < 1e-13);

  const AngularField y21 = unit(8, 2, 1);
  const AngularField back = s.analyze(s.synthesize(y21));
  CHECK((back - y21).cwiseAbs().maxCoeff() < 1e-13);

  CHECK_THROWS_AS(s.analyze(Eigen::VectorXd::Ones(3)), SizeMismatch);
  CHECK_THROWS_AS(s.synthesize(Eigen::VectorXd::Ones(3)), SizeMismatch);
}

TEST_CASE("round trip and Parseval on random band-limited fields") {
  std::mt19937_64 rng(1);
  for (int lmax : {0, 1, 4, 8, 12}) {
    Sphere s(lmax);
    for (int trial = 0; trial < 20; ++trial) {
      const AngularField f = random_field(lmax, rng);
      const Eigen::VectorXd vals = s.synthesize(f);
      CHECK((s.analyze(vals) - f).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(s.grid().integrate(vals.cwiseAbs2()) - f.squaredNorm()) < 1e-10 * f.squaredNorm());
    }
  }
}

TEST_CASE("Laplace-Beltrami eigenvalues and self-adjointness") {
  Sphere s(8);
  CHECK(s.laplace_beltrami(unit(8, 0, 0)).norm() == 0.0);
  CHECK((s.laplace_beltrami(unit(8, 1, 0)) + 2 * unit(8, 1, 0)).norm() == 0.0);
  CHECK((s.laplace_beltrami(unit(8, 3, 2)) + 12 * unit(8, 3, 2)).norm() == 0.0);

  std::mt19937_64 rng(2);
  const AngularField f = random_field(8, rng), g = random_field(8, rng);
  const auto& gr = s.grid();
  const double fLg = gr.integrate(s.synthesize(f).cwiseProduct(s.synthesize(s.laplace_beltrami(g))));
  const double gLf = gr.integrate(s.synthesize(g).cwiseProduct(s.synthesize(s.laplace_beltrami(f))));
  CHECK(std::abs(fLg - gLf) < 1e-10 * std::abs(fLg));
}

TEST_CASE("node-space gradient integrates to the spectral energy") {
  Sphere s(6);
  std::mt19937_64 rng(9);
  const AngularField f = random_field(6, rng);
  const double lhs = s.grid(2).integrate(s.gradient_sq(f, 2));
  CHECK(lhs == doctest::Approx(s.omega_power_norm_sq(f, 1)).epsilon(1e-10));
  const Eigen::MatrixXd grad = s.gradient(f, 2);
  CHECK(s.grid(2).integrate(grad.rowwise().squaredNorm()) == doctest::Approx(lhs).epsilon(1e-12));
}

TEST_CASE("angular gradient squared") {
  Sphere s(8);
  CHECK(s.gradient_sq(unit(8, 0, 0)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(s.grid(2).integrate(s.gradient_sq(unit(8, 1, 0))) == doctest::Approx(2.0));
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const AngularField f = random_field(8, rng);
    double parseval = 0;
    for (int k = 0; k < f.size(); ++k) {
      const int l = degree_of(k);
      parseval += l * (l + 1.0) * f(k) * f(k);
    }
    CHECK(std::abs(s.grid(2).integrate(s.gradient_sq(f, 2)) - parseval) < 1e-10 * parseval);
  }
}

TEST_CASE("gradient derivatives agree with finite differences of the basis") {
  // compare d_theta of Y_{3,2} at grid nodes against a centered difference
  const int lmax = 5;
  AngularGrid g(lmax, 2 * lmax);
  const double h = 1e-6;
  for (int k = 0; k < g.size(); k += 7) {
    const double th = g.theta(k), ph = g.phi(k);
    auto y = [&](double t, double p) {
      // Y_{3,2} = sqrt(2) * N * P_3^2(cos t) cos(2p), P_3^2 = 15 x (1 - x^2)
      const double x = std::cos(t);
      const double n = std::sqrt(7.0 / (4 * std::numbers::pi) / 120.0);
      return std::sqrt(2.0) * n * 15 * x * (1 - x * x) * std::cos(2 * p);
    };
    const int idx = coeff_index(3, 2);
    CHECK(g.basis()(k, idx) == doctest::Approx(y(th, ph)).epsilon(1e-12));
    const double dth = (y(th + h, ph) - y(th - h, ph)) / (2 * h);
    const double dph = (y(th, ph + h) - y(th, ph - h)) / (2 * h) / std::sin(th);
    CHECK(g.basis_dtheta()(k, idx) == doctest::Approx(dth).epsilon(1e-6));
    CHECK(g.basis_dphi_over_sin()(k, idx) == doctest::Approx(dph).epsilon(1e-6));
  }
}

TEST_CASE("rotation generators") {
  Sphere s(6);
  // symmetric fields are annihilated
  for (Axis a : {Axis::x, Axis::y, Axis::z}) CHECK(s.rotate(unit(6, 0, 0), a).norm() < 1e-13);
  // Omega_z maps cos(m phi) to -m sin(m phi)
  const AngularField rz = s.rotate(unit(6, 3, 2), Axis::z);
  CHECK(rz(coeff_index(3, -2)) == doctest::Approx(-2.0));
  CHECK(std::abs(rz.norm() - 2.0) < 1e-12);
  // sum_i Omega_i^2 = Laplace-Beltrami, sum_i |Omega_i f|^2 integrates to sum l(l+1) a^2
  std::mt19937_64 rng(6);
  const AngularField f = random_field(6, rng);
  AngularField lap = AngularField::Zero(f.size());
  double sq = 0;
  for (Axis a : {Axis::x, Axis::y, Axis::z}) {
    const AngularField of = s.rotate(f, a);
    lap += s.rotate(of, a);
    sq += of.squaredNorm();
  }
  CHECK((lap - s.laplace_beltrami(f)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sq == doctest::Approx(s.omega_power_norm_sq(f, 1)).epsilon(1e-12));
  // words of length two
  double sq2 = 0;
  for (Axis a : {Axis::x, Axis::y, Axis::z})
    for (Axis b : {Axis::x, Axis::y, Axis::z}) sq2 += s.rotate(s.rotate(f, b), a).squaredNorm();
  CHECK(sq2 == doctest::Approx(s.omega_power_norm_sq(f, 2)).epsilon(1e-11));
}

TEST_CASE("dealiased products") {
  Sphere s(8);
  std::mt19937_64 rng(7);
  const AngularField f = random_field(8, rng), g = random_field(8, rng);
  const AngularField one = unit(8, 0, 0) * std::sqrt(4 * std::numbers::pi);
  CHECK((s.product(f, one) - f).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((s.product(f, g) - s.product(g, f)).cwiseAbs().maxCoeff() < 1e-13);

  const AngularField y10 = unit(8, 1, 0);
  const AngularField sq = s.product(y10, y10);
  CHECK(sq(0) == doctest::Approx(1 / std::sqrt(4 * std::numbers::pi)));

  // brute-force oracle: project fg with a much finer independent grid
  const int lsmall = 3;
  Sphere small(lsmall);
  const AngularField a = random_field(lsmall, rng), b = random_field(lsmall, rng), c = random_field(lsmall, rng);
  AngularGrid fine(lsmall, 40);
  const Eigen::VectorXd fa = fine.synthesize(a), fb = fine.synthesize(b), fc = fine.synthesize(c);
  const AngularField ref2 = fine.analyze(fa.cwiseProduct(fb));
  const AngularField ref3 = fine.analyze(fa.cwiseProduct(fb).cwiseProduct(fc));
  CHECK((small.product(a, b) - ref2).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((small.product(a, b, c) - ref3).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("point evaluation matches grid synthesis") {
  AngularGrid g(4, 8);
  for (int k : {0, 7, g.size() / 2, g.size() - 1}) {
    const double th = g.theta(k), ph = g.phi(k);
    const Eigen::Vector3d w(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
    CHECK((sh_basis_at(4, 2.5 * w) - g.basis().row(k)).cwiseAbs().maxCoeff() < 1e-13);
  }
  CHECK_THROWS(sh_basis_at(2, Eigen::Vector3d::Zero()));
}
