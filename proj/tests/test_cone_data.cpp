#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "nullcone/cone_data.hpp"
#include "nullcone/error.hpp"

using namespace nullcone;
using std::numbers::pi;

namespace {

AngularField constant_profile(int lmax = 0) {
  AngularField p = AngularField::Zero(num_coeffs(lmax));
  p(0) = std::sqrt(4 * pi);  // profile value 1
  return p;
}

}  // namespace

TEST_CASE("power-law values and Euler derivatives") {
  auto d = power_law(0.5, 1.0, constant_profile());
  CHECK(d.at(0.25)(0) / std::sqrt(4 * pi) == doctest::Approx(2.0).epsilon(1e-14));
  auto c = power_law(1.0, 3.0, constant_profile());
  CHECK(c.at(0.37)(0) / std::sqrt(4 * pi) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(c.at(0.37, 1)(0) == 0.0);
  auto s = power_law(0.2, 1.0, constant_profile());
  CHECK(s.at(0.3, 1)(0) == doctest::Approx(-0.8 * s.at(0.3)(0)).epsilon(1e-14));
  for (Eigen::Index i = 0; i < s.v_nodes.size(); i += 17)
    CHECK((s.values[i] - s.closed_form(s.v_nodes(i), 0)).norm() == 0.0);
}

TEST_CASE("radial helpers") {
  auto d = power_law(0.5, 1.0, constant_profile());
  CHECK(d.radial_G(0.25) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(d.radial_dG(0.25) == doctest::Approx(0.5 * std::pow(0.25, -0.5)).epsilon(1e-14));
}

TEST_CASE("sampled and numerical Euler derivatives are 4th order accurate") {
  auto exact = power_law(0.3, 1.0, constant_profile());
  auto sampled = from_samples(exact.v_nodes, exact.values);
  auto fn = from_function([](double v) { return AngularField::Constant(1, std::pow(v, -0.7)); }, 0, exact.v_nodes);
  for (double v : {0.5, 0.05, 0.003}) {
    for (int n = 0; n <= 2; ++n) {
      const double ref = exact.at(v, n)(0);
      CHECK(sampled.at(v, n)(0) == doctest::Approx(ref).epsilon(1e-5));
      CHECK(fn.at(v, n)(0) * std::sqrt(4 * pi) == doctest::Approx(ref).epsilon(1e-8));
    }
  }
}

TEST_CASE("data norm of the canonical power-law pair") {
  auto d = power_law(0.2, 1.0, constant_profile());
  auto rep = data_norm(d, 0.1);
  CHECK_FALSE(rep.divergent);
  const double full = 20 * pi * (1 + 0.64 + 0.4096);
  CHECK(rep.total == doctest::Approx(full).epsilon(5e-3));
  for (const auto& t : rep.terms) {
    if (t.n1 == 0 && t.n2 == 0) CHECK(t.value == doctest::Approx(20 * pi).epsilon(5e-3));
    if (t.n2 > 0) CHECK(t.value == doctest::Approx(0.0));
  }
}

TEST_CASE("data norm of constant data") {
  const double c = 1.3, delta = 0.1;
  auto d = power_law(1.0, c, constant_profile());
  auto rep = data_norm(d, delta);
  CHECK(rep.total == doctest::Approx(4 * pi * c * c / (2 - 2 * delta)).epsilon(1e-10));
  CHECK_FALSE(rep.divergent);
}

TEST_CASE("borderline data raise the divergence flag") {
  auto d = power_law(0.1, 1.0, constant_profile());
  CHECK(data_norm(d, 0.1).divergent);
  CHECK_FALSE(data_norm(power_law(0.15, 1.0, constant_profile()), 0.1).divergent);
}

TEST_CASE("angular terms use the rotation-generator word sums") {
  AngularField p = AngularField::Zero(num_coeffs(2));
  p(coeff_index(1, 0)) = 0.5;
  p(coeff_index(2, -1)) = 0.25;
  auto d = power_law(0.6, 1.0, p);
  DataNormOptions o;
  auto rep = data_norm(d, 0.1, o);
  // v^{1-2delta} v^{2 delta' - 2} = v^{0.0}: integral 1 per unit weight
  const double base = 1.0 / (2 * 0.6 - 2 * 0.1);
  for (const auto& t : rep.terms) {
    const double ang = std::pow(2.0, t.n2) * 0.25 + std::pow(6.0, t.n2) * 0.0625;
    CHECK(t.value == doctest::Approx(base * std::pow(0.4, 2 * t.n1) * ang).epsilon(1e-6));
  }
}

TEST_CASE("data norm is quadratic and partial sums increase") {
  auto a = data_norm(power_law(0.3, 1.0, constant_profile()), 0.1);
  auto b = data_norm(power_law(0.3, -2.5, constant_profile()), 0.1);
  CHECK(b.total == doctest::Approx(6.25 * a.total).epsilon(1e-12));
  for (size_t k = 1; k < a.partial_sums.size(); ++k) CHECK(a.partial_sums[k].second >= a.partial_sums[k - 1].second);
}

TEST_CASE("sampled data norm agrees with the closed form") {
  auto exact = power_law(0.4, 1.0, constant_profile(), graded_nodes(1e-6, 60));
  auto sampled = from_samples(exact.v_nodes, exact.values);
  auto a = data_norm(exact, 0.1);
  auto b = data_norm(sampled, 0.1);
  CHECK_FALSE(b.divergent);
  CHECK(b.total == doctest::Approx(a.total).epsilon(1e-3));
}

TEST_CASE("cone data file round trip") {
  AngularField p = AngularField::Zero(num_coeffs(1));
  p(0) = 1.0;
  p(coeff_index(1, 1)) = -0.5;
  auto d = power_law(0.5, 1.0, p, graded_nodes(1e-2, 5));
  const std::string path = "cone_data_roundtrip.txt";
  save_cone_data(d, path);
  auto e = load_cone_data(path);
  std::remove(path.c_str());
  REQUIRE(e.v_nodes.size() == d.v_nodes.size());
  CHECK(e.lmax == 1);
  for (Eigen::Index i = 0; i < d.v_nodes.size(); ++i) {
    CHECK(e.v_nodes(i) == d.v_nodes(i));
    CHECK((e.values[i] - d.values[i]).norm() == 0.0);
  }
  CHECK_THROWS_AS(load_cone_data("does/not/exist.txt"), ParseError);
}
