#include <doctest.h>

#include <cmath>
#include <random>

#include "nullcone/inequalities.hpp"

using namespace nullcone;
using SF = SampledFunction<double>;

namespace {

Eigen::VectorXd linspace(double a, double b, int n) { return Eigen::VectorXd::LinSpaced(n, a, b); }

struct RandomPair {
  SF f, g;
};

// f random piecewise linear, g increasing with slopes in [0.1, 10]
RandomPair random_pair(std::mt19937_64& rng, double g0, bool zero_f0) {
  std::uniform_int_distribution<int> ncell(1, 40);
  std::uniform_real_distribution<double> unit(0.0, 1.0), val(-2.0, 2.0), slope_exp(-1.0, 1.0);
  const int n = ncell(rng);
  Eigen::VectorXd s(n + 1), fv(n + 1), gv(n + 1);
  s(0) = val(rng);
  fv(0) = zero_f0 ? 0.0 : val(rng);
  gv(0) = g0;
  for (int i = 1; i <= n; ++i) {
    const double h = 0.01 + unit(rng);
    s(i) = s(i - 1) + h;
    fv(i) = val(rng);
    gv(i) = gv(i - 1) + h * std::pow(10.0, slope_exp(rng));
  }
  return {SF(s, fv), SF(s, gv)};
}

// Independent brute-force evaluation with many GL points per cell.
double brute_f2_over_g2(const SF& f, const SF& g) {
  double s = 0;
  for (Eigen::Index i = 0; i < f.cells(); ++i) {
    const double lo = f.nodes(i), hi = f.nodes(i + 1);
    auto lin = [&](const SF& p, double x) { return p.values(i) + p.slope(i) * (x - lo); };
    auto h = [&](double x) {
      const double fx = lin(f, x), gx = lin(g, x);
      return fx * fx * g.slope(i) / (gx * gx);
    };
    for (int k = 0; k < 64; ++k) s += integrate_gl(h, lo + (hi - lo) * k / 64, lo + (hi - lo) * (k + 1) / 64, 30);
  }
  return s;
}

}  // namespace

TEST_CASE("kt1 closed-form examples") {
  auto s = linspace(1, 2, 5);
  auto r = hardy_kt1(SF::sample([](double) { return 1.0; }, s), SF::sample([](double x) { return x; }, s));
  CHECK(r.lhs == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(r.rhs == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r.holds);

  auto s01 = linspace(0, 1, 7);
  auto id = SF::sample([](double x) { return x; }, s01);
  r = hardy_kt1(id, id);
  CHECK(r.lhs == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(r.rhs == doctest::Approx(2.0).epsilon(1e-14));

  r = hardy_kt1(SF::sample([](double) { return 0.0; }, s01), id);
  CHECK(r.lhs == 0.0);
  CHECK(r.holds);
}

TEST_CASE("kt1 fails for some pairs with g(s1) = 0") {
  // f = a + b s, g = s on [0, 1]: rhs - lhs = 2a^2 - 3ab + 2b^2/3, negative at a = 1, b = 1.5
  auto s01 = linspace(0, 1, 5);
  auto r = hardy_kt1(SF::sample([](double x) { return 1 + 1.5 * x; }, s01), SF::sample([](double x) { return x; }, s01));
  CHECK(r.lhs == doctest::Approx(9.5).epsilon(1e-14));
  CHECK(r.rhs == doctest::Approx(8.5).epsilon(1e-14));
  CHECK_FALSE(r.holds);
  // with 3 in place of 2 in front of the integral the pair is covered
  CHECK(r.lhs <= 4 * 1.0 + 3 * 1.5 * 1.5);
}

TEST_CASE("kt2 and kt3 closed-form examples") {
  auto s = linspace(1, 2, 9);
  const double c = 1.7;
  auto r = hardy_kt2(SF::sample([&](double) { return c; }, s), SF::sample([](double x) { return x; }, s));
  CHECK(r.lhs == doctest::Approx(1.5 * c * c).epsilon(1e-13));
  CHECK(r.rhs == doctest::Approx(2 * c * c).epsilon(1e-13));
  CHECK(r.holds);

  auto s01 = linspace(0, 1, 11);
  auto id = SF::sample([](double x) { return x; }, s01);
  auto r3 = hardy_kt3(id, id);
  CHECK(r3.lhs == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(r3.rhs == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(r3.holds);

  auto zero = SF::sample([](double) { return 0.0; }, s01);
  CHECK(hardy_kt3(zero, id).lhs == 0.0);
}

TEST_CASE("exact cell integrals agree with brute-force quadrature") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto [f, g] = random_pair(rng, 0.05 + 0.1 * trial, false);
    const double exact = detail::sum_f2_over_g2(f, g, false);
    CHECK(exact == doctest::Approx(brute_f2_over_g2(f, g)).epsilon(1e-10));
  }
}

TEST_CASE("randomized Hardy property suite") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> g0(0.0, 2.0);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto p1 = random_pair(rng, g0(rng), false);
    auto r1 = hardy_kt1(p1.f, p1.g);
    auto p2 = random_pair(rng, 1e-3 + g0(rng), false);
    auto r2 = hardy_kt2(p2.f, p2.g);
    auto p3 = random_pair(rng, 0.0, true);
    auto r3 = hardy_kt3(p3.f, p3.g);
    failures += !r1.holds + !r2.holds + !r3.holds;
  }
  CHECK(failures == 0);
}

TEST_CASE("Hardy verdicts are invariant under scaling f") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto [f, g] = random_pair(rng, 0.5, false);
    auto a = hardy_kt2(f, g);
    auto b = hardy_kt2(f.scaled(-3.5), g);
    CHECK(b.lhs == doctest::Approx(12.25 * a.lhs).epsilon(1e-12));
    CHECK(b.rhs == doctest::Approx(12.25 * a.rhs).epsilon(1e-12));
    CHECK(a.holds == b.holds);
  }
}

TEST_CASE("Hardy preconditions") {
  auto s = linspace(0, 1, 4);
  auto f = SF::sample([](double x) { return x; }, s);
  auto dec = SF::sample([](double x) { return 1 - x; }, s);
  CHECK_THROWS_AS(hardy_kt1(f, dec), PreconditionError);
  auto id = SF::sample([](double x) { return x; }, s);
  CHECK_THROWS_AS(hardy_kt2(f, id), PreconditionError);
  auto shifted = SF::sample([](double x) { return x + 1; }, s);
  CHECK_THROWS_AS(hardy_kt3(shifted, id), PreconditionError);
  CHECK_THROWS_AS(SF(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(1, 2, 3)), DomainError);
}

TEST_CASE("kt4 extremal monomial gives ratio one") {
  for (double p1 : {0.3, 0.8, 1.0, 1.6}) {
    const double p2 = p1 / 2;
    std::vector<double> S;
    for (int k = 1; k <= 20; ++k) S.push_back(0.05 * k);
    auto r = kt4_check([&](double s) { return p1 * std::pow(s, p1 - 1); }, 0.0, S, 1.0, p1, p2);
    CHECK(r.premise_holds);
    CHECK(std::abs(r.worst_ratio - 1.0) < 1e-10);
    CHECK(r.holds);
  }
}

TEST_CASE("kt4 randomized with calibrated constant") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double min_slack = 1;
  for (int trial = 0; trial < 1000; ++trial) {
    const bool from_zero = trial % 2 == 0;
    const double s1 = from_zero ? 0.0 : 0.05 + unit(rng);
    const double p1 = from_zero ? 0.2 + 0.8 * unit(rng) : 0.2 + 1.8 * unit(rng);
    const double p2 = p1 * unit(rng) * 0.99;
    const int n = 2 + static_cast<int>(30 * unit(rng));
    Eigen::VectorXd s(n + 1), y(n + 1);
    s(0) = s1;
    y(0) = 2 * unit(rng);
    for (int i = 1; i <= n; ++i) {
      s(i) = s(i - 1) + 0.01 + unit(rng);
      y(i) = unit(rng) < 0.2 ? 0.0 : 3 * unit(rng);
    }
    SF f(s, y);
    const double C = kt4_calibrate(f, p1);
    auto r = kt4_check(f, C, p1, p2);
    CHECK(r.premise_holds);
    CHECK(r.holds);
    min_slack = std::min(min_slack, 1 - r.worst_ratio);
  }
  CHECK(min_slack >= 0);
}

TEST_CASE("kt4 trivial and error cases") {
  auto s = linspace(0, 1, 5);
  auto zero = SF::sample([](double) { return 0.0; }, s);
  auto r = kt4_check(zero, 1.0, 0.5, 0.2);
  CHECK(r.worst_ratio == 0.0);
  CHECK(r.holds);
  auto neg = SF::sample([](double x) { return x - 0.5; }, s);
  CHECK_THROWS_AS(kt4_check(neg, 1.0, 0.5, 0.2), DomainError);
  CHECK_THROWS_AS(kt4_check(zero, 1.0, 0.5, 0.7), PreconditionError);
  auto one = SF::sample([](double) { return 1.0; }, s);
  CHECK_FALSE(kt4_check(one, 0.1, 1.0, 0.5).premise_holds);
}
