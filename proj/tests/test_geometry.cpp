#include <doctest.h>

#include <random>

#include "nullcone/geometry.hpp"

using namespace nullcone;
using Vec = Vec3<double>;

TEST_CASE("to_null on worked points") {
  auto p = to_null(1.0, Vec(0.5, 0, 0));
  CHECK(p.u == doctest::Approx(0.25));
  CHECK(p.v == doctest::Approx(0.75));
  CHECK(p.r() == doctest::Approx(0.5));
  CHECK((p.omega() - Vec(1, 0, 0)).norm() < 1e-15);

  auto vertex = to_null(0.0, Vec(0, 0, 0));
  CHECK(vertex.u == 0.0);
  CHECK(vertex.v == 0.0);
  CHECK_FALSE(vertex.direction_defined);

  auto q = to_null(2.0, Vec(0, 0, 1));
  CHECK(q.u == doctest::Approx(0.5));
  CHECK(q.v == doctest::Approx(1.5));
}

TEST_CASE("to_null round trip") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-2, 2);
  for (int i = 0; i < 1000; ++i) {
    const Vec x(d(rng), d(rng), d(rng));
    const double t = x.norm() + std::abs(d(rng));
    const auto p = to_null(t, x);
    CHECK(p.v >= p.u);
    CHECK(p.r() >= 0.0);
    const auto [t2, x2] = from_null(p);
    CHECK(std::abs(t2 - t) < 1e-13);
    CHECK((x2 - x).norm() < 1e-13);
  }
}

TEST_CASE("conformal map worked point") {
  ConformalChart<double> chart(0.25);
  CHECK(chart.t_star() == 0.0);
  const auto c = conformal_null(chart, 2.0, 1.0);
  CHECK(c.u_star == doctest::Approx(0.5));
  CHECK(c.v_star == doctest::Approx(1.5));
  CHECK(c.lambda == doctest::Approx(3.0));
  CHECK(c.u_tilde == doctest::Approx(1.0 / 6));
  CHECK(c.v_tilde == doctest::Approx(0.5));
  CHECK(c.r_tilde == doctest::Approx(1.0 / 3));
  CHECK(chart.lambda(2.0, 1.0) == doctest::Approx(3.0));

  // image null coordinates agree with the tilde point
  const auto [tt, xt] = conformal_forward(chart, 2.0, Vec(0, 1, 0));
  const auto img = to_null(tt, xt);
  CHECK(img.u == doctest::Approx(c.u_tilde));
  CHECK(img.v == doctest::Approx(c.v_tilde));
}

TEST_CASE("axis maps to axis") {
  ConformalChart<double> chart(0.7);
  const auto c = conformal_null(chart, chart.t_star() + 3.0, 0.0);
  CHECK(c.u_star == c.v_star);
  CHECK(c.u_tilde == doctest::Approx(c.v_tilde));
}

TEST_CASE("conformal round trip and identities on random points") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1, 1), ustar(-3, 3), ext(0.01, 5);
  for (int i = 0; i < 1000; ++i) {
    ConformalChart<double> chart(ustar(rng));
    Vec x(d(rng), d(rng), d(rng));
    const double r = x.norm();
    const double t = chart.t_star() + r + ext(rng);
    const auto [tt, xt] = conformal_forward(chart, t, x);
    const auto [t2, x2] = conformal_inverse(chart, tt, xt);
    CHECK(std::abs(t2 - t) <= 1e-12 * std::max(1.0, std::abs(t)));
    CHECK((x2 - x).norm() <= 1e-12);

    const auto c = conformal_null(chart, t, r);
    const double lam = chart.lambda(t, r);
    CHECK(std::abs(c.lambda - lam) <= 1e-12 * std::max(1.0, lam));
    CHECK(std::abs(xt.norm() * lam - r) <= 1e-12 * std::max(1.0, r));
    // u~ v~ = Lambda~/4 with Lambda~ = 1/Lambda
    const double lam_t = (tt - xt.norm()) * (tt + xt.norm());
    CHECK(std::abs(c.u_tilde * c.v_tilde - lam_t / 4) <= 1e-12 * std::max(1.0, lam_t));
    CHECK(std::abs(lam_t * lam - 1) <= 1e-12);
  }
}

TEST_CASE("frame factors") {
  auto f = conformal_frame_factors(0.5, 1.5);
  CHECK(f.f_Lb == doctest::Approx(-9.0));
  CHECK(f.f_L == doctest::Approx(-1.0));
  CHECK(f.f_e == doctest::Approx(3.0));
  auto s = conformal_frame_factors(0.5, 0.5);
  CHECK(s.f_Lb == -1.0);
  CHECK(s.f_L == -1.0);
  CHECK(s.f_e == 1.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.01, 4);
  for (int i = 0; i < 200; ++i) {
    const double us = d(rng), vs = d(rng);
    const auto g = conformal_frame_factors(us, vs);
    CHECK(std::abs(g.f_Lb * g.f_L - g.f_e * g.f_e) <= 1e-12 * g.f_e * g.f_e);
  }
}

TEST_CASE("degenerate chart is rejected") {
  ConformalChart<double> chart(0.25);
  CHECK_THROWS_AS(conformal_forward(chart, 1.0, Vec(1, 0, 0)), DegenerateChart);
  CHECK_THROWS_AS(conformal_null(chart, 1.0, 1.0), DegenerateChart);
  CHECK_THROWS_AS(conformal_frame_factors(0.0, 1.0), DegenerateChart);
}
