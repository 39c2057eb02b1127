#pragma once

// Checkers for the weighted one-dimensional Hardy inequalities
//
//   kt1: |f(s2)|^2/g(s2) + g(s2)^-2 int |f|^2 g'  <=  4|f(s1)|^2/g(s2) + 2 int |f'|^2/g'
//   kt2: 2|f(s2)|^2/g(s2) + int |f|^2 g'/g^2       <=  2|f(s1)|^2/g(s1) + 4 int |f'|^2/g'
//   kt3: kt2 with f(s1) = g(s1) = 0                <=  4 int |f'|^2/g'
//
// and for the integral comparison
//
//   int_{s1}^S f <= C S^p1  for all S   =>   int_{s1}^S s^-p2 f <= C p1/(p1-p2) S^(p1-p2).
//
// kt1 as written is not always true when g(s1) = 0: f = 1 + 1.5s, g = s on [0, 1]
// gives 9.5 > 8.5. The checker reports such pairs as failures.
//
// Functions are piecewise linear on their nodes, so every integral is
// evaluated exactly cell by cell and quadrature error cannot cause a
// spurious failure.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nullcone/error.hpp"
#include "nullcone/quadrature.hpp"

namespace nullcone {

template <typename Scalar = double>
struct SampledFunction {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vec nodes;
  Vec values;

  SampledFunction() = default;
  SampledFunction(Vec s, Vec y) : nodes(std::move(s)), values(std::move(y)) {
    if (nodes.size() != values.size()) throw SizeMismatch("SampledFunction: nodes/values size mismatch");
    if (nodes.size() < 2) throw DomainError("SampledFunction: need at least two nodes");
    for (Eigen::Index i = 0; i + 1 < nodes.size(); ++i)
      if (!(nodes(i + 1) > nodes(i))) throw DomainError("SampledFunction: nodes must be strictly increasing");
  }

  template <typename Fn>
  static SampledFunction sample(Fn&& fn, const Vec& s) {
    Vec y(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) y(i) = fn(s(i));
    return SampledFunction(s, y);
  }

  Eigen::Index cells() const { return nodes.size() - 1; }
  Scalar front() const { return values(0); }
  Scalar back() const { return values(values.size() - 1); }
  Scalar slope(Eigen::Index i) const { return (values(i + 1) - values(i)) / (nodes(i + 1) - nodes(i)); }
  SampledFunction scaled(Scalar lambda) const { return SampledFunction(nodes, lambda * values); }
};

template <typename Scalar = double>
struct InequalityCheck {
  Scalar lhs{0};
  Scalar rhs{0};
  bool holds{true};
  Scalar slack() const { return rhs - lhs; }
};

namespace detail {

template <typename Scalar>
void require_same_nodes(const SampledFunction<Scalar>& f, const SampledFunction<Scalar>& g) {
  if (f.nodes.size() != g.nodes.size() || (f.nodes - g.nodes).cwiseAbs().maxCoeff() > Scalar(0))
    throw SizeMismatch("Hardy check: f and g must share nodes");
}

template <typename Scalar>
void require_increasing(const SampledFunction<Scalar>& g) {
  for (Eigen::Index i = 0; i < g.cells(); ++i)
    if (!(g.values(i + 1) > g.values(i))) throw PreconditionError("Hardy check: g must be strictly increasing");
}

// int |f|^2 over a cell for linear f with end values a0, a1; times g' gives int |f|^2 g'.
template <typename Scalar>
Scalar cell_f2(Scalar a0, Scalar a1) {
  return (a0 * a0 + a0 * a1 + a1 * a1) / 3;
}

// int_{b0}^{b1} F(x)^2 / x^2 dx with F linear in x, F(b0) = a0, F(b1) = a1.
// This equals int |f|^2 g' / g^2 ds over the cell after the change of variable x = g(s).
template <typename Scalar>
Scalar cell_f2_over_g2(Scalar a0, Scalar a1, Scalar b0, Scalar b1) {
  const Scalar beta = (a1 - a0) / (b1 - b0);
  if (b0 == Scalar(0)) return beta * beta * b1;  // F(0) = 0 required by the caller
  if (b1 <= 2 * b0) {
    auto h = [&](double x) {
      const double y = double(a0) + double(beta) * (x - double(b0));
      return y * y / (x * x);
    };
    return Scalar(integrate_gl(h, double(b0), double(b1), 16));
  }
  const Scalar alpha = a0 - beta * b0;
  return alpha * alpha * (b1 - b0) / (b0 * b1) + 2 * alpha * beta * std::log(b1 / b0) + beta * beta * (b1 - b0);
}

template <typename Scalar>
Scalar sum_f2_gprime(const SampledFunction<Scalar>& f, const SampledFunction<Scalar>& g) {
  Scalar s = 0;
  for (Eigen::Index i = 0; i < f.cells(); ++i)
    s += (g.values(i + 1) - g.values(i)) * cell_f2(f.values(i), f.values(i + 1));
  return s;
}

template <typename Scalar>
Scalar sum_fprime2_over_gprime(const SampledFunction<Scalar>& f, const SampledFunction<Scalar>& g) {
  Scalar s = 0;
  for (Eigen::Index i = 0; i < f.cells(); ++i) {
    const Scalar df = f.values(i + 1) - f.values(i);
    s += df * df / (g.values(i + 1) - g.values(i));
  }
  return s;
}

template <typename Scalar>
Scalar sum_f2_over_g2(const SampledFunction<Scalar>& f, const SampledFunction<Scalar>& g, bool zero_start) {
  Scalar s = 0;
  for (Eigen::Index i = 0; i < f.cells(); ++i) {
    const Scalar a0 = (i == 0 && zero_start) ? Scalar(0) : f.values(i);
    const Scalar b0 = (i == 0 && zero_start) ? Scalar(0) : g.values(i);
    s += cell_f2_over_g2(a0, f.values(i + 1), b0, g.values(i + 1));
  }
  return s;
}

template <typename Scalar>
InequalityCheck<Scalar> verdict(Scalar lhs, Scalar rhs) {
  return {lhs, rhs, lhs <= rhs + Scalar(1e-12) * std::abs(rhs)};
}

}  // namespace detail

template <typename Scalar>
InequalityCheck<Scalar> hardy_kt1(const SampledFunction<Scalar>& f, const SampledFunction<Scalar>& g) {
  detail::require_same_nodes(f, g);
  detail::require_increasing(g);
  if (g.front() < Scalar(0)) throw PreconditionError("hardy_kt1: g must be nonnegative");
  const Scalar g2 = g.back();
  const Scalar lhs = f.back() * f.back() / g2 + detail::sum_f2_gprime(f, g) / (g2 * g2);
  const Scalar rhs = 4 * f.front() * f.front() / g2 + 2 * detail::sum_fprime2_over_gprime(f, g);
  return detail::verdict(lhs, rhs);
}

template <typename Scalar>
InequalityCheck<Scalar> hardy_kt2(const SampledFunction<Scalar>& f, const SampledFunction<Scalar>& g) {
  detail::require_same_nodes(f, g);
  detail::require_increasing(g);
  if (!(g.front() > Scalar(0))) throw PreconditionError("hardy_kt2: g(s1) must be positive");
  const Scalar lhs = 2 * f.back() * f.back() / g.back() + detail::sum_f2_over_g2(f, g, false);
  const Scalar rhs = 2 * f.front() * f.front() / g.front() + 4 * detail::sum_fprime2_over_gprime(f, g);
  return detail::verdict(lhs, rhs);
}

template <typename Scalar>
InequalityCheck<Scalar> hardy_kt3(const SampledFunction<Scalar>& f, const SampledFunction<Scalar>& g) {
  detail::require_same_nodes(f, g);
  detail::require_increasing(g);
  if (std::abs(f.front()) > Scalar(1e-12) || std::abs(g.front()) > Scalar(1e-12))
    throw PreconditionError("hardy_kt3: requires f(s1) = g(s1) = 0");
  const Scalar lhs = 2 * f.back() * f.back() / g.back() + detail::sum_f2_over_g2(f, g, true);
  const Scalar rhs = 4 * detail::sum_fprime2_over_gprime(f, g);
  return detail::verdict(lhs, rhs);
}

template <typename Scalar = double>
struct Kt4Result {
  Scalar worst_ratio{0};      ///< max over S of lhs(S) / bound(S)
  Scalar premise_ratio{0};    ///< max over S of int f / (C S^p1)
  bool premise_holds{true};
  bool holds{true};
};

namespace detail {

// int_{lo}^{hi} s^-p (a + b s) ds with the linear function given by its end values.
inline double cell_power_moment(double lo, double hi, double flo, double fhi, double p) {
  if (lo > 0 && hi <= 2 * lo) {
    auto h = [&](double s) { return std::pow(s, -p) * (flo + (fhi - flo) * (s - lo) / (hi - lo)); };
    return integrate_gl(h, lo, hi, 16);
  }
  const double b = (fhi - flo) / (hi - lo);
  const double a = flo - b * lo;
  auto prim = [&](double s, double k) {  // int s^(k - p)
    const double e = k + 1 - p;
    if (std::abs(e) < 1e-14) return std::log(s);
    return std::pow(s, e) / e;
  };
  if (lo == 0) {
    if (p >= 1 && a != 0) return std::numeric_limits<double>::infinity();
    return a * (a == 0 ? 0.0 : prim(hi, 0)) + b * prim(hi, 1);
  }
  return a * (prim(hi, 0) - prim(lo, 0)) + b * (prim(hi, 1) - prim(lo, 1));
}

}  // namespace detail

/// Checks the comparison lemma at every node S of a piecewise-linear f >= 0.
inline Kt4Result<double> kt4_check(const SampledFunction<double>& f, double C, double p1, double p2) {
  if (!(p2 < p1)) throw PreconditionError("kt4_check: requires p2 < p1");
  if (p2 < 0) throw PreconditionError("kt4_check: requires p2 >= 0");
  if (f.nodes(0) < 0) throw PreconditionError("kt4_check: requires s1 >= 0");
  if (f.values.minCoeff() < 0) throw DomainError("kt4_check: f must be nonnegative");
  Kt4Result<double> res;
  double F = 0, G = 0;
  for (Eigen::Index i = 0; i < f.cells(); ++i) {
    const double lo = f.nodes(i), hi = f.nodes(i + 1);
    F += 0.5 * (hi - lo) * (f.values(i) + f.values(i + 1));
    G += detail::cell_power_moment(lo, hi, f.values(i), f.values(i + 1), p2);
    const double premise = F / (C * std::pow(hi, p1));
    const double bound = C * p1 / (p1 - p2) * std::pow(hi, p1 - p2);
    res.premise_ratio = std::max(res.premise_ratio, premise);
    res.worst_ratio = std::max(res.worst_ratio, G / bound);
  }
  res.premise_holds = res.premise_ratio <= 1 + 1e-12;
  res.holds = res.worst_ratio <= 1 + 1e-12;
  return res;
}

/// Same check for a callable f on [s1, S_k], integrals by graded Gauss-Legendre rules.
template <typename Fn>
Kt4Result<double> kt4_check(Fn&& f, double s1, const std::vector<double>& checkpoints, double C, double p1,
                            double p2) {
  if (!(p2 < p1)) throw PreconditionError("kt4_check: requires p2 < p1");
  if (p2 < 0) throw PreconditionError("kt4_check: requires p2 >= 0");
  Kt4Result<double> res;
  auto integral = [&](auto&& g, double S) {
    if (s1 == 0) return integrate_graded(g, S);
    double s = 0, hi = S;
    while (hi > s1) {
      const double lo = std::max(s1, hi * 0.5);
      s += integrate_gl(g, lo, hi);
      hi = lo;
    }
    return s;
  };
  for (double S : checkpoints) {
    if (f(S) < 0) throw DomainError("kt4_check: f must be nonnegative");
    const double F = integral([&](double s) { return f(s); }, S);
    const double G = integral([&](double s) { return std::pow(s, -p2) * f(s); }, S);
    res.premise_ratio = std::max(res.premise_ratio, F / (C * std::pow(S, p1)));
    res.worst_ratio = std::max(res.worst_ratio, G / (C * p1 / (p1 - p2) * std::pow(S, p1 - p2)));
  }
  res.premise_holds = res.premise_ratio <= 1 + 1e-10;
  res.holds = res.worst_ratio <= 1 + 1e-10;
  return res;
}

/// Smallest C with int_{s1}^S f <= C S^p1, scanning each cell densely.
inline double kt4_calibrate(const SampledFunction<double>& f, double p1, int samples_per_cell = 64) {
  double C = 0, F = 0;
  for (Eigen::Index i = 0; i < f.cells(); ++i) {
    const double lo = f.nodes(i), hi = f.nodes(i + 1), a = f.values(i), b = f.slope(i);
    for (int k = 1; k <= samples_per_cell; ++k) {
      const double x = (hi - lo) * k / samples_per_cell;
      const double Fs = F + a * x + 0.5 * b * x * x;
      C = std::max(C, Fs / std::pow(lo + x, p1));
    }
    F += 0.5 * (hi - lo) * (f.values(i) + f.values(i + 1));
  }
  return C;
}

}  // namespace nullcone
