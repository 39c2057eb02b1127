#include "nullcone/mkg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/QR>

#include "nullcone/error.hpp"
#include "nullcone/quadrature.hpp"

namespace nullcone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Series = std::vector<AngularField>;

double japanese(double u) { return std::sqrt(1 + u * u); }

Eigen::VectorXd degree_weights(int lmax, int n2) {
  Eigen::VectorXd w(num_coeffs(lmax));
  for (int k = 0; k < w.size(); ++k) {
    const double l = degree_of(k);
    w(k) = n2 == 0 ? 1.0 : std::pow(l * (l + 1), n2);
  }
  return w;
}

// n-th derivative at every node from the 5 nearest nodes in the abscissa x.
Series differentiate(const Eigen::VectorXd& x, const Series& f, int n) {
  if (n == 0) return f;
  const int count = static_cast<int>(x.size());
  const int width = std::min(count, 5);
  Series out(count);
  for (int i = 0; i < count; ++i) {
    const int first = std::clamp(i - width / 2, 0, count - width);
    std::vector<double> s(width);
    for (int k = 0; k < width; ++k) s[k] = x(first + k);
    const Eigen::VectorXd w = fd_weights(x(i), s, n);
    out[i] = AngularField::Zero(f[0].size());
    for (int k = 0; k < width; ++k) out[i] += w(k) * f[first + k];
  }
  return out;
}

Eigen::VectorXd log_of(const Eigen::VectorXd& x) { return x.array().log().matrix(); }

// least-squares slope and intercept of log y against log x over the positive samples
bool loglog_fit(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept) {
  std::vector<std::pair<double, double>> pts;
  for (size_t k = 0; k < x.size(); ++k)
    if (y[k] > 0 && x[k] > 0) pts.emplace_back(std::log(x[k]), std::log(y[k]));
  if (pts.size() < 3) return false;
  Eigen::MatrixXd A(pts.size(), 2);
  Eigen::VectorXd b(pts.size());
  for (size_t k = 0; k < pts.size(); ++k) {
    A(k, 0) = pts[k].first;
    A(k, 1) = 1;
    b(k) = pts[k].second;
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  slope = c(0);
  intercept = c(1);
  return std::isfinite(slope) && std::isfinite(intercept);
}

// int_{U*}^{u_max} of the sampled integrand plus a power-law tail in <u> fitted on the last 30% of nodes
NormTerm u_integral(const Eigen::VectorXd& u, const Eigen::VectorXd& y, const std::string& family, int n1, int n2) {
  NormTerm t{family, n1, n2, 0, 0};
  const double body = cubic_panels(u, y);
  const double u0 = u(0), u1 = u(u.size() - 1);
  std::vector<double> xs, ys;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u(i) >= u1 - 0.3 * (u1 - u0)) {
      xs.push_back(japanese(u(i)));
      ys.push_back(y(i));
    }
  double slope, icpt;
  if (*std::max_element(ys.begin(), ys.end()) <= 0) {
    t.tail = 0;
  } else if (!loglog_fit(xs, ys, slope, icpt) || -slope <= 1 + 1e-3) {
    t.tail = kInf;
  } else {
    // int_{u1}^inf c <u>^-p du with du = (1 - S^-2)^(-1/2) dS, S = <u>
    const double c = std::exp(icpt), p = -slope, S = japanese(u1);
    t.tail = c * (std::pow(S, 1 - p) / (p - 1) + std::pow(S, -1 - p) / (2 * (p + 1)) +
                  3 * std::pow(S, -3 - p) / (8 * (p + 3)) + 5 * std::pow(S, -5 - p) / (16 * (p + 5)));
  }
  t.value = body + t.tail;
  return t;
}

// int_0^1 g(r) dr from samples on [r_min, 1]; the piece below r_min from a power-law fit of the first nodes
ConeNorm r_integral(const Eigen::VectorXd& r, const Eigen::VectorXd& g) {
  ConeNorm n;
  const Eigen::VectorXd s = log_of(r);
  const double body = cubic_panels(s, r.cwiseProduct(g));
  std::vector<double> xs, ys;
  const double s0 = s(0), s1 = s(s.size() - 1);
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (s(i) <= s0 + 0.15 * (s1 - s0)) {
      xs.push_back(r(i));
      ys.push_back(g(i));
    }
  double slope, icpt;
  if (*std::max_element(ys.begin(), ys.end()) <= 0) {
    n.tail = 0;
  } else if (!loglog_fit(xs, ys, slope, icpt) || slope <= -1 + 1e-3) {
    n.tail = kInf;
  } else {
    n.tail = std::exp(icpt) * std::pow(r(0), slope + 1) / (slope + 1);
  }
  n.value = body + n.tail;
  return n;
}

// sup over (0, 1]; infinite when the samples grow toward the vertex
ConeNorm r_sup(const Eigen::VectorXd& r, const Eigen::VectorXd& g) {
  ConeNorm n;
  n.value = g.maxCoeff();
  std::vector<double> xs, ys;
  const Eigen::VectorXd s = log_of(r);
  const double s0 = s(0), s1 = s(s.size() - 1);
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (s(i) <= s0 + 0.15 * (s1 - s0)) {
      xs.push_back(r(i));
      ys.push_back(g(i));
    }
  double slope, icpt;
  if (n.value > 0 && loglog_fit(xs, ys, slope, icpt) && slope < -1e-3) {
    n.value = kInf;
    n.divergent = true;
  }
  return n;
}

void flag(ConeNorm& n, double limit) {
  if (!std::isfinite(n.value) || (n.value > 0 && n.tail / n.value > limit)) n.divergent = true;
}

Series times(const Series& f, const std::function<double(double)>& w, const Eigen::VectorXd& x) {
  Series out(f.size());
  for (size_t i = 0; i < f.size(); ++i) out[i] = w(x(i)) * f[i];
  return out;
}

void check_series(const Series& s, Eigen::Index n, int nc, const char* what) {
  if (static_cast<Eigen::Index>(s.size()) != n) throw SizeMismatch(std::string(what) + ": one field per node required");
  for (const auto& f : s) {
    if (f.size() != nc) throw SizeMismatch(std::string(what) + ": coefficient count");
    if (!f.allFinite()) throw DomainError(std::string(what) + ": non-finite value");
  }
}

}  // namespace

// ---------------------------------------------------------------- scattering data

void ScatteringData::validate() const {
  if (lmax < 0) throw DomainError("ScatteringData: negative lmax");
  if (u_nodes.size() < 8) throw DomainError("ScatteringData: at least 8 nodes required");
  for (Eigen::Index i = 1; i < u_nodes.size(); ++i)
    if (!(u_nodes(i) > u_nodes(i - 1))) throw DomainError("ScatteringData: nodes must increase");
  const int nc = num_coeffs(lmax);
  check_series(A_bar[0], u_nodes.size(), nc, "A_bar");
  check_series(A_bar[1], u_nodes.size(), nc, "A_bar");
  check_series(Phi_re, u_nodes.size(), nc, "Phi");
  check_series(Phi_im, u_nodes.size(), nc, "Phi");
}

std::vector<std::string> ScatteringData::check_hints() const {
  std::vector<std::string> out;
  const Eigen::Index n = u_nodes.size();
  const double u0 = u_nodes(0), u1 = u_nodes(n - 1);
  auto check = [&](double hint, auto&& magnitude, const char* name) {
    if (hint <= 0) return;
    std::vector<double> xs, ys;
    for (Eigen::Index i = 0; i < n; ++i)
      if (u_nodes(i) >= u1 - 0.3 * (u1 - u0)) {
        xs.push_back(japanese(u_nodes(i)));
        ys.push_back(magnitude(i));
      }
    double slope, icpt;
    if (!loglog_fit(xs, ys, slope, icpt)) return;
    if (std::abs(-slope - hint) > 0.3 * hint) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s decays like u^%.3g, hint was u^-%.3g", name, slope, hint);
      out.emplace_back(buf);
    }
  };
  check(A_decay_hint, [&](Eigen::Index i) { return std::hypot(A_bar[0][i].norm(), A_bar[1][i].norm()); }, "A_bar");
  check(Phi_decay_hint, [&](Eigen::Index i) { return std::hypot(Phi_re[i].norm(), Phi_im[i].norm()); }, "Phi");
  return out;
}

Eigen::VectorXd scattering_nodes(double U_star, double u_max, double h0, double growth) {
  if (!(u_max > U_star) || !(h0 > 0) || !(growth >= 1)) throw DomainError("scattering_nodes: bad parameters");
  std::vector<double> u{U_star};
  double h = h0;
  while (u.back() + h < u_max - 0.25 * h) {
    u.push_back(u.back() + h);
    h *= growth;
  }
  u.push_back(u_max);
  return Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
}

ScatteringData sample_scattering(const std::function<ScatteringSample(double)>& fn, const Eigen::VectorXd& u_nodes,
                                 int lmax, double delta) {
  ScatteringData d;
  d.lmax = lmax;
  d.delta = delta;
  d.u_nodes = u_nodes;
  const int nc = num_coeffs(lmax);
  auto fit = [nc](AngularField f) {
    if (f.size() == 0) return AngularField(AngularField::Zero(nc));
    if (f.size() > nc) throw SizeMismatch("sample_scattering: sample has more modes than lmax");
    AngularField g = AngularField::Zero(nc);
    g.head(f.size()) = f;
    return g;
  };
  for (Eigen::Index i = 0; i < u_nodes.size(); ++i) {
    const ScatteringSample s = fn(u_nodes(i));
    d.A_bar[0].push_back(fit(s.A_bar[0]));
    d.A_bar[1].push_back(fit(s.A_bar[1]));
    d.Phi_re.push_back(fit(s.Phi_re));
    d.Phi_im.push_back(fit(s.Phi_im));
  }
  d.validate();
  return d;
}

ScatteringData load_scattering_data(const std::string& path, double delta) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  struct Row {
    double u;
    int l, m, comp;
    double value;
  };
  std::vector<Row> rows;
  std::map<double, int> us;
  int lmax = 0;
  std::string line;
  int lineno = 0;
  const std::map<std::string, int> comps{{"A1", 0}, {"A2", 1}, {"Phi_re", 2}, {"Phi_im", 3}};
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ss(line);
    Row r;
    std::string comp;
    if (!(ss >> r.u)) continue;
    if (!(ss >> r.l >> r.m >> comp >> r.value) || !comps.count(comp) || r.l < 0 || std::abs(r.m) > r.l)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'u l m component value'");
    r.comp = comps.at(comp);
    rows.push_back(r);
    us[r.u] = 0;
    lmax = std::max(lmax, r.l);
  }
  if (us.empty()) throw ParseError(path + ": no data rows");
  ScatteringData d;
  d.lmax = lmax;
  d.delta = delta;
  d.u_nodes.resize(static_cast<Eigen::Index>(us.size()));
  int k = 0;
  for (auto& [u, idx] : us) {
    idx = k;
    d.u_nodes(k++) = u;
  }
  const int nc = num_coeffs(lmax);
  std::array<Series*, 4> target{&d.A_bar[0], &d.A_bar[1], &d.Phi_re, &d.Phi_im};
  for (auto* s : target) s->assign(us.size(), AngularField::Zero(nc));
  for (const Row& r : rows) (*target[r.comp])[us[r.u]](coeff_index(r.l, r.m)) = r.value;
  d.validate();
  return d;
}

void save_scattering_data(const ScatteringData& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# u l m component value\n";
  const char* names[4] = {"A1", "A2", "Phi_re", "Phi_im"};
  const std::array<const Series*, 4> src{&d.A_bar[0], &d.A_bar[1], &d.Phi_re, &d.Phi_im};
  char buf[128];
  for (Eigen::Index i = 0; i < d.u_nodes.size(); ++i)
    for (int c = 0; c < 4; ++c)
      for (int l = 0; l <= d.lmax; ++l)
        for (int m = -l; m <= l; ++m) {
          std::snprintf(buf, sizeof buf, "%.17g %d %d %s %.17g\n", d.u_nodes(i), l, m, names[c],
                        (*src[c])[i](coeff_index(l, m)));
          out << buf;
        }
}

// ---------------------------------------------------------------- SN norm

SnNormReport sn_norm(const ScatteringData& data, double U_star, double delta, const SnOptions& opts) {
  data.validate();
  const Eigen::VectorXd& u = data.u_nodes;
  if (std::abs(u(0) - U_star) > 1e-12 * std::max(1.0, std::abs(U_star)))
    throw PreconditionError("sn_norm: the first node must be U*");
  if (u(u.size() - 1) < U_star + 10 - 1e-12) throw PreconditionError("sn_norm: need u_max >= U* + 10");
  if (opts.mode == ConnectionMode::supplied && !opts.a_u) throw PreconditionError("sn_norm: supplied mode needs a_u");
  SnNormReport rep;
  rep.warnings = data.check_hints();
  const Eigen::Index n = u.size();

  for (int n1 = 0; n1 <= 1; ++n1) {
    const Series d0 = differentiate(u, data.A_bar[0], n1), d1 = differentiate(u, data.A_bar[1], n1);
    for (int n2 = 0; n2 <= 6 - 3 * n1; ++n2) {
      const Eigen::VectorXd w = degree_weights(data.lmax, n2);
      Eigen::VectorXd y(n);
      for (Eigen::Index i = 0; i < n; ++i)
        y(i) = std::pow(japanese(u(i)), 1 + 2 * delta + 2 * n1) *
               (w.dot(d0[i].cwiseAbs2()) + w.dot(d1[i].cwiseAbs2()));
      rep.terms.push_back(u_integral(u, y, "A_bar", n1, n2));
    }
  }

  Sphere sph(data.lmax);
  Series re = data.Phi_re, im = data.Phi_im;
  for (int n1 = 0; n1 <= 2; ++n1) {
    if (n1 > 0) {
      Series dre = differentiate(u, re, 1), dim = differentiate(u, im, 1);
      if (opts.mode == ConnectionMode::supplied) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const AngularField a = opts.a_u(u(i));
          if (a.size() != sph.num_coeffs()) throw SizeMismatch("sn_norm: a_u coefficient count");
          dre[i] -= sph.product(a, im[i]);
          dim[i] += sph.product(a, re[i]);
        }
      }
      re = std::move(dre);
      im = std::move(dim);
    }
    for (int n2 = 0; n2 <= 5 - 2 * std::max(n1 - 1, 0); ++n2) {
      const Eigen::VectorXd w = degree_weights(data.lmax, n2);
      Eigen::VectorXd y(n);
      for (Eigen::Index i = 0; i < n; ++i)
        y(i) = std::pow(japanese(u(i)), -1 + 2 * delta + 2 * n1) * (w.dot(re[i].cwiseAbs2()) + w.dot(im[i].cwiseAbs2()));
      rep.terms.push_back(u_integral(u, y, "Phi", n1, n2));
    }
  }

  double tail = 0;
  for (const auto& t : rep.terms) {
    rep.total += t.value;
    tail += t.tail;
  }
  rep.tail_fraction = rep.total > 0 ? tail / rep.total : 0.0;
  rep.divergent = !std::isfinite(rep.total) || rep.tail_fraction > opts.tail_limit;
  return rep;
}

// ---------------------------------------------------------------- transfer

double u_star_of(double u, double U_star) { return u - U_star + 0.25; }

ConeGaugeData to_cone_data(const ScatteringData& data, double U_star) {
  data.validate();
  const Eigen::Index n = data.u_nodes.size();
  ConeGaugeData c;
  c.lmax = data.lmax;
  c.v_nodes.resize(n);
  for (auto& s : c.alpha) s.resize(n);
  c.phi_re.resize(n);
  c.phi_im.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double us = u_star_of(data.u_nodes(i), U_star);
    if (us < 0.25 - 1e-14) throw DomainError("to_cone_data: u below U* maps outside v~ in (0, 1]");
    const Eigen::Index k = n - 1 - i;
    c.v_nodes(k) = std::min(1.0, 1 / (4 * us));
    for (int j = 0; j < 2; ++j) c.alpha[j][k] = -16 * us * us * us * data.A_bar[j][i];
    c.phi_re[k] = 4 * us * data.Phi_re[i];
    c.phi_im[k] = 4 * us * data.Phi_im[i];
  }
  return c;
}

// ---------------------------------------------------------------- transport

CoefficientTable CoefficientTable::identity() {
  CoefficientTable t;
  t.C[0][0][0] = t.C[1][0][0] = 1;
  return t;
}

namespace {

// Values of a sampled cone field f = re + i im anywhere in (0, 1]: cubic Lagrange in
// log v~ on the nodes, a complex power law per coefficient below the first node.
class ConeInterpolant {
 public:
  ConeInterpolant(const Eigen::VectorXd& v, const Series& re, const Series* im = nullptr) : s_(log_of(v)), re_(re) {
    if (im) im_ = *im;
  }

  AngularField operator()(double v) const { return eval(v, true); }
  AngularField imag(double v) const { return eval(v, false); }

 private:
  AngularField eval(double v, bool real_part) const {
    const Series& f = real_part ? re_ : im_;
    if (f.empty()) return AngularField::Zero(re_[0].size());
    const Eigen::Index n = s_.size();
    const double s = std::log(v);
    if (s < s_(0)) {
      AngularField out(f[0].size());
      double scale = re_[0].cwiseAbs().maxCoeff();
      if (!im_.empty()) scale = std::max(scale, im_[0].cwiseAbs().maxCoeff());
      for (Eigen::Index k = 0; k < out.size(); ++k) {
        const std::complex<double> a(re_[0](k), im_.empty() ? 0.0 : im_[0](k));
        const std::complex<double> b(re_[1](k), im_.empty() ? 0.0 : im_[1](k));
        std::complex<double> z = 0;
        if (std::abs(a) <= 1e-12 * scale) {
          z = 0;
        } else if (b == 0.0 || (std::imag(b / a) == 0 && std::real(b / a) < 0)) {
          z = a * std::exp(s - s_(0));
        } else {
          z = a * std::exp(std::log(b / a) / (s_(1) - s_(0)) * (s - s_(0)));
        }
        out(k) = real_part ? z.real() : z.imag();
      }
      return out;
    }
    const Eigen::Index hi = std::lower_bound(s_.data(), s_.data() + n, s) - s_.data();
    const Eigen::Index first = std::clamp<Eigen::Index>(hi - 2, 0, n - 4);
    AngularField out = AngularField::Zero(f[0].size());
    for (Eigen::Index p = first; p < first + 4; ++p) {
      double l = 1;
      for (Eigen::Index q = first; q < first + 4; ++q)
        if (q != p) l *= (s - s_(q)) / (s_(p) - s_(q));
      out += l * f[p];
    }
    return out;
  }

  Eigen::VectorXd s_;
  Series re_, im_;
};

struct TransportState {
  std::array<AngularField, 4> y;  // r A_e1, r A_e2, w = r L(r A_Lb), r A_Lb

  TransportState operator+(const TransportState& o) const {
    TransportState t;
    for (int k = 0; k < 4; ++k) t.y[k] = y[k] + o.y[k];
    return t;
  }
  TransportState operator*(double c) const {
    TransportState t;
    for (int k = 0; k < 4; ++k) t.y[k] = c * y[k];
    return t;
  }
  double max_abs() const {
    double m = 0;
    for (const auto& f : y) m = std::max(m, f.cwiseAbs().maxCoeff());
    return m;
  }
};

// int_0^v f per coefficient from samples at v/4, v/2 and v: a power law when the two
// successive ratios agree, otherwise the quadratic through the samples
AngularField head_integral(const AngularField& quarter, const AngularField& half, const AngularField& full, double v) {
  AngularField out(full.size());
  const double noise = 1e-12 * std::max({quarter.cwiseAbs().maxCoeff(), half.cwiseAbs().maxCoeff(), full.cwiseAbs().maxCoeff()});
  for (Eigen::Index k = 0; k < full.size(); ++k) {
    const double q = quarter(k), a = half(k), b = full(k);
    if (q == 0 && a == 0 && b == 0) {
      out(k) = 0;
      continue;
    }
    if (std::max({std::abs(q), std::abs(a), std::abs(b)}) > noise && q * a > 0 && a * b > 0) {
      const double p1 = std::log2(a / q), p2 = std::log2(b / a);
      if (std::abs(p1 - p2) < 0.25) {
        if (p2 <= -1 + 1e-9) throw DomainError("gauge_transport: transport source is not integrable at the vertex");
        out(k) = b * v / (p2 + 1);
        continue;
      }
    }
    // Lagrange weights of int_0^1 on the nodes 1/4, 1/2, 1
    out(k) = v * (q * 8.0 / 3 - a * 2.0 + b * 1.0 / 3);
  }
  return out;
}

}  // namespace

ConeGaugeData gauge_transport(ConeGaugeData cone, const CoefficientTable& C, const TransportOptions& opts) {
  const int n = cone.size();
  if (n < 4) throw PreconditionError("gauge_transport: at least 4 cone nodes required");
  const int nc = num_coeffs(cone.lmax);
  check_series(cone.alpha[0], n, nc, "alpha");
  check_series(cone.alpha[1], n, nc, "alpha");
  check_series(cone.phi_re, n, nc, "phi");
  check_series(cone.phi_im, n, nc, "phi");
  const Sphere sph(cone.lmax);
  const Eigen::VectorXd s = log_of(cone.v_nodes);
  auto l_of = [&](const Series& f) {
    Series e = differentiate(s, f, 1);
    for (int i = 0; i < n; ++i) e[i] /= cone.v_nodes(i);
    return e;
  };
  const ConeInterpolant alpha0(cone.v_nodes, cone.alpha[0]), alpha1(cone.v_nodes, cone.alpha[1]);
  const ConeInterpolant phi(cone.v_nodes, cone.phi_re, &cone.phi_im);
  const Series lre = l_of(cone.phi_re), lim = l_of(cone.phi_im);
  const ConeInterpolant Lphi(cone.v_nodes, lre, &lim);
  const bool has_phi = std::any_of(cone.phi_re.begin(), cone.phi_re.end(), [](auto& f) { return !f.isZero(0); }) ||
                       std::any_of(cone.phi_im.begin(), cone.phi_im.end(), [](auto& f) { return !f.isZero(0); });
  auto omega_sum = [&](const AngularField& f) {
    return AngularField(sph.rotate(f, Axis::x) + sph.rotate(f, Axis::y) + sph.rotate(f, Axis::z));
  };

  // the w source at v given r A_e
  auto w_source = [&](double v, const std::array<AngularField, 2>& Y) {
    const std::array<AngularField, 2> a{alpha0(v), alpha1(v)};
    AngularField src = AngularField::Zero(nc);
    for (int j = 0; j < 2; ++j) {
      const AngularField A = Y[j] / v;
      const AngularField rLA = v * a[j] - A;
      const auto& c = C.C[j];
      if (c[0][0] != 0) src += c[0][0] * A;
      if (c[1][0] != 0) src += c[1][0] * rLA;
      if (c[0][1] != 0) src += c[0][1] * omega_sum(A);
      if (c[1][1] != 0) src += c[1][1] * omega_sum(rLA);
    }
    if (has_phi) src -= v * v * (sph.product(phi.imag(v), Lphi(v)) - sph.product(phi(v), Lphi.imag(v)));
    return src;
  };
  auto rhs = [&](double v, const TransportState& st) {
    TransportState d;
    d.y[0] = v * alpha0(v);
    d.y[1] = v * alpha1(v);
    d.y[2] = w_source(v, {st.y[0], st.y[1]});
    d.y[3] = st.y[2] / v;
    return d;
  };
  auto rk4 = [&](double v, const TransportState& st, double h) {
    const TransportState k1 = rhs(v, st);
    const TransportState k2 = rhs(v + 0.5 * h, st + k1 * (0.5 * h));
    const TransportState k3 = rhs(v + 0.5 * h, st + k2 * (0.5 * h));
    const TransportState k4 = rhs(v + h, st + k3 * h);
    return st + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6);
  };

  // state at the first node from head integrals of the continued data on v0 / 2^k
  const double v0 = cone.v_nodes(0);
  auto at = [&](int k) { return v0 * std::pow(0.5, k); };
  std::array<std::array<AngularField, 5>, 2> Y;
  for (int j = 0; j < 2; ++j) {
    const ConeInterpolant& a = j == 0 ? alpha0 : alpha1;
    std::array<AngularField, 7> f;
    for (int k = 0; k < 7; ++k) f[k] = at(k) * a(at(k));
    for (int k = 0; k < 5; ++k) Y[j][k] = head_integral(f[k + 2], f[k + 1], f[k], at(k));
  }
  std::array<AngularField, 5> src;
  for (int k = 0; k < 5; ++k) src[k] = w_source(at(k), {Y[0][k], Y[1][k]});
  std::array<AngularField, 3> W, Wr;
  for (int k = 0; k < 3; ++k) {
    W[k] = head_integral(src[k + 2], src[k + 1], src[k], at(k));
    Wr[k] = W[k] / at(k);
  }
  TransportState st;
  st.y = {Y[0][0], Y[1][0], W[0], head_integral(Wr[2], Wr[1], Wr[0], v0)};

  for (auto& f : cone.A_e) f.assign(n, AngularField::Zero(nc));
  cone.A_Lb.assign(n, AngularField::Zero(nc));
  auto store = [&](int i, const TransportState& x) {
    const double v = cone.v_nodes(i);
    cone.A_e[0][i] = x.y[0] / v;
    cone.A_e[1][i] = x.y[1] / v;
    cone.A_Lb[i] = x.y[3] / v;
  };
  store(0, st);
  for (int i = 0; i + 1 < n; ++i) {
    const double a = cone.v_nodes(i), b = cone.v_nodes(i + 1);
    double v = a, h = b - a;
    int halvings = 0;
    while (v < b) {
      h = std::min(h, b - v);
      const TransportState full = rk4(v, st, h);
      const TransportState half = rk4(v + 0.5 * h, rk4(v, st, 0.5 * h), 0.5 * h);
      const double err = (half + full * -1.0).max_abs() / 15;
      const double tol = opts.tol * std::max(1.0, half.max_abs()) * h / (b - a);
      if (err <= tol || h <= (b - a) * std::ldexp(1.0, -opts.max_halvings)) {
        if (err > tol) throw StepFailure("gauge_transport: local error above tolerance at v~=" + std::to_string(v));
        st = half + (half + full * -1.0) * (1.0 / 15);
        v += h;
        if (err < tol / 32) h *= 2;
      } else {
        h *= 0.5;
        ++halvings;
      }
    }
    store(i + 1, st);
  }
  cone.A_L_zero = true;
  cone.transported = true;
  return cone;
}

// ---------------------------------------------------------------- cone norms

namespace {

// sum over words of length n2 of |(rL)^n1 d^n2 f|^2 per node, for plain rotation words
Eigen::VectorXd plain_density(const Eigen::VectorXd& v, const std::vector<const Series*>& fields, int lmax, int n1,
                              int n2) {
  const Eigen::VectorXd s = log_of(v);
  const Eigen::VectorXd w = degree_weights(lmax, n2);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  for (const Series* f : fields) {
    const Series d = differentiate(s, *f, n1);
    for (Eigen::Index i = 0; i < v.size(); ++i) out(i) += w.dot(d[i].cwiseAbs2());
  }
  return out;
}

// Covariant words D_a = Omega_a + i A(Omega_a) on the complex scalar; level n holds the 3^n
// words at every node.
class CovariantWords {
 public:
  CovariantWords(const ConeGaugeData& c, int max_len) : sph_(c.lmax) {
    const AngularGrid& g = sph_.grid(2);
    const int n = c.size();
    // A(Omega_a) on grid(2) at every node; the frame is singular at the poles
    conn_.assign(n, Eigen::MatrixXd::Zero(g.size(), 3));
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd A1 = g.synthesize(c.A_e[0][i]), A2 = g.synthesize(c.A_e[1][i]);
      for (int k = 0; k < g.size(); ++k) {
        const double th = g.theta(k), ph = g.phi(k);
        if (std::sin(th) < 1e-3) continue;
        const Eigen::Vector3d om(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
        const Eigen::Vector3d et(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th));
        const Eigen::Vector3d ep(-std::sin(ph), std::cos(ph), 0);
        const Eigen::Vector3d A = A1(k) * et + A2(k) * ep;
        for (int a = 0; a < 3; ++a) conn_[i](k, a) = c.v_nodes(i) * A.dot(Eigen::Vector3d::Unit(a).cross(om));
      }
    }
    for (int k = 0; k < g.size(); ++k)
      if (std::sin(g.theta(k)) < 1e-3) cap_weight_ += g.weights()(k);
    cap_weight_ /= 4 * std::numbers::pi;

    levels_.resize(max_len + 1);
    levels_[0] = {{c.phi_re, c.phi_im}};
    for (int len = 1; len <= max_len; ++len) {
      for (const auto& [pre, pim] : levels_[len - 1]) {
        for (int a = 0; a < 3; ++a) {
          Series re(n), im(n);
          for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd ca = conn_[i].col(a);
            re[i] = sph_.rotate(pre[i], static_cast<Axis>(a)) - g.analyze(ca.cwiseProduct(g.synthesize(pim[i])));
            im[i] = sph_.rotate(pim[i], static_cast<Axis>(a)) + g.analyze(ca.cwiseProduct(g.synthesize(pre[i])));
          }
          levels_[len].emplace_back(std::move(re), std::move(im));
        }
      }
    }
  }

  Eigen::VectorXd density(const Eigen::VectorXd& v, int n1, int n2) const {
    const Eigen::VectorXd s = log_of(v);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (const auto& [re, im] : levels_[n2]) {
      const Series dre = differentiate(s, re, n1), dim = differentiate(s, im, n1);
      for (Eigen::Index i = 0; i < v.size(); ++i) out(i) += dre[i].squaredNorm() + dim[i].squaredNorm();
    }
    return out;
  }

  double cap_weight() const { return cap_weight_; }

 private:
  Sphere sph_;
  std::vector<Eigen::MatrixXd> conn_;
  std::vector<std::vector<std::pair<Series, Series>>> levels_;
  double cap_weight_ = 0;
};

}  // namespace

ConeEnergies cone_energies(const ConeGaugeData& c, double delta, double tail_limit) {
  if (!c.transported) throw PreconditionError("cone_energies: run gauge_transport first");
  const int n = c.size();
  if (n < 8) throw PreconditionError("cone_energies: at least 8 cone nodes required");
  const Eigen::VectorXd& v = c.v_nodes;
  const Eigen::ArrayXd e_int = v.array().pow(1 - 2 * delta), e_sup = v.array().pow(2 - 2 * delta);
  ConeEnergies out;

  auto integral = [&](auto&& density, auto&& range, int n1max) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    for (int n1 = 0; n1 <= n1max; ++n1)
      for (int n2 = 0; n2 <= range(n1); ++n2) g += density(n1, n2);
    ConeNorm r = r_integral(v, (e_int * g.array()).matrix());
    flag(r, tail_limit);
    return r;
  };
  auto supremum = [&](auto&& density, auto&& range, int n1max) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    for (int n1 = 0; n1 <= n1max; ++n1)
      for (int n2 = 0; n2 <= range(n1); ++n2) g += density(n1, n2);
    return r_sup(v, (e_sup * g.array()).matrix());
  };

  const std::vector<const Series*> A{&c.A_e[0], &c.A_e[1]}, phi{&c.phi_re, &c.phi_im}, Lb{&c.A_Lb};
  auto plain = [&](const std::vector<const Series*>& f) {
    return [&, f](int n1, int n2) { return plain_density(v, f, c.lmax, n1, n2); };
  };
  out.E0_A = integral(plain(A), [](int n1) { return 6 - 3 * std::max(0, n1 - 1); }, 2);
  out.H0_A = supremum(plain(A), [](int n1) { return 6 - 3 * n1; }, 1);
  out.E0_phi = integral(plain(phi), [](int n1) { return 5 - 2 * std::max(n1 - 1, 0); }, 2);
  out.H0_phi = supremum(plain(phi), [](int n1) { return 5 - 2 * n1; }, 1);
  out.E0_ALb = integral(plain(Lb), [](int n1) { return 5 - n1; }, 2);

  const bool flat = std::all_of(c.A_e[0].begin(), c.A_e[0].end(), [](auto& f) { return f.isZero(0); }) &&
                    std::all_of(c.A_e[1].begin(), c.A_e[1].end(), [](auto& f) { return f.isZero(0); });
  if (flat) {
    out.E0D_phi = out.E0_phi;
    out.H0D_phi = out.H0_phi;
  } else {
    const CovariantWords words(c, 5);
    auto cov = [&](int n1, int n2) { return words.density(v, n1, n2); };
    out.E0D_phi = integral(cov, [](int n1) { return 5 - 2 * std::max(n1 - 1, 0); }, 2);
    out.H0D_phi = supremum(cov, [](int n1) { return 5 - 2 * n1; }, 1);
    out.cap_weight = words.cap_weight();
  }

  const std::pair<const char*, const ConeNorm*> named[] = {
      {"E0_A", &out.E0_A},       {"H0_A", &out.H0_A},     {"E0D_phi", &out.E0D_phi}, {"H0D_phi", &out.H0D_phi},
      {"E0_phi", &out.E0_phi}, {"H0_phi", &out.H0_phi}, {"E0_ALb", &out.E0_ALb}};
  for (const auto& [name, norm] : named)
    if (norm->divergent) out.divergent.emplace_back(name);
  auto ratio = [](double a, double b) { return b > 0 ? a / b : 0.0; };
  out.ratios = {
      {"H0_A/E0_A", ratio(out.H0_A.value, out.E0_A.value)},
      {"H0D_phi/E0D_phi", ratio(out.H0D_phi.value, out.E0D_phi.value)},
      {"H0_phi/E0_phi", ratio(out.H0_phi.value, out.E0_phi.value)},
      {"E0_phi/((E0_A+E0D_phi)(1+H0_A+H0D_phi)^4)",
       ratio(out.E0_phi.value,
             (out.E0_A.value + out.E0D_phi.value) * std::pow(1 + out.H0_A.value + out.H0D_phi.value, 4))},
      {"E0_ALb/(E0_A+E0_phi*H0_phi)", ratio(out.E0_ALb.value, out.E0_A.value + out.E0_phi.value * out.H0_phi.value)},
  };
  return out;
}

void ConeEnergies::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  char buf[192];
  out << "# cone energies\nname,value,tail,divergent\n";
  const std::pair<const char*, const ConeNorm*> named[] = {
      {"E0_A", &E0_A},     {"H0_A", &H0_A},     {"E0D_phi", &E0D_phi}, {"H0D_phi", &H0D_phi},
      {"E0_phi", &E0_phi}, {"H0_phi", &H0_phi}, {"E0_ALb", &E0_ALb}};
  for (const auto& [name, n] : named) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%d\n", name, n->value, n->tail, n->divergent ? 1 : 0);
    out << buf;
  }
  for (const auto& [name, r] : ratios) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,0,0\n", name.c_str(), r);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "cap_weight,%.17g,0,0\n", cap_weight);
  out << buf;
}

// ---------------------------------------------------------------- transfer check

TransferCheck transfer_check(const ScatteringData& data, double U_star, double delta) {
  data.validate();
  const Eigen::VectorXd& u = data.u_nodes;
  const Eigen::Index n = u.size();
  TransferCheck out;
  const double k4 = std::pow(4.0, 2 * delta);
  auto us = [U_star](double x) { return u_star_of(x, U_star); };

  // u side, in the variable x = log u* so that u* d_u = d_x
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = std::log(us(u(i)));
  auto u_side = [&](const std::vector<Series>& fields, int power, double base, auto&& range, int n1max) {
    double total = 0;
    for (int n1 = 0; n1 <= n1max; ++n1) {
      std::vector<Series> d;
      for (const auto& f : fields) d.push_back(differentiate(x, times(f, [&](double y) { return std::pow(us(y), power); }, u), n1));
      for (int n2 = 0; n2 <= range(n1); ++n2) {
        const Eigen::VectorXd w = degree_weights(data.lmax, n2);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          double dens = 0;
          for (const auto& f : d) dens += w.dot(f[i].cwiseAbs2());
          y(i) = std::pow(us(u(i)), base + 2 * delta - 2) * dens;
        }
        // tail in u* rather than <u>: shift the nodes so the fit sees u*
        Eigen::VectorXd ush(n);
        for (Eigen::Index i = 0; i < n; ++i) ush(i) = us(u(i));
        const double body = cubic_panels(u, y);
        std::vector<double> xs, ys;
        for (Eigen::Index i = 0; i < n; ++i)
          if (u(i) >= u(n - 1) - 0.3 * (u(n - 1) - u(0))) {
            xs.push_back(ush(i));
            ys.push_back(y(i));
          }
        double slope, icpt, tail = 0;
        if (*std::max_element(ys.begin(), ys.end()) > 0) {
          if (!loglog_fit(xs, ys, slope, icpt) || slope >= -1 - 1e-3)
            tail = kInf;
          else
            tail = std::exp(icpt) * std::pow(ush(n - 1), slope + 1) / (-slope - 1);
        }
        total += body + tail;
      }
    }
    return k4 * total;
  };
  out.alpha_u = u_side({data.A_bar[0], data.A_bar[1]}, 3, -3, [](int n1) { return 6 - 3 * n1; }, 1);
  out.phi_u = u_side({data.Phi_re, data.Phi_im}, 1, -1, [](int n1) { return 5 - 2 * std::max(n1 - 1, 0); }, 2);

  const ConeGaugeData c = to_cone_data(data, U_star);
  const Eigen::VectorXd& v = c.v_nodes;
  auto cone_side = [&](const std::vector<const Series*>& fields, double base, auto&& range, int n1max) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(v.size());
    for (int n1 = 0; n1 <= n1max; ++n1)
      for (int n2 = 0; n2 <= range(n1); ++n2) g += plain_density(v, fields, c.lmax, n1, n2);
    return r_integral(v, (v.array().pow(base - 2 * delta) * g.array()).matrix()).value;
  };
  out.alpha_cone = cone_side({&c.alpha[0], &c.alpha[1]}, 3, [](int n1) { return 6 - 3 * n1; }, 1);
  out.phi_cone = cone_side({&c.phi_re, &c.phi_im}, 1, [](int n1) { return 5 - 2 * std::max(n1 - 1, 0); }, 2);
  return out;
}

}  // namespace nullcone
