#include "nullcone/cone_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "nullcone/error.hpp"
#include "nullcone/quadrature.hpp"

namespace nullcone {

namespace {

const double kSqrt4Pi = std::sqrt(4 * std::numbers::pi);

AngularField sampled_euler(const Eigen::VectorXd& nodes, const std::vector<AngularField>& vals, double v, int n) {
  const int count = static_cast<int>(nodes.size());
  if (count == 0) throw DomainError("ConeData: no samples");
  if (count == 1) {
    if (n > 0) return AngularField::Zero(vals[0].size());
    return vals[0];
  }
  if (v <= 0) throw DomainError("ConeData: v must be positive");
  const int width = std::min(count, 4 + n);
  const auto it = std::lower_bound(nodes.data(), nodes.data() + count, v);
  int centre = static_cast<int>(it - nodes.data());
  int first = std::clamp(centre - width / 2, 0, count - width);
  std::vector<double> s(width);
  for (int k = 0; k < width; ++k) s[k] = std::log(nodes(first + k));
  const Eigen::VectorXd w = fd_weights(std::log(v), s, n);
  AngularField out = AngularField::Zero(vals[0].size());
  for (int k = 0; k < width; ++k) out += w(k) * vals[first + k];
  return out;
}

}  // namespace

double omega_words_norm_sq(const AngularField& f, int n) {
  double s = 0;
  for (Eigen::Index k = 0; k < f.size(); ++k) {
    const int l = degree_of(static_cast<int>(k));
    s += std::pow(double(l) * (l + 1), n) * f(k) * f(k);
  }
  return s;
}

AngularField ConeData::at(double v, int n) const {
  if (closed_form) return closed_form(v, n);
  return sampled_euler(v_nodes, values, v, n);
}

AngularField ConeData::imag_at(double v, int n) const {
  if (imag.empty()) return AngularField::Zero(num_coeffs(lmax));
  return sampled_euler(v_nodes, imag, v, n);
}

double ConeData::radial_G(double s) const { return s * at(s, 0)(0) / kSqrt4Pi; }

double ConeData::radial_dG(double s) const { return (at(s, 0)(0) + at(s, 1)(0)) / kSqrt4Pi; }

void ConeData::validate() const {
  if (static_cast<Eigen::Index>(values.size()) != v_nodes.size())
    throw SizeMismatch("ConeData: one AngularField per v node required");
  if (!imag.empty() && imag.size() != values.size()) throw SizeMismatch("ConeData: imaginary part size");
  for (Eigen::Index i = 0; i < v_nodes.size(); ++i) {
    if (!(v_nodes(i) > 0) || v_nodes(i) > 1 + 1e-14) throw DomainError("ConeData: v nodes must lie in (0, 1]");
    if (i > 0 && !(v_nodes(i) > v_nodes(i - 1))) throw DomainError("ConeData: v nodes must increase");
    if (values[i].size() != num_coeffs(lmax)) throw SizeMismatch("ConeData: coefficient count");
  }
}

Eigen::VectorXd graded_nodes(double v_min, int cells_per_decade) {
  if (!(v_min > 0 && v_min < 1)) throw DomainError("graded_nodes: v_min must lie in (0, 1)");
  const int n = static_cast<int>(std::ceil(std::log10(1 / v_min) * cells_per_decade - 1e-9));
  Eigen::VectorXd s(n + 1);
  for (int k = 0; k <= n; ++k) s(n - k) = std::pow(10.0, -double(k) / cells_per_decade);
  s(0) = std::max(s(0), v_min);
  return s;
}

ConeData power_law(double delta_prime, double amplitude, const AngularField& profile, const Eigen::VectorXd& nodes) {
  if (!(delta_prime > 0)) throw DomainError("power_law: delta' must be positive");
  ConeData d;
  d.lmax = 0;
  while (num_coeffs(d.lmax) < profile.size()) ++d.lmax;
  if (num_coeffs(d.lmax) != profile.size()) throw SizeMismatch("power_law: profile size is not (L+1)^2");
  d.exponent_hint = delta_prime;
  const double e = delta_prime - 1;
  d.closed_form = [=](double v, int n) -> AngularField {
    return (amplitude * std::pow(e, n) * std::pow(v, e)) * profile;
  };
  d.v_nodes = nodes.size() ? nodes : graded_nodes(1e-6);
  for (Eigen::Index i = 0; i < d.v_nodes.size(); ++i) d.values.push_back(d.closed_form(d.v_nodes(i), 0));
  d.validate();
  return d;
}

ConeData from_function(std::function<AngularField(double)> g, int lmax, const Eigen::VectorXd& nodes) {
  ConeData d;
  d.lmax = lmax;
  d.v_nodes = nodes;
  d.closed_form = [g](double v, int n) -> AngularField {
    if (n == 0) return g(v);
    const double s = std::log(v);
    if (n == 1) {
      const double h = 1e-3;
      auto at = [&](int k) { return g(std::exp(s + k * h)); };
      return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h);
    }
    if (n == 2) {
      const double h = 2e-3;
      auto at = [&](int k) { return g(std::exp(s + k * h)); };
      return (-at(2) + 16 * at(1) - 30 * at(0) + 16 * at(-1) - at(-2)) / (12 * h * h);
    }
    throw DomainError("from_function: Euler derivatives above order 2 are not available");
  };
  for (Eigen::Index i = 0; i < nodes.size(); ++i) d.values.push_back(g(nodes(i)));
  d.validate();
  return d;
}

ConeData from_samples(Eigen::VectorXd nodes, std::vector<AngularField> values) {
  ConeData d;
  if (values.empty()) throw DomainError("from_samples: no samples");
  while (num_coeffs(d.lmax) < values[0].size()) ++d.lmax;
  d.v_nodes = std::move(nodes);
  d.values = std::move(values);
  d.validate();
  return d;
}

ConeData load_cone_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open cone data file: " + path);
  std::map<double, std::map<int, double>> rows;
  int lmax = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double v, c;
    int l, m;
    if (!(ss >> v)) continue;
    if (!(ss >> l >> m >> c) || l < 0 || std::abs(m) > l)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'v l m coefficient'");
    lmax = std::max(lmax, l);
    rows[v][coeff_index(l, m)] = c;
  }
  if (rows.empty()) throw ParseError(path + ": no data rows");
  Eigen::VectorXd nodes(rows.size());
  std::vector<AngularField> vals;
  Eigen::Index i = 0;
  for (const auto& [v, coeffs] : rows) {
    nodes(i++) = v;
    AngularField f = AngularField::Zero(num_coeffs(lmax));
    for (const auto& [k, c] : coeffs) f(k) = c;
    vals.push_back(f);
  }
  ConeData d;
  d.lmax = lmax;
  d.v_nodes = nodes;
  d.values = std::move(vals);
  d.validate();
  return d;
}

void save_cone_data(const ConeData& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# v l m coefficient\n";
  char buf[96];
  for (Eigen::Index i = 0; i < data.v_nodes.size(); ++i)
    for (int l = 0; l <= data.lmax; ++l)
      for (int m = -l; m <= l; ++m) {
        std::snprintf(buf, sizeof buf, "%.17g %d %d %.17g\n", data.v_nodes(i), l, m,
                      data.values[i](coeff_index(l, m)));
        out << buf;
      }
}

DataNormReport data_norm(const ConeData& data, double delta, const DataNormOptions& opts) {
  DataNormReport rep;
  rep.delta = delta;
  std::vector<std::pair<int, int>> idx;
  for (int n1 = 0; n1 <= opts.n1_max; ++n1)
    for (int n2 = 0; n2 <= opts.order_sum - n1; ++n2) idx.emplace_back(n1, n2);
  const int nterms = static_cast<int>(idx.size());

  auto integrand = [&](double v, Eigen::VectorXd& out) {
    const double w = std::pow(v, 1 - 2 * delta);
    std::vector<AngularField> re(opts.n1_max + 1), im(opts.n1_max + 1);
    for (int n1 = 0; n1 <= opts.n1_max; ++n1) {
      re[n1] = data.at(v, n1);
      if (data.is_complex()) im[n1] = data.imag_at(v, n1);
    }
    for (int t = 0; t < nterms; ++t) {
      const auto [n1, n2] = idx[t];
      double q = omega_words_norm_sq(re[n1], n2);
      if (data.is_complex()) q += omega_words_norm_sq(im[n1], n2);
      out(t) = w * q;
    }
  };

  // Cells (lo, hi) descending from 1, and per-cell integrals of every term.
  std::vector<double> cell_lo;
  std::vector<Eigen::VectorXd> cell_val;
  if (data.has_closed_form()) {
    const Eigen::VectorXd s = graded_nodes(opts.v_min, opts.cells_per_decade);
    const auto [x, w] = gauss_legendre<double>(opts.gl_points);
    Eigen::VectorXd tmp(nterms);
    for (Eigen::Index c = s.size() - 2; c >= 0; --c) {
      const double lo = s(c), hi = s(c + 1), mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(nterms);
      for (int k = 0; k < opts.gl_points; ++k) {
        integrand(mid + half * x(k), tmp);
        acc += w(k) * half * tmp;
      }
      cell_lo.push_back(lo);
      cell_val.push_back(acc);
    }
  } else {
    // trapezoid in log v over the sample nodes
    const Eigen::VectorXd& s = data.v_nodes;
    Eigen::VectorXd a(nterms), b(nterms);
    for (Eigen::Index c = s.size() - 2; c >= 0; --c) {
      integrand(s(c), a);
      integrand(s(c + 1), b);
      cell_lo.push_back(s(c));
      cell_val.push_back(0.5 * std::log(s(c + 1) / s(c)) * (s(c) * a + s(c + 1) * b));
    }
  }

  // Decade partial sums per term.
  std::vector<Eigen::VectorXd> decade;
  Eigen::VectorXd running = Eigen::VectorXd::Zero(nterms);
  double cutoff = 0.1;
  for (size_t c = 0; c < cell_lo.size(); ++c) {
    running += cell_val[c];
    const bool last = c + 1 == cell_lo.size();
    if (cell_lo[c] <= cutoff * (1 + 1e-12) || last) {
      decade.push_back(running);
      rep.partial_sums.emplace_back(cell_lo[c], running.sum());
      cutoff *= 0.1;
    }
  }

  const int K = static_cast<int>(decade.size());
  double total_truncated = 0;
  for (int t = 0; t < nterms; ++t) {
    DataNormTerm term;
    term.n1 = idx[t].first;
    term.n2 = idx[t].second;
    term.truncated = decade.back()(t);
    term.value = term.truncated;
    if (K >= 3) {
      auto inc = [&](int k) { return decade[k](t) - decade[k - 1](t); };
      auto corrected = [&](int k) {
        const double d1 = inc(k), d0 = inc(k - 1);
        if (d1 <= 0 || d0 <= 0) return std::pair{decade[k](t), d1 > 0 && d0 <= 0};
        const double q = d1 / d0;
        if (q >= 1 - opts.cauchy_tol) return std::pair{decade[k](t), true};
        return std::pair{decade[k](t) + d1 * q / (1 - q), false};
      };
      const auto [tk, bad_k] = corrected(K - 1);
      term.value = tk;
      term.divergent = bad_k;
      if (!bad_k && K >= 4) {
        const auto [tprev, bad_prev] = corrected(K - 2);
        if (!bad_prev && tk > 0 && std::abs(tk - tprev) > opts.cauchy_tol * tk) term.divergent = true;
      }
    }
    rep.divergent = rep.divergent || term.divergent;
    rep.total += term.value;
    total_truncated += term.truncated;
    rep.terms.push_back(term);
  }
  rep.tail_fraction = rep.total > 0 ? (rep.total - total_truncated) / rep.total : 0;
  return rep;
}

}  // namespace nullcone
