#include "nullcone/energy.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "nullcone/error.hpp"

namespace nullcone {

namespace {

std::vector<Eigen::MatrixXd> total_psi(const NullField& f) {
  const NullGrid& g = f.grid();
  std::vector<Eigen::MatrixXd> P(g.M() + 1, Eigen::MatrixXd::Zero(g.num_coeffs(), g.n() + 1));
  for (int i = 0; i <= g.M(); ++i)
    for (int j = i; j <= g.n(); ++j) P[i].col(j) = f.psi(i, j);
  return P;
}

Eigen::VectorXd lambdas(const NullGrid& g) { return -g.sphere().laplacian_eigenvalues(); }

Eigen::VectorXd mode_weights(const NullGrid& g, int l) {
  const Eigen::VectorXd lam = lambdas(g);
  Eigen::VectorXd w(lam.size());
  for (Eigen::Index k = 0; k < lam.size(); ++k) w(k) = l == 0 ? 1.0 : std::pow(lam(k), l);
  return w;
}

int slice_index(const NullGrid& g, double x, const char* what) {
  const int k = g.index_of(x);
  if (std::abs(g.s()(k) - x) > 1e-6 * std::max(1.0, std::abs(x)) && std::abs(g.s()(k) - x) > 0.5 * x)
    throw DomainError(std::string(what) + " is not resolved by the mesh");
  return k;
}

}  // namespace

// ---------------------------------------------------------------- current

EnergyCurrent energy_current(const NullField& f, int i, int j) {
  const NullGrid& g = f.grid();
  if (!g.active(i, j) || j == i) throw DomainError("energy_current: node must be active and off the axis");
  auto psi = [&](int a, int b) { return f.psi(a, b); };
  const double u = g.u(i), v = g.v(j), r = v - u, t = u + v;
  AngularField dv, du;
  if (j + 1 <= g.n()) {
    const double a = v - g.v(j - 1), b = g.v(j + 1) - v;
    dv = psi(i, j - 1) * (-b / (a * (a + b))) + psi(i, j) * ((b - a) / (a * b)) + psi(i, j + 1) * (a / (b * (a + b)));
  } else {
    dv = (psi(i, j) - psi(i, j - 1)) / (v - g.v(j - 1));
  }
  if (i >= 1 && i + 1 <= g.M() && j >= i + 1) {
    const double a = u - g.u(i - 1), b = g.u(i + 1) - u;
    du = psi(i - 1, j) * (-b / (a * (a + b))) + psi(i, j) * ((b - a) / (a * b)) + psi(i + 1, j) * (a / (b * (a + b)));
  } else if (i + 1 <= g.M()) {
    du = (psi(i + 1, j) - psi(i, j)) / (g.u(i + 1) - u);
  } else {
    du = (psi(i, j) - psi(i - 1, j)) / (u - g.u(i - 1));
  }
  const AngularField phi = psi(i, j) / r;
  const AngularField Lf = (dv - phi) / r, Lbf = (du + phi) / r;
  const Eigen::VectorXd lam = lambdas(g);
  EnergyCurrent c;
  c.T_LL = Lf.squaredNorm();
  c.T_LbLb = Lbf.squaredNorm();
  c.T_LLb = lam.dot(phi.cwiseAbs2()) / (r * r);
  const double f2 = phi.squaredNorm(), fLf = phi.dot(Lf), fLbf = phi.dot(Lbf);
  const double chi = (v + r) / r, Lchi = -u / (r * r), Lbchi = v / (r * r);
  c.J_L = 2 * v * c.T_LL + u * c.T_LLb - 0.5 * f2 * Lchi + chi * fLf;
  c.J_Lb = 2 * v * c.T_LLb + u * c.T_LbLb - 0.5 * f2 * Lbchi + chi * fLbf;
  c.boundary_L = ((3 * t + 5 * r) / 4 * f2 + r * (3 * t + r) / 2 * fLf) / (r * r);
  c.boundary_Lb = ((r - 3 * t) / 4 * f2 + r * (3 * t + r) / 2 * fLbf) / (r * r);
  c.J_L_hat = 2 * v * (dv / r).squaredNorm() + u * c.T_LLb - c.boundary_L;
  c.J_Lb_hat = 2 * v * c.T_LLb + u * (du / r).squaredNorm() + c.boundary_Lb;
  return c;
}

// ---------------------------------------------------------------- tables

EnergyTables::EnergyTables(const NullField& f, const Eigen::VectorXd& w) : grid_(f.grid_ptr()) {
  const NullGrid& g = *grid_;
  const int n = g.n(), M = g.M();
  if (w.size() != g.num_coeffs()) throw SizeMismatch("EnergyTables: weight vector size");
  const auto P = total_psi(f);
  const Eigen::VectorXd wl = w.cwiseProduct(lambdas(g));
  const auto& s = g.s();

  out_prefix_.assign(M + 1, Eigen::VectorXd::Zero(n + 2));
  for (int i = 0; i <= M; ++i) {
    const double u = s(i);
    for (int j = 0; j <= n; ++j) {
      double val = 0;
      if (j >= i && j < n) {
        const double dvs = s(j + 1) - s(j), vm = 0.5 * (s(j) + s(j + 1)), rm = vm - u;
        const AngularField d = (P[i].col(j + 1) - P[i].col(j)) / dvs;
        const AngularField m = 0.5 * (P[i].col(j) + P[i].col(j + 1));
        val = dvs * (2 * vm * w.dot(d.cwiseAbs2()) + u * wl.dot(m.cwiseAbs2()) / (rm * rm));
      }
      out_prefix_[i](j + 1) = out_prefix_[i](j) + val;
    }
  }

  in_prefix_.assign(n + 1, Eigen::VectorXd::Zero(M + 2));
  for (int j = 0; j <= n; ++j) {
    const double v = s(j);
    for (int i = 0; i <= M; ++i) {
      double val = 0;
      if (i < M && i + 1 <= j) {
        const double dus = s(i + 1) - s(i), um = 0.5 * (s(i) + s(i + 1)), rm = v - um;
        const AngularField d = (P[i + 1].col(j) - P[i].col(j)) / dus;
        const AngularField m = 0.5 * (P[i].col(j) + P[i + 1].col(j));
        val = dus * (2 * v * wl.dot(m.cwiseAbs2()) / (rm * rm) + um * w.dot(d.cwiseAbs2()));
      }
      in_prefix_[j](i + 1) = in_prefix_[j](i) + val;
    }
  }

  bulk_v_ = Eigen::MatrixXd::Zero(M + 1, n + 1);
  bulk_t_ = Eigen::MatrixXd::Zero(M + 1, n + 1);
  for (int i = 0; i < M; ++i) {
    for (int j = i; j < n; ++j) {
      const double dus = s(i + 1) - s(i), dvs = s(j + 1) - s(j);
      AngularField m;
      double um, vm, area;
      if (j == i) {
        // triangle (i,i), (i,i+1), (i+1,i+1) at its centroid
        m = P[i].col(i + 1) / 3;
        um = (2 * s(i) + s(i + 1)) / 3;
        vm = (s(i) + 2 * s(i + 1)) / 3;
        area = 0.5 * dus * dvs;
      } else {
        m = 0.25 * (P[i].col(j) + P[i].col(j + 1) + P[i + 1].col(j) + P[i + 1].col(j + 1));
        um = 0.5 * (s(i) + s(i + 1));
        vm = 0.5 * (s(j) + s(j + 1));
        area = dus * dvs;
      }
      const double rm = vm - um;
      const double a = area * wl.dot(m.cwiseAbs2()) / (rm * rm * rm);
      bulk_v_(i, j) = vm * a;
      bulk_t_(i, j) = (um + vm) * a;
    }
  }
  auto prefix2 = [](const Eigen::MatrixXd& c) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(c.rows() + 1, c.cols() + 1);
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      for (Eigen::Index j = 0; j < c.cols(); ++j) p(i + 1, j + 1) = c(i, j) + p(i, j + 1) + p(i + 1, j) - p(i, j);
    return p;
  };
  bulk_v_prefix_ = prefix2(bulk_v_);
  bulk_t_prefix_ = prefix2(bulk_t_);

  axis_prefix_ = Eigen::VectorXd::Zero(M + 1);
  std::vector<double> a(M + 1);
  a[0] = 0;  // s f^2 vanishes at the vertex even for singular data
  for (int i = 1; i <= M; ++i) {
    const double p0 = f.phi(i, i)(0);
    a[i] = s(i) * w(0) * p0 * p0;
  }
  for (int i = 0; i < M; ++i) axis_prefix_(i + 1) = axis_prefix_(i) + 0.5 * (s(i + 1) - s(i)) * (a[i] + a[i + 1]);
}

double EnergyTables::out(int i, int j0, int j1) const { return out_prefix_[i](j1) - out_prefix_[i](j0); }

double EnergyTables::in(int j, int i0, int i1) const {
  i1 = std::min(i1, j);
  if (i1 <= i0) return 0.0;
  return in_prefix_[j](i1) - in_prefix_[j](i0);
}

double EnergyTables::bulk(int i0, int i1, int j0, int j1, bool identity_weight) const {
  const Eigen::MatrixXd& p = identity_weight ? bulk_t_prefix_ : bulk_v_prefix_;
  return p(i1, j1) - p(i0, j1) - p(i1, j0) + p(i0, j0);
}

double EnergyTables::axis(int i0, int i1) const { return axis_prefix_(i1) - axis_prefix_(i0); }

// ---------------------------------------------------------------- functionals

namespace {

std::pair<int, int> check_uv(const NullGrid& g, double U, double V) {
  if (U < 0 || U > g.eps() * (1 + 1e-12)) throw DomainError("energy: U outside [0, eps]");
  if (V > 1 + 1e-12 || V < 0) throw DomainError("energy: V outside [0, 1]");
  const int iU = slice_index(g, U, "U"), jV = slice_index(g, V, "V");
  if (iU > g.M()) throw DomainError("energy: U outside the grid");
  return {iU, jV};
}

}  // namespace

double flux_out(const NullField& f, double U, double V) {
  const auto [i, j] = check_uv(f.grid(), U, V);
  if (j < i) throw DomainError("flux_out: V < U");
  EnergyTables t(f, Eigen::VectorXd::Ones(f.grid().num_coeffs()));
  return t.out(i, i, j);
}

double flux_in(const NullField& f, double V, double U) {
  const auto [i, j] = check_uv(f.grid(), U, V);
  EnergyTables t(f, Eigen::VectorXd::Ones(f.grid().num_coeffs()));
  return t.in(j, 0, i);
}

double bulk(const NullField& f, double U, double V) {
  const auto [i, j] = check_uv(f.grid(), U, V);
  EnergyTables t(f, Eigen::VectorXd::Ones(f.grid().num_coeffs()));
  return t.bulk(0, i, 0, j);
}

EnergyReport energy(const EnergyTables& t, double U, double V) {
  const NullGrid& g = t.grid();
  const auto [iU, jV] = check_uv(g, U, V);
  EnergyReport rep;
  rep.U = g.u(iU);
  rep.V = g.v(jV);
  rep.grid_hash = g.hash();
  for (int i = 0; i <= std::min(iU, jV); ++i) {
    const double val = t.out(i, i, jV);
    rep.out_slices.emplace_back(g.u(i), val);
    rep.out_sup = std::max(rep.out_sup, val);
  }
  for (int j = 0; j <= jV; ++j) {
    const double val = t.in(j, 0, iU);
    rep.in_slices.emplace_back(g.v(j), val);
    rep.in_sup = std::max(rep.in_sup, val);
  }
  rep.bulk = t.bulk(0, iU, 0, jV);
  rep.E = rep.out_sup + rep.in_sup + rep.bulk;
  rep.commuted.push_back({0, 0, rep.out_sup, rep.in_sup, rep.bulk, rep.E});
  return rep;
}

EnergyReport energy(const NullField& f, double U, double V) {
  return energy(EnergyTables(f, Eigen::VectorXd::Ones(f.grid().num_coeffs())), U, V);
}

EnergyReport energy_table(const NullField& f, double U, double V, int kmax, int lmax) {
  if (kmax < 0 || kmax > 1 || lmax < 0) throw PreconditionError("energy_table: need k <= 1 and l >= 0");
  EnergyReport rep = energy(f, U, V);
  rep.commuted.clear();
  for (int k = 0; k <= kmax; ++k) {
    const NullField fk = k == 0 ? f : commuted_field(f, 1, {});
    for (int l = 0; l <= lmax; ++l) {
      const EnergyReport e = energy(EnergyTables(fk, mode_weights(f.grid(), l)), U, V);
      rep.commuted.push_back({k, l, e.out_sup, e.in_sup, e.bulk, e.E});
    }
  }
  return rep;
}

std::vector<std::pair<double, double>> energy_curve(const NullField& f, double U, double V_lo, double V_hi) {
  EnergyTables t(f, Eigen::VectorXd::Ones(f.grid().num_coeffs()));
  const NullGrid& g = f.grid();
  std::vector<std::pair<double, double>> out;
  for (int j = 0; j <= g.n(); ++j) {
    const double V = g.v(j);
    if (V < V_lo * (1 - 1e-12) || V > V_hi * (1 + 1e-12) || V < U) continue;
    out.emplace_back(V, energy(t, U, V).E);
  }
  return out;
}

void EnergyReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  char buf[128];
  std::snprintf(buf, sizeof buf, "# energy report U=%.17g V=%.17g grid=%s\n", U, V, grid_hash.c_str());
  out << buf << "slice_type,coord,k,l,value\n";
  auto row = [&](const char* type, double coord, int kk, int ll, double val) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%d,%d,%.17g\n", type, coord, kk, ll, val);
    out << buf;
  };
  for (const auto& [c, val] : out_slices) row("out", c, k, l, val);
  for (const auto& [c, val] : in_slices) row("in", c, k, l, val);
  for (const auto& e : commuted) {
    row("out_sup", U, e.k, e.l, e.out_sup);
    row("in_sup", V, e.k, e.l, e.in_sup);
    row("bulk", V, e.k, e.l, e.bulk);
    row("E", V, e.k, e.l, e.E);
  }
}

// ---------------------------------------------------------------- identity

IdentityTerms divergence_residual(const NullField& f, const NodeSource* F, const IdentityRegion& reg) {
  const NullGrid& g = f.grid();
  if (reg.U0 < 0 || reg.U1 < reg.U0 || reg.U1 > g.eps() * (1 + 1e-12) || reg.V1 > 1 + 1e-12 || reg.V0 > reg.V1)
    throw DomainError("divergence_residual: region outside the grid");
  const int i0 = slice_index(g, reg.U0, "U0"), i1 = slice_index(g, reg.U1, "U1");
  const int j0 = slice_index(g, reg.V0, "V0"), j1 = slice_index(g, reg.V1, "V1");
  const bool touches_axis = j0 <= i0;
  if (!touches_axis && j0 < i1) throw DomainError("divergence_residual: region must avoid the axis or contain it");
  EnergyTables t(f, Eigen::VectorXd::Ones(g.num_coeffs()));
  IdentityTerms r;
  if (touches_axis) {
    r.out_hi = t.out(i1, i1, j1);
    r.out_lo = t.out(i0, i0, j1);
    r.in_hi = t.in(j1, i0, i1);
    r.axis = t.axis(i0, i1);
    r.axis_correction = r.axis / std::numbers::pi;
    r.bulk = t.bulk(i0, i1, i0, j1, true);
  } else {
    r.out_hi = t.out(i1, j0, j1);
    r.out_lo = t.out(i0, j0, j1);
    r.in_hi = t.in(j1, i0, i1);
    r.in_lo = t.in(j0, i0, i1);
    r.bulk = t.bulk(i0, i1, j0, j1, true);
  }
  if (F) {
    const auto P = total_psi(f);
    const auto& s = g.s();
    for (int i = i0; i < i1; ++i) {
      for (int j = std::max(touches_axis ? i : j0, i); j < j1; ++j) {
        const double dus = s(i + 1) - s(i), dvs = s(j + 1) - s(j);
        if (j == i) {
          const double um = (2 * s(i) + s(i + 1)) / 3, vm = (s(i) + 2 * s(i + 1)) / 3, rm = vm - um;
          const AngularField dv = P[i].col(i + 1) / dvs, du = -P[i].col(i + 1) / dus;
          const AngularField Fm = (*F)[i].col(i + 1);
          r.source += 0.5 * dus * dvs * (-2 * rm) * Fm.dot(2 * vm * dv + um * du);
          continue;
        }
        const double um = 0.5 * (s(i) + s(i + 1)), vm = 0.5 * (s(j) + s(j + 1)), rm = vm - um;
        const AngularField dv = 0.5 * (P[i].col(j + 1) - P[i].col(j) + P[i + 1].col(j + 1) - P[i + 1].col(j)) / dvs;
        const AngularField du = 0.5 * (P[i + 1].col(j) - P[i].col(j) + P[i + 1].col(j + 1) - P[i].col(j + 1)) / dus;
        AngularField Fm = (*F)[i].col(j) + (*F)[i].col(j + 1) + (*F)[i + 1].col(j + 1);
        if (j == i + 1) {
          Fm /= 3;  // the axis corner carries no source value
        } else {
          Fm = 0.25 * (Fm + (*F)[i + 1].col(j));
        }
        r.source += dus * dvs * (-2 * rm) * Fm.dot(2 * vm * dv + um * du);
      }
    }
  }
  r.residual = r.out_hi - r.out_lo + r.in_hi - r.in_lo + r.axis + r.bulk - r.source;
  r.scale = std::max({std::abs(r.out_hi), std::abs(r.out_lo), std::abs(r.in_hi), std::abs(r.in_lo), std::abs(r.axis),
                      std::abs(r.bulk), std::abs(r.source)});
  return r;
}

PowerFit fit_power(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 4) throw DegenerateFit("fit_power: need at least 4 samples");
  const int n = static_cast<int>(samples.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (int k = 0; k < n; ++k) {
    const auto [x, y] = samples[k];
    if (!(x > 0 && y > 0)) throw DegenerateFit("fit_power: samples must be positive");
    A(k, 0) = std::log(x);
    A(k, 1) = 1;
    b(k) = std::log(y);
  }
  const double spread = A.col(0).maxCoeff() - A.col(0).minCoeff();
  if (!(spread > 1e-12)) throw DegenerateFit("fit_power: abscissae coincide");
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  const Eigen::VectorXd res = A * c - b;
  PowerFit fit;
  fit.exponent = c(0);
  fit.prefactor = std::exp(c(1));
  fit.rms_residual = std::sqrt(res.squaredNorm() / n);
  fit.max_residual = res.cwiseAbs().maxCoeff();
  return fit;
}

}  // namespace nullcone
