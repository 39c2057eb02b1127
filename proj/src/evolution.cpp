#include "nullcone/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "nullcone/energy.hpp"
#include "nullcone/error.hpp"

namespace nullcone {

namespace {

const double kSqrt4Pi = std::sqrt(4 * std::numbers::pi);

// Derivative at x[0] of the interpolant through (x[k], f[k]), k < count (2 or 3 points).
template <typename T>
T one_sided(const double* x, const T* f, int count) {
  if (count == 2) return (f[0] - f[1]) / (x[0] - x[1]);
  const double h1 = x[0] - x[1], h2 = x[1] - x[2];
  return f[0] * ((2 * h1 + h2) / (h1 * (h1 + h2))) - f[1] * ((h1 + h2) / (h1 * h2)) + f[2] * (h1 / (h2 * (h1 + h2)));
}

// Derivative at the middle point of three (x0 < x1 < x2).
template <typename T>
T centred(double x0, double x1, double x2, const T& f0, const T& f1, const T& f2) {
  const double a = x1 - x0, b = x2 - x1;
  return f0 * (-b / (a * (a + b))) + f1 * ((b - a) / (a * b)) + f2 * (a / (b * (a + b)));
}

}  // namespace

// ---------------------------------------------------------------- grid

NullGrid::NullGrid(const GridOptions& opts) : opts_(opts) {
  if (opts.N < 1) throw DomainError("NullGrid: N must be positive");
  if (!(opts.v_uniform > 0 && opts.v_uniform < 1)) throw DomainError("NullGrid: v_uniform must lie in (0, 1)");
  if (!(opts.ratio > 0 && opts.ratio < 1)) throw DomainError("NullGrid: ratio must lie in (0, 1)");
  if (!(opts.v_min > 0 && opts.v_min < opts.v_uniform)) throw DomainError("NullGrid: need 0 < v_min < v_uniform");
  if (!(opts.eps > 0 && opts.eps < 1)) throw DomainError("NullGrid: eps must lie in (0, 1)");
  if (opts.lmax < 0) throw DomainError("NullGrid: negative lmax");
  std::vector<double> geo;
  const double q = std::pow(opts.ratio, 128.0 / opts.N);
  for (double x = opts.v_uniform * q; x >= opts.v_min * (1 - 1e-12); x *= q) geo.push_back(x);
  std::vector<double> nodes{0.0};
  nodes.insert(nodes.end(), geo.rbegin(), geo.rend());
  const double h = (1 - opts.v_uniform) / opts.N;
  for (int k = 0; k <= opts.N; ++k) nodes.push_back(k == opts.N ? 1.0 : opts.v_uniform + k * h);
  s_ = Eigen::Map<Eigen::VectorXd>(nodes.data(), static_cast<Eigen::Index>(nodes.size()));
  // snap the u-extent onto the mesh
  int best = 1;
  for (int k = 1; k < n(); ++k)
    if (std::abs(s_(k) - opts.eps) < std::abs(s_(best) - opts.eps)) best = k;
  s_(best) = opts.eps;
  M_ = best;
  if (!(s_(best) > s_(best - 1) && s_(best) < s_(best + 1))) throw DomainError("NullGrid: eps snapping failed");
  sphere_ = std::make_shared<Sphere>(opts.lmax);
}

int NullGrid::index_of(double x) const {
  const auto* b = s_.data();
  const auto* e = b + s_.size();
  const auto* it = std::lower_bound(b, e, x);
  if (it == e) return n();
  if (it == b) return 0;
  return (x - *(it - 1) <= *it - x) ? static_cast<int>(it - b - 1) : static_cast<int>(it - b);
}

std::string NullGrid::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, size_t len) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (size_t k = 0; k < len; ++k) {
      h ^= c[k];
      h *= 1099511628211ULL;
    }
  };
  mix(s_.data(), sizeof(double) * s_.size());
  mix(&M_, sizeof M_);
  mix(&opts_.lmax, sizeof opts_.lmax);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- background

double Background::psi(double u, double v) const {
  auto Gs = [&](double x) { return x > 0 ? G(x) : 0.0; };
  if (scaling == 0) return Gs(v) - Gs(u);
  auto sg = [&](double x) { return x > 0 ? x * dG(x) - G(x) : 0.0; };
  return sg(v) - sg(u);
}

double Background::dpsi_dv(double, double v) const { return scaling == 0 ? dG(v) : v * d2G(v); }

double Background::dpsi_du(double u, double) const {
  if (u <= 0) return scaling == 0 ? -dG(0) : 0.0;
  return scaling == 0 ? -dG(u) : -u * d2G(u);
}

double Background::axis_phi(double t) const {
  const double m = 0.5 * t;
  return scaling == 0 ? dG(m) : m * d2G(m);
}

Background background_of(const ConeData& data) {
  if (!data.has_closed_form()) throw PreconditionError("background_of: data has no closed form");
  auto d = std::make_shared<const ConeData>(data);
  Background bg;
  bg.G = [d](double s) { return d->radial_G(s); };
  bg.dG = [d](double s) { return d->radial_dG(s); };
  bg.d2G = [d](double s) { return (d->at(s, 1)(0) + d->at(s, 2)(0)) / (s * kSqrt4Pi); };
  return bg;
}

namespace {

// Mesh-node values of the background profiles; other arguments fall through.
Background tabulated(const Background& bg, const Eigen::VectorXd& s) {
  auto nodes = std::make_shared<std::vector<double>>(s.data(), s.data() + s.size());
  auto wrap = [&nodes](const std::function<double(double)>& fn) -> std::function<double(double)> {
    auto vals = std::make_shared<std::vector<double>>(nodes->size());
    for (size_t k = 1; k < nodes->size(); ++k) (*vals)[k] = fn((*nodes)[k]);
    (*vals)[0] = (*nodes)[0] > 0 ? fn((*nodes)[0]) : std::numeric_limits<double>::quiet_NaN();
    return [nodes, vals, fn](double x) {
      const auto it = std::lower_bound(nodes->begin(), nodes->end(), x);
      if (it != nodes->end() && *it == x && (x > 0 || !std::isnan((*vals)[0]))) return (*vals)[it - nodes->begin()];
      return fn(x);
    };
  };
  Background out = bg;
  out.G = wrap(bg.G);
  out.dG = wrap(bg.dG);
  out.d2G = wrap(bg.d2G);
  return out;
}

}  // namespace

// ---------------------------------------------------------------- field

NullField::NullField(std::shared_ptr<const NullGrid> grid) : grid_(std::move(grid)) {
  rows_.assign(grid_->M() + 1, Eigen::MatrixXd::Zero(grid_->num_coeffs(), grid_->n() + 1));
}

AngularField NullField::psi(int i, int j) const {
  AngularField f = rows_[i].col(j);
  if (background_) f(0) += kSqrt4Pi * background_->psi(grid_->u(i), grid_->v(j));
  return f;
}

AngularField NullField::phi(int i, int j) const {
  const NullGrid& g = *grid_;
  if (j > i) {
    AngularField f = rows_[i].col(j) / g.r(i, j);
    if (background_) f(0) += kSqrt4Pi * background_->psi(g.u(i), g.v(j)) / g.r(i, j);
    return f;
  }
  // quadratic extrapolation of psi/r to r = 0 along the row
  const int count = std::min(3, g.n() - i);
  AngularField f = AngularField::Zero(g.num_coeffs());
  for (int k = 1; k <= count; ++k) {
    double w = 1;
    for (int m = 1; m <= count; ++m)
      if (m != k) w *= (0 - g.r(i, i + m)) / (g.r(i, i + k) - g.r(i, i + m));
    f += w * rows_[i].col(i + k) / g.r(i, i + k);
  }
  if (background_) f(0) += kSqrt4Pi * background_->axis_phi(2 * g.u(i));
  return f;
}

AngularField NullField::dpsi_dv_cell(int i, int j) const {
  const NullGrid& g = *grid_;
  return (psi(i, j + 1) - psi(i, j)) / (g.v(j + 1) - g.v(j));
}

AngularField NullField::dpsi_du_cell(int i, int j) const {
  const NullGrid& g = *grid_;
  return (psi(i + 1, j) - psi(i, j)) / (g.u(i + 1) - g.u(i));
}

double NullField::max_abs() const {
  double m = 0;
  for (int i = 0; i < static_cast<int>(rows_.size()); ++i)
    m = std::max(m, rows_[i].rightCols(grid_->n() + 1 - i).cwiseAbs().maxCoeff());
  return m;
}

NullField NullField::operator-(const NullField& other) const {
  if (grid_ != other.grid_) throw SizeMismatch("NullField: grids differ");
  NullField out(grid_);
  for (size_t i = 0; i < rows_.size(); ++i) out.rows_[i] = rows_[i] - other.rows_[i];
  // the backgrounds are assumed identical when both present
  if (background_.has_value() != other.background_.has_value()) {
    const auto& bg = background_ ? *background_ : *other.background_;
    const double sign = background_ ? 1.0 : -1.0;
    for (size_t i = 0; i < rows_.size(); ++i)
      for (int j = static_cast<int>(i); j <= grid_->n(); ++j)
        out.rows_[i](0, j) += sign * kSqrt4Pi * bg.psi(grid_->u(static_cast<int>(i)), grid_->v(j));
  }
  return out;
}

NullField NullField::scaled(double c) const {
  NullField out(grid_);
  for (size_t i = 0; i < rows_.size(); ++i) out.rows_[i] = c * rows_[i];
  if (background_) {
    Background bg = *background_;
    auto G = bg.G, dG = bg.dG, d2G = bg.d2G;
    bg.G = [G, c](double s) { return c * G(s); };
    bg.dG = [dG, c](double s) { return c * dG(s); };
    bg.d2G = [d2G, c](double s) { return c * d2G(s); };
    out.background_ = bg;
  }
  return out;
}

// ---------------------------------------------------------------- evolution

namespace {

class Marcher {
 public:
  Marcher(NullField& field, const Rhs& rhs)
      : f_(field),
        g_(field.grid()),
        rhs_(rhs),
        nc_(g_.num_coeffs()),
        lap_(g_.sphere().laplacian_eigenvalues()),
        src_grid_(g_.lmax(), 2 * g_.lmax() + 16) {
    F_.assign(g_.M() + 1, Eigen::MatrixXd::Zero(nc_, g_.n() + 1));
    ext_ready_.assign(g_.M() + 1, std::vector<char>(g_.n() + 1, 0));
    ext_.assign(g_.M() + 1, Eigen::MatrixXd::Zero(nc_, g_.n() + 1));
  }

  bool nonlinear() const { return rhs_.nonlin && !rhs_.nonlin->is_zero(); }
  bool needs_derivs() const { return nonlinear() && rhs_.nonlin->needs_derivatives(); }

  // F at node (i, j) from the current field values.
  AngularField node_F(int i, int j) {
    AngularField out = external(i, j);
    if (nonlinear()) out += nonlinear_term(i, j);
    return out;
  }

  AngularField external(int i, int j) {
    AngularField out = AngularField::Zero(nc_);
    if (rhs_.sampled) out += (*rhs_.sampled)[i].col(j);
    if (rhs_.source) {
      if (!ext_ready_[i][j]) {
        const double u = g_.u(i), v = g_.v(j), r = v - u, t = u + v;
        Eigen::VectorXd vals(src_grid_.size());
        for (int k = 0; k < src_grid_.size(); ++k) {
          const double th = src_grid_.theta(k), ph = src_grid_.phi(k);
          const Eigen::Vector3d w(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
          vals(k) = rhs_.source(t, r * w);
        }
        ext_.at(i).col(j) = src_grid_.analyze(vals);
        ext_ready_[i][j] = 1;
      }
      out += ext_[i].col(j);
    }
    return out;
  }

  AngularField nonlinear_term(int i, int j) const { return node_nonlinear(f_, *rhs_.nonlin, i, j); }

  static AngularField node_nonlinear(const NullField& f, const Nonlinearity& nl, int i, int j) {
    const NullGrid& g = f.grid();
    const int nc = g.num_coeffs();
    if (j <= i) return AngularField::Zero(nc);
    const double u = g.u(i), v = g.v(j), r = v - u;
    const auto& bg = f.background();
    AngularField psi = f.row(i).col(j);
    const double psi_bg = bg ? bg->psi(u, v) : 0.0;
    AngularField phi = psi / r;
    const double phi_bg = psi_bg / r;

    AngularField dv, du;
    double dv_bg = 0, du_bg = 0;
    if (nl.needs_derivatives()) {
      // d_v psi: backward along the row
      {
        const int count = std::min(3, j - i + 1);
        double x[3];
        AngularField vals[3];
        for (int k = 0; k < count; ++k) {
          x[k] = g.v(j - k);
          vals[k] = f.row(i).col(j - k);
        }
        dv = one_sided(x, vals, count);
      }
      // d_u psi: backward in u, or forward from the first row
      {
        double x[3];
        AngularField vals[3];
        int count;
        if (i == 0) {
          count = 2;
          x[0] = g.u(0);
          x[1] = g.u(1);
          vals[0] = f.row(0).col(j);
          vals[1] = f.row(1).col(j);
        } else {
          count = std::min(3, i + 1);
          for (int k = 0; k < count; ++k) {
            x[k] = g.u(i - k);
            vals[k] = f.row(i - k).col(j);
          }
        }
        du = one_sided(x, vals, count);
      }
      if (bg) {
        dv_bg = bg->dpsi_dv(u, v);
        // G' may be singular at the vertex, so the first row uses the same forward difference
        du_bg = i == 0 ? (bg->psi(g.u(1), v) - bg->psi(u, v)) / (g.u(1) - u) : bg->dpsi_du(u, v);
      }
    }

    if (g.lmax() == 0) {
      const double p = phi(0) / kSqrt4Pi + phi_bg;
      Eigen::Vector4d d = Eigen::Vector4d::Zero();
      if (nl.needs_derivatives()) {
        const double dvphi = (dv(0) / kSqrt4Pi + dv_bg - p) / r;
        const double duphi = (du(0) / kSqrt4Pi + du_bg + p) / r;
        d(0) = 0.5 * (dvphi + duphi);
        // radial data: the spatial gradient is along omega; its mean over S^2 vanishes
      }
      return AngularField::Constant(1, kSqrt4Pi * nl(p, d));
    }

    const Sphere& sph = g.sphere();
    const int fac = 3;
    Eigen::VectorXd pv = sph.synthesize(phi, fac).array() + phi_bg;
    Eigen::VectorXd dvv, duv;
    Eigen::MatrixXd grad;
    if (nl.needs_derivatives()) {
      dvv = ((sph.synthesize(dv, fac).array() + dv_bg) - pv.array()) / r;
      duv = ((sph.synthesize(du, fac).array() + du_bg) + pv.array()) / r;
      grad = sph.gradient(phi, fac) / r;
    }
    Eigen::VectorXd out(pv.size());
    for (Eigen::Index k = 0; k < pv.size(); ++k) {
      Eigen::Vector4d d = Eigen::Vector4d::Zero();
      if (nl.needs_derivatives()) {
        const Eigen::Vector3d w = sph.direction(static_cast<int>(k), fac);
        d(0) = 0.5 * (dvv(k) + duv(k));
        const double dr = 0.5 * (dvv(k) - duv(k));
        d.tail<3>() = dr * w + grad.row(k).transpose();
      }
      out(k) = nl(pv(k), d);
    }
    return sph.analyze(out, fac);
  }

  void run(int sweeps, double cap) {
    const int n = g_.n(), M = g_.M();
    for (int i = 0; i < M; ++i) {
      const double du = g_.u(i + 1) - g_.u(i);
      // the first cell's A corner was never a B corner
      if (i == 0) F_[0].col(1) = node_F(0, 1);
      for (int j = i + 1; j < n; ++j) {
        const double dv = g_.v(j + 1) - g_.v(j), c = 0.25 * du * dv;
        const bool axis = (j == i + 1);
        const double rA = g_.r(i, j), rB = g_.r(i, j + 1), rC = g_.r(i + 1, j), rD = g_.r(i + 1, j + 1);
        const auto psiA = f_.row(i).col(j);
        const auto psiB = f_.row(i).col(j + 1);
        const AngularField psiC = axis ? AngularField::Zero(nc_) : AngularField(f_.row(i + 1).col(j));
        AngularField base = psiB + psiC - psiA;
        auto lin = [&](const auto& psi, double r) { return AngularField(lap_.cwiseProduct(psi) / (r * r)); };
        base += c * (lin(psiA, rA) - rA * F_[i].col(j));
        const double wD = axis ? 2.0 : 1.0;
        if (!axis) base += c * (lin(psiC, rC) - rC * F_[i + 1].col(j));
        const Eigen::ArrayXd denom = 1.0 - wD * c * lap_.array() / (rD * rD);
        auto solve = [&](const AngularField& FB, const AngularField& FD) {
          AngularField rhs = base + c * (lin(psiB, rB) - rB * FB) - wD * c * rD * FD;
          return AngularField(rhs.array() / denom);
        };

        const bool lazy_B = (i == 0) && needs_derivs();
        if (i == 0 && !lazy_B) F_[0].col(j + 1) = node_F(0, j + 1);
        AngularField FD = external(i + 1, j + 1);
        if (nonlinear()) {
          // extrapolated guess for the unknown corner's source
          if (axis || i == 0)
            FD = F_[i].col(j + 1);
          else
            FD = F_[i].col(j + 1) + F_[i + 1].col(j) - F_[i].col(j);
        }
        if (lazy_B) {
          f_.row(i + 1).col(j + 1) = psiB;  // provisional value for the forward u-difference
          F_[0].col(j + 1) = node_F(0, j + 1);
        }
        AngularField psiD = solve(F_[i].col(j + 1), FD);
        if (nonlinear()) {
          for (int s = 0; s < sweeps; ++s) {
            f_.row(i + 1).col(j + 1) = psiD;
            if (lazy_B) F_[0].col(j + 1) = node_F(0, j + 1);
            FD = node_F(i + 1, j + 1);
            psiD = solve(F_[i].col(j + 1), FD);
          }
        }
        f_.row(i + 1).col(j + 1) = psiD;
        if (lazy_B) F_[0].col(j + 1) = node_F(0, j + 1);
        F_[i + 1].col(j + 1) = nonlinear() ? node_F(i + 1, j + 1) : FD;
        const double m = psiD.cwiseAbs().maxCoeff();
        if (!std::isfinite(m) || m > cap)
          throw BlowUp("evolve: |psi| exceeded the cap at u=" + std::to_string(g_.u(i + 1)) +
                       ", v=" + std::to_string(g_.v(j + 1)));
      }
    }
  }

 private:
  NullField& f_;
  const NullGrid& g_;
  const Rhs& rhs_;
  int nc_;
  Eigen::VectorXd lap_;
  AngularGrid src_grid_;
  NodeSource F_;
  std::vector<std::vector<char>> ext_ready_;
  NodeSource ext_;
};

}  // namespace

NullField evolve(std::shared_ptr<const NullGrid> grid, const ConeData& data, const Rhs& rhs, const EvolveOptions& opts,
                 EvolveInfo* info) {
  if (rhs.nonlin && opts.cell_sweeps < 1) throw PreconditionError("evolve: cell_sweeps must be >= 1");
  if (data.lmax > grid->lmax()) throw SizeMismatch("evolve: data has more angular modes than the grid");
  NullField field(grid);
  EvolveInfo local;
  const bool subtract = opts.subtract_background && data.has_closed_form();
  if (subtract) {
    field.set_background(tabulated(background_of(data), grid->s()));
    local.background_subtracted = true;
  }
  const int nd = num_coeffs(data.lmax);
  const double v_first = data.v_nodes.size() ? data.v_nodes(0) : 0.0;
  int j_first = -1;
  for (int j = 1; j <= grid->n(); ++j) {
    const double v = grid->v(j);
    if (!data.has_closed_form() && v < v_first * (1 - 1e-12)) {
      local.excised = true;
      continue;
    }
    if (j_first < 0) j_first = j;
    AngularField d = data.at(v, 0);
    if (subtract) d(0) = 0;
    field.row(0).col(j).head(nd) = v * d;
  }
  // excised nodes: psi interpolated linearly between the vertex and the first sampled node
  if (local.excised && j_first > 0)
    for (int j = 1; j < j_first; ++j) field.row(0).col(j) = field.row(0).col(j_first) * (grid->v(j) / grid->v(j_first));

  Marcher m(field, rhs);
  m.run(opts.cell_sweeps, opts.cap);
  local.max_psi = field.max_abs();
  if (info) *info = local;
  return field;
}

NodeSource node_nonlinearity(const NullField& f, const Nonlinearity& nonlin) {
  const NullGrid& g = f.grid();
  NodeSource out(g.M() + 1, Eigen::MatrixXd::Zero(g.num_coeffs(), g.n() + 1));
  for (int i = 0; i <= g.M(); ++i)
    for (int j = i + 1; j <= g.n(); ++j) out[i].col(j) = Marcher::node_nonlinear(f, nonlin, i, j);
  return out;
}

PicardResult picard_iterate(std::shared_ptr<const NullGrid> grid, const ConeData& data, const Nonlinearity& nonlin,
                            int K, const EvolveOptions& opts) {
  if (K < 1) throw PreconditionError("picard_iterate: K must be >= 1");
  PicardResult res;
  res.iterates.push_back(evolve(grid, data, Rhs{}, opts));
  int rising = 0;
  for (int k = 1; k <= K; ++k) {
    const NodeSource F = node_nonlinearity(res.iterates.back(), nonlin);
    Rhs rhs;
    rhs.sampled = &F;
    res.iterates.push_back(evolve(grid, data, rhs, opts));
    const NullField diff = res.iterates[k] - res.iterates[k - 1];
    res.diff_energy.push_back(energy(diff, grid->eps(), 1.0).E);
    const size_t m = res.diff_energy.size();
    if (m >= 2 && res.diff_energy[m - 1] >= res.diff_energy[m - 2]) {
      if (++rising >= 3) {
        res.contracting = false;
        res.warnings.push_back("successive differences failed to decrease for 3 consecutive iterations (k=" +
                               std::to_string(k) + ")");
      }
    } else {
      rising = 0;
    }
  }
  return res;
}

// ---------------------------------------------------------------- commutators

NullField commuted_field(const NullField& f, int k, const std::vector<Axis>& word) {
  if (k < 0 || k > 1) throw PreconditionError("commuted_field: k must be 0 or 1");
  const NullGrid& g = f.grid();
  const int n = g.n(), M = g.M();
  NullField out(f.grid_ptr());
  for (int i = 0; i <= M; ++i) out.row(i) = f.row(i);
  if (!word.empty()) {
    const Sphere& sph = g.sphere();
    for (int i = 0; i <= M; ++i)
      for (int j = i; j <= n; ++j) {
        AngularField a = out.row(i).col(j);
        for (Axis ax : word) a = sph.rotate(a, ax);
        out.row(i).col(j) = a;
      }
  } else if (f.background()) {
    out.set_background(*f.background());
  }
  if (k == 0) return out;

  NullField base = out;
  Background bg;
  if (base.background()) {
    bg = *base.background();
    if (bg.scaling != 0) throw PreconditionError("commuted_field: S already applied to the background");
    bg.scaling = 1;
  }
  for (int i = 0; i <= M; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      const double u = g.u(i), v = g.v(j);
      AngularField dv, du;
      const AngularField p = base.row(i).col(j);
      if (j + 1 <= n) {
        dv = centred(g.v(j - 1), v, g.v(j + 1), AngularField(base.row(i).col(j - 1)), p, AngularField(base.row(i).col(j + 1)));
      } else {
        double x[3] = {v, g.v(j - 1), g.v(j - 2)};
        AngularField vals[3] = {p, base.row(i).col(j - 1), base.row(i).col(j - 2)};
        dv = one_sided(x, vals, j - 2 >= i ? 3 : 2);
      }
      const bool has_up = i + 1 <= M && j >= i + 1;
      if (i >= 1 && has_up) {
        du = centred(g.u(i - 1), u, g.u(i + 1), AngularField(base.row(i - 1).col(j)), p, AngularField(base.row(i + 1).col(j)));
      } else if (i == 0) {
        const int count = (M >= 2 && j >= 2) ? 3 : 2;
        double x[3] = {u, g.u(1), count == 3 ? g.u(2) : 0.0};
        AngularField vals[3] = {p, base.row(1).col(j), count == 3 ? AngularField(base.row(2).col(j)) : p};
        du = one_sided(x, vals, count);
      } else {
        const int count = i >= 2 ? 3 : 2;
        double x[3] = {u, g.u(i - 1), count == 3 ? g.u(i - 2) : 0.0};
        AngularField vals[3] = {p, base.row(i - 1).col(j), count == 3 ? AngularField(base.row(i - 2).col(j)) : p};
        du = one_sided(x, vals, count);
      }
      out.row(i).col(j) = u * du + v * dv - p;
    }
    out.row(i).col(i).setZero();
  }
  if (base.background()) out.set_background(bg);
  return out;
}

void write_checkpoint(const NullField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  const NullGrid& g = f.grid();
  char buf[160];
  out << "# nullcone checkpoint\n";
  std::snprintf(buf, sizeof buf, "# grid_hash %s\n# N %d\n# nodes %d\n# M %d\n# eps %.17g\n# lmax %d\n",
                g.hash().c_str(), g.options().N, g.n() + 1, g.M(), g.eps(), g.lmax());
  out << buf;
  out << "# columns: i j l m psi\n";
  for (int i = 0; i <= g.M(); ++i)
    for (int j = i; j <= g.n(); ++j) {
      const AngularField p = f.psi(i, j);
      for (int l = 0; l <= g.lmax(); ++l)
        for (int m = -l; m <= l; ++m) {
          std::snprintf(buf, sizeof buf, "%d %d %d %d %.17g\n", i, j, l, m, p(coeff_index(l, m)));
          out << buf;
        }
    }
}

}  // namespace nullcone
