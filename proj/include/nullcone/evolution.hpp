#pragma once

// Double-null marching for psi = r phi on {0 <= u <= eps, u <= v <= 1}.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nullcone/cone_data.hpp"
#include "nullcone/linear.hpp"
#include "nullcone/nonlinearity.hpp"
#include "nullcone/sphere.hpp"

namespace nullcone {

struct GridOptions {
  int N = 128;             ///< uniform cells on [v_uniform, 1]
  double v_uniform = 0.1;  ///< below this the mesh is geometric
  double ratio = 0.9;      ///< geometric ratio at N = 128, refined as ratio^(128/N)
  double v_min = 1e-8;     ///< smallest positive node
  double eps = 0.05;       ///< u-extent, snapped onto the mesh
  int lmax = 0;
};

/// One mesh 0 = s_0 < ... < s_n = 1 serves both null coordinates; node (i, j) is
/// (u, v) = (s_i, s_j), active for i <= M and j >= i.
class NullGrid {
 public:
  explicit NullGrid(const GridOptions& opts);

  const GridOptions& options() const { return opts_; }
  const Eigen::VectorXd& s() const { return s_; }
  int n() const { return static_cast<int>(s_.size()) - 1; }
  int M() const { return M_; }
  double eps() const { return s_(M_); }
  double u(int i) const { return s_(i); }
  double v(int j) const { return s_(j); }
  double r(int i, int j) const { return s_(j) - s_(i); }
  int lmax() const { return opts_.lmax; }
  int num_coeffs() const { return nullcone::num_coeffs(opts_.lmax); }
  const Sphere& sphere() const { return *sphere_; }
  bool active(int i, int j) const { return i >= 0 && i <= M_ && j >= i && j <= n(); }

  /// Index of the node nearest to x.
  int index_of(double x) const;
  /// FNV-1a hash of the mesh, for manifests.
  std::string hash() const;

 private:
  GridOptions opts_;
  Eigen::VectorXd s_;
  int M_ = 0;
  std::shared_ptr<const Sphere> sphere_;
};

/// Closed-form l = 0 part of psi, G(v) - G(u) with G(s) = s g(s), or its S-derivative
/// v G'(v) - u G'(u) - G(v) + G(u) when scaling = 1. Values are of the function, not the
/// l = 0 coefficient.
struct Background {
  std::function<double(double)> G, dG, d2G;
  int scaling = 0;

  double psi(double u, double v) const;
  double dpsi_du(double u, double v) const;
  double dpsi_dv(double u, double v) const;
  /// phi on the axis at time t.
  double axis_phi(double t) const;
};

/// Background of the l = 0 part of closed-form data.
Background background_of(const ConeData& data);

class NullField {
 public:
  NullField() = default;
  explicit NullField(std::shared_ptr<const NullGrid> grid);

  const NullGrid& grid() const { return *grid_; }
  std::shared_ptr<const NullGrid> grid_ptr() const { return grid_; }

  /// Evolved unknown (total psi minus the background) per node.
  AngularField psi_rest(int i, int j) const { return rows_[i].col(j); }
  void set_psi_rest(int i, int j, const AngularField& f) { rows_[i].col(j) = f; }
  Eigen::MatrixXd& row(int i) { return rows_[i]; }
  const Eigen::MatrixXd& row(int i) const { return rows_[i]; }

  const std::optional<Background>& background() const { return background_; }
  void set_background(Background bg) { background_ = std::move(bg); }

  /// Total psi = r phi.
  AngularField psi(int i, int j) const;
  /// phi = psi / r; on the axis by quadratic extrapolation in r along the u = const row.
  AngularField phi(int i, int j) const;
  /// Cell-average derivatives of the total psi on [v_j, v_{j+1}] and [u_i, u_{i+1}].
  AngularField dpsi_dv_cell(int i, int j) const;
  AngularField dpsi_du_cell(int i, int j) const;

  double max_abs() const;

  NullField operator-(const NullField& other) const;
  NullField scaled(double c) const;

 private:
  std::shared_ptr<const NullGrid> grid_;
  std::vector<Eigen::MatrixXd> rows_;  ///< row i: num_coeffs x (n + 1)
  std::optional<Background> background_;
};

/// F coefficients per node, the same layout as NullField rows.
using NodeSource = std::vector<Eigen::MatrixXd>;

struct EvolveOptions {
  int cell_sweeps = 2;
  double cap = 1e8;
  /// Subtract the closed-form linear solution of the l = 0 data when available.
  bool subtract_background = true;
};

struct Rhs {
  std::optional<Nonlinearity> nonlin;
  SourceFunction source;            ///< F_ext(t, x)
  const NodeSource* sampled = nullptr;  ///< F per node (Picard mode)
};

struct EvolveInfo {
  bool background_subtracted = false;
  bool excised = false;  ///< data samples did not reach the smallest mesh nodes
  double max_psi = 0;
};

NullField evolve(std::shared_ptr<const NullGrid> grid, const ConeData& data, const Rhs& rhs,
                 const EvolveOptions& opts = {}, EvolveInfo* info = nullptr);

/// F(phi, d phi) at every node using the same stencils as the marching scheme.
NodeSource node_nonlinearity(const NullField& f, const Nonlinearity& nonlin);

struct PicardResult {
  std::vector<NullField> iterates;  ///< phi_0 ... phi_K
  std::vector<double> diff_energy;  ///< E[phi_{k} - phi_{k-1}](eps, 1), k = 1..K
  bool contracting = true;          ///< false when diff_energy failed to decrease 3 times in a row
  std::vector<std::string> warnings;
};

PicardResult picard_iterate(std::shared_ptr<const NullGrid> grid, const ConeData& data, const Nonlinearity& nonlin,
                            int K, const EvolveOptions& opts = {});

/// r S^k Omega^word phi for S = u d_u + v d_v, as a background-free field.
NullField commuted_field(const NullField& f, int k, const std::vector<Axis>& word);

/// Columnar text dump (i, j, l, m, psi) of the total psi with a metadata header.
void write_checkpoint(const NullField& f, const std::string& path);

}  // namespace nullcone
