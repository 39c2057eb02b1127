#pragma once

// Multiplier-current energies for X = 2v L + u Lbar, chi = (v + r)/r, on the null mesh.
//
// With psi = r f, P = int (d_v psi)^2, Q = int (d_u psi)^2 and A = int |grad_{S^2} psi|^2
// (angular integrals), the fluxes are
//   out(u; V) = int_u^V 2v P + u A / r^2 dv        on u = const
//   in(v; U)  = int_0^U 2v A / r^2 + u Q du        on v = const
// and the bulk of E is int int v A / r^3 du dv. These satisfy, for every solution of
// box f = F,
//   d_u[2v P + u A/r^2] + d_v[u Q + 2v A/r^2] + t A / r^3 = -2 r int F (2v d_v psi + u d_u psi).

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nullcone/evolution.hpp"

namespace nullcone {

/// Per-node angular integrals of T[f] components and the current in both forms.
struct EnergyCurrent {
  double T_LL = 0, T_LLb = 0, T_LbLb = 0;
  double J_L = 0, J_Lb = 0;          ///< from T X - f^2 d chi / 2 + chi d(f^2) / 2
  double J_L_hat = 0, J_Lb_hat = 0;  ///< from the hatted form with the exact-derivative terms
  double boundary_L = 0, boundary_Lb = 0;  ///< r^-2 L(r(3t+r) f^2 / 4) and its Lbar analogue
};

/// Current at an off-axis node; derivatives by centred differences where possible.
EnergyCurrent energy_current(const NullField& f, int i, int j);

/// Cell tables and prefix sums for fast flux/bulk evaluation. weights multiply each
/// angular mode (lambda^l gives the sum over all Omega words of length l).
class EnergyTables {
 public:
  EnergyTables(const NullField& f, const Eigen::VectorXd& weights);

  /// Outgoing flux on row i over v in [v_{j0}, v_{j1}].
  double out(int i, int j0, int j1) const;
  /// Incoming flux on column j over u in [u_{i0}, u_{i1}] (clipped to u <= v).
  double in(int j, int i0, int i1) const;
  /// Bulk over cells with u in [u_{i0}, u_{i1}], v in [max(u, v_{j0}), v_{j1}].
  double bulk(int i0, int i1, int j0, int j1, bool identity_weight = false) const;
  /// int s int f^2 domega ds along the axis for s in [u_{i0}, u_{i1}].
  double axis(int i0, int i1) const;

  const NullGrid& grid() const { return *grid_; }

 private:
  std::shared_ptr<const NullGrid> grid_;
  std::vector<Eigen::VectorXd> out_prefix_;  ///< per row, prefix over cells in v
  std::vector<Eigen::VectorXd> in_prefix_;   ///< per column, prefix over cells in u
  Eigen::MatrixXd bulk_v_, bulk_t_;          ///< per cell, v A/r^3 and t A/r^3 times area
  Eigen::MatrixXd bulk_v_prefix_, bulk_t_prefix_;
  Eigen::VectorXd axis_prefix_;
};

double flux_out(const NullField& f, double U, double V);
double flux_in(const NullField& f, double V, double U);
double bulk(const NullField& f, double U, double V);

struct EnergyReport {
  double U = 0, V = 0;
  int k = 0, l = 0;
  std::vector<std::pair<double, double>> out_slices;  ///< (u, out(u; V))
  std::vector<std::pair<double, double>> in_slices;   ///< (v, in(v; min(U, v)))
  double out_sup = 0, in_sup = 0, bulk = 0, E = 0;
  std::string grid_hash;

  struct Entry {
    int k, l;
    double out_sup, in_sup, bulk, E;
  };
  std::vector<Entry> commuted;

  /// Columns slice_type, coord, k, l, value.
  void write_csv(const std::string& path) const;
};

EnergyReport energy(const NullField& f, double U, double V);
EnergyReport energy(const EnergyTables& tables, double U, double V);

/// E for all (k <= kmax, l <= lmax) with S^k by commuted_field and Omega words by mode weights.
EnergyReport energy_table(const NullField& f, double U, double V, int kmax = 1, int lmax = 2);

/// E(U, V) for every mesh V in [V_lo, V_hi].
std::vector<std::pair<double, double>> energy_curve(const NullField& f, double U, double V_lo, double V_hi);

struct IdentityRegion {
  double U0 = 0, U1 = 0, V0 = 0, V1 = 0;
};

struct IdentityTerms {
  double out_hi = 0, out_lo = 0, in_hi = 0, in_lo = 0;
  double axis = 0;             ///< int s int f^2 over the axis segment (0 unless the region touches it)
  double axis_correction = 0;  ///< int [t f^2]_{x=0} dt over the same segment
  double bulk = 0, source = 0;
  double residual = 0;
  double scale = 0;  ///< largest term, for relative residuals
};

/// Balance of the discrete fluxes against bulk and source: residual =
/// out_hi - out_lo + in_hi - in_lo + axis + bulk - source. Regions are either
/// rectangles off the axis (V0 >= U1) or reach the axis (V0 <= U0).
/// F holds box f at the nodes (nullptr for free fields).
IdentityTerms divergence_residual(const NullField& f, const NodeSource* F, const IdentityRegion& region);

struct PowerFit {
  double exponent = 0, prefactor = 0;
  double rms_residual = 0, max_residual = 0;
};

PowerFit fit_power(const std::vector<std::pair<double, double>>& samples);

}  // namespace nullcone
