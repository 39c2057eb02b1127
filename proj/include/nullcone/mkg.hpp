#pragma once

// Scattering data at future null infinity, their transfer to the cone under the
// conformal inversion, Lorentz-gauge transport of the connection along the cone
// (A_L = 0), and the weighted cone norms E_0 / H_0.
//
// Angular 1-forms are stored as scalar pairs in the frame (e_theta, e_phi).
// Complex fields are pairs of real AngularFields.

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nullcone/sphere.hpp"

namespace nullcone {

struct ScatteringData {
  int lmax = 0;
  double delta = 0.1;
  Eigen::VectorXd u_nodes;                        ///< increasing, starting at U*
  std::array<std::vector<AngularField>, 2> A_bar;  ///< frame components of the radiation field
  std::vector<AngularField> Phi_re, Phi_im;
  /// Expected decay exponents |A_bar| ~ u^-a, |Phi| ~ u^-p; 0 when unknown.
  double A_decay_hint = 0, Phi_decay_hint = 0;

  void validate() const;
  /// Warnings when the last-decade decay differs from a hint by more than 30%.
  std::vector<std::string> check_hints() const;
};

struct ScatteringSample {
  std::array<AngularField, 2> A_bar;
  AngularField Phi_re, Phi_im;
};

/// Nodes U* = u_0 < ... <= u_max whose spacing grows geometrically from h0.
Eigen::VectorXd scattering_nodes(double U_star, double u_max, double h0 = 0.01, double growth = 1.03);

ScatteringData sample_scattering(const std::function<ScatteringSample(double)>& fn, const Eigen::VectorXd& u_nodes,
                                 int lmax, double delta);

/// Columnar text (u, l, m, component, value) with component one of A1, A2, Phi_re, Phi_im.
ScatteringData load_scattering_data(const std::string& path, double delta);
void save_scattering_data(const ScatteringData& data, const std::string& path);

enum class ConnectionMode { plain, supplied };

struct SnOptions {
  ConnectionMode mode = ConnectionMode::plain;
  /// D_u = d_u + i a_u in supplied mode.
  std::function<AngularField(double)> a_u;
  double tail_limit = 0.1;
};

struct NormTerm {
  std::string family;
  int n1 = 0, n2 = 0;
  double value = 0;  ///< including the tail
  double tail = 0;
};

struct SnNormReport {
  std::vector<NormTerm> terms;
  double total = 0;
  double tail_fraction = 0;
  bool divergent = false;
  std::vector<std::string> warnings;
};

/// Squared SN_{U*} norm.
SnNormReport sn_norm(const ScatteringData& data, double U_star, double delta, const SnOptions& opts = {});

struct ConeGaugeData {
  int lmax = 0;
  Eigen::VectorXd v_nodes;  ///< v~ increasing in (0, 1]
  std::array<std::vector<AngularField>, 2> alpha;
  std::vector<AngularField> phi_re, phi_im;
  std::array<std::vector<AngularField>, 2> A_e;
  std::vector<AngularField> A_Lb;
  bool A_L_zero = true;
  bool transported = false;

  int size() const { return static_cast<int>(v_nodes.size()); }
};

/// u* = u - U* + 1/4, v~ = 1 / (4 u*), alpha~ = -16 u*^3 A_bar, phi~ = 4 u* Phi.
double u_star_of(double u, double U_star);
ConeGaugeData to_cone_data(const ScatteringData& data, double U_star);

/// C^j_{n1,n2} with j in {0, 1} (e_1, e_2), n1, n2 in {0, 1}; d_omega^1 is Omega_x + Omega_y + Omega_z.
struct CoefficientTable {
  double C[2][2][2] = {};
  /// C^j_{0,0} = 1, all others 0.
  static CoefficientTable identity();
};

struct TransportOptions {
  double tol = 1e-8;
  int max_halvings = 40;
};

/// Integrates L(r A_e) = r alpha and L(r L(r A_Lb)) = sum C (rL)^n1 d^n2 A_e - r^2 Im(phi conj(L phi))
/// from the vertex with vanishing integration constants.
ConeGaugeData gauge_transport(ConeGaugeData cone, const CoefficientTable& C = CoefficientTable::identity(),
                              const TransportOptions& opts = {});

struct ConeNorm {
  double value = 0;
  double tail = 0;
  bool divergent = false;
};

struct ConeEnergies {
  ConeNorm E0_A, H0_A, E0D_phi, H0D_phi, E0_phi, H0_phi, E0_ALb;
  double cap_weight = 0;  ///< sphere measure excluded near the frame poles
  std::vector<std::pair<std::string, double>> ratios;
  std::vector<std::string> divergent;  ///< names of flagged norms

  void write_csv(const std::string& path) const;
};

ConeEnergies cone_energies(const ConeGaugeData& cone, double delta, double tail_limit = 0.1);

/// Both sides of the alpha and phi transfer estimates at the same delta:
/// cone side  sum int v~^{3-2d} |(v~L~)^n1 d^n2 alpha~|^2 (resp. v~^{1-2d}, phi~),
/// u side     4^{2d} sum int u*^{-3+2d} |(u* d_u)^n1 d^n2 (u*^3 A_bar)|^2 du / u*^2
///            (resp. u*^{-1+2d}, u* Phi).
struct TransferCheck {
  double alpha_u = 0, alpha_cone = 0, phi_u = 0, phi_cone = 0;
};
TransferCheck transfer_check(const ScatteringData& data, double U_star, double delta);

}  // namespace nullcone
