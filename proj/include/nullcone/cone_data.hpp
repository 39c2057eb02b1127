#pragma once

// Characteristic data phi0(v, omega) on the cone {u = 0, 0 < v <= 1}.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "nullcone/sphere.hpp"

namespace nullcone {

/// Spherical-harmonic coefficients of (v d/dv)^n g at v.
using EulerClosedForm = std::function<AngularField(double v, int n)>;

struct ConeData {
  int lmax = 0;
  Eigen::VectorXd v_nodes;
  std::vector<AngularField> values;
  std::vector<AngularField> imag;  ///< empty for real data
  std::optional<double> exponent_hint;
  EulerClosedForm closed_form;

  bool is_complex() const { return !imag.empty(); }
  bool has_closed_form() const { return static_cast<bool>(closed_form); }

  /// (v d/dv)^n of the real part at v: closed form when present, else a
  /// 5-point Lagrange stencil in log v on the samples.
  AngularField at(double v, int n = 0) const;
  AngularField imag_at(double v, int n = 0) const;

  /// Radial profile helpers for the l = 0 part: G(s) = s g00(s) / sqrt(4 pi) and G'(s).
  double radial_G(double s) const;
  double radial_dG(double s) const;

  void validate() const;
};

/// Geometric mesh 1 = v_0 > ... down to v_min, cells_per_decade per factor 10, returned ascending.
Eigen::VectorXd graded_nodes(double v_min, int cells_per_decade = 22);

/// amplitude * v^(delta' - 1) * profile, sampled on nodes (default graded_nodes(1e-6)).
ConeData power_law(double delta_prime, double amplitude, const AngularField& profile,
                   const Eigen::VectorXd& nodes = Eigen::VectorXd());

/// Data from a closed form g(v) (coefficients); Euler derivatives by 4th-order differences in log v.
ConeData from_function(std::function<AngularField(double)> g, int lmax, const Eigen::VectorXd& nodes);

/// Purely sampled data (no closed form).
ConeData from_samples(Eigen::VectorXd nodes, std::vector<AngularField> values);

/// Columnar text (v, l, m, coefficient); '#' starts a comment.
ConeData load_cone_data(const std::string& path);
void save_cone_data(const ConeData& data, const std::string& path);

struct DataNormOptions {
  int n1_max = 2;
  int order_sum = 5;  ///< n2 <= order_sum - n1
  double v_min = 1e-6;
  int cells_per_decade = 22;
  int gl_points = 8;
  double cauchy_tol = 1e-3;
};

struct DataNormTerm {
  int n1 = 0, n2 = 0;
  double value = 0;      ///< tail-corrected integral
  double truncated = 0;  ///< integral over [v_min, 1] only
  bool divergent = false;
};

struct DataNormReport {
  double delta = 0;
  std::vector<DataNormTerm> terms;
  std::vector<std::pair<double, double>> partial_sums;  ///< (cutoff, sum over [cutoff, 1])
  double total = 0;
  double tail_fraction = 0;
  bool divergent = false;
};

/// sum_{n1, n2} int_0^1 int_{S^2} v^(1 - 2 delta) |(v d_v)^n1 d_omega^n2 phi0|^2, the angular
/// derivatives being all words of rotation generators of length n2.
DataNormReport data_norm(const ConeData& data, double delta, const DataNormOptions& opts = {});

/// Sum over all words of rotation generators of length n of the squared L2 norm.
double omega_words_norm_sq(const AngularField& f, int n);

}  // namespace nullcone
