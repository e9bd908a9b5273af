#pragma once

#include <string>

namespace trihom {

/// FitzHugh-Nagumo parameters. Defaults are demo values, not physiological.
struct FhnParams {
  double a = 0.1;
  double b = 0.5;
  double lambda = -1.0;
  double theta = 0.25;

  /// Requires a, b >= 0, lambda < 0 and 0 < theta < 1. Throws InvalidArgument.
  void validate() const;
};

/// Cubic part of the ionic current.
inline double ionic_cubic(double v, const FhnParams& p) { return p.lambda * v * (1.0 - v) * (v - p.theta); }
/// Linear gating part of the ionic current.
inline double ionic_gate(double w, const FhnParams& p) { return -p.lambda * w; }
inline double i_ion(double v, double w, const FhnParams& p) { return ionic_cubic(v, p) + ionic_gate(w, p); }
inline double h_gate(double v, double w, const FhnParams& p) { return p.a * v - p.b * w; }
/// d/dv of the cubic part.
double ionic_cubic_slope(double v, const FhnParams& p);

struct SampleBox {
  double v_min = -2.0;
  double v_max = 2.0;
  double w_min = -2.0;
  double w_max = 2.0;
};

/// Sampled witnesses for the structural growth, coupling and monotonicity
/// conditions on the kinetics with growth exponent r = 4. Every constant is an
/// extremum over the samples.
struct AssumptionAudit {
  int samples = 0;
  /// sup |I1(v)| / (|v|^3 + 1).
  double alpha1_upper = 0.0;
  /// The lower bound |v|^3 / alpha1_lower <= |I1(v)| with alpha1_lower = 2/|lambda|
  /// holds for every sample with |v| >= this radius (infinity if never).
  double alpha1_lower = 0.0;
  double alpha1_lower_radius = 0.0;
  /// sup |I2(w)| / (|w| + 1).
  double alpha2 = 0.0;
  /// sup |H(v,w)| / (|v| + |w| + 1), and violations of the max(a, b) bound.
  double alpha3 = 0.0;
  int alpha3_violations = 0;
  /// alpha4 = |lambda|/a cancels the vw cross term of I2(w) v - alpha4 H(v,w) w,
  /// leaving alpha5 |w|^2 with alpha5 = |lambda| b / a. Infinite when a = 0.
  double alpha4 = 0.0;
  double alpha5 = 0.0;
  /// Smallest sampled I2(w) v - alpha4 H w - alpha5 w^2 (>= 0 up to rounding).
  double coupling_margin = 0.0;
  /// -min I1'; z -> I1(z) + beta1 z + beta2 is strictly increasing for any beta1 above it.
  double beta1 = 0.0;
  /// Value used for the monotonicity and C checks: beta1 + |lambda|.
  double beta1_used = 0.0;
  int monotonicity_violations = 0;
  /// sup (1+|z1|+|z2|)^2 |z1-z2|^2 / ((I~(z1) - I~(z2))(z1 - z2)) over sampled pairs.
  double c_witness = 0.0;
  /// |I1(v)| / |v|^3 at |v| = 1e3.
  double cubic_leading_ratio = 0.0;
  /// lim_{z->0} (I1(z) + beta1_used z) / z. Nonzero: the zero-limit requirement fails for this model.
  double small_z_ratio = 0.0;

  std::string summary() const;
};

/// |I1(v)| / |v|^3.
double cubic_growth_ratio(double v, const FhnParams& p);

AssumptionAudit audit_assumptions(const FhnParams& p, const SampleBox& box = {}, int samples = 401);

}  // namespace trihom
