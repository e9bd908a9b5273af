#pragma once

#include <string>

namespace trihom {

/// Physical inputs: lengths in cm, R_m in kOhm cm^2, C_m in uF/cm^2,
/// conductivities in mS/cm.
struct PhysicalParams {
  double ell_mes = 0.01;
  double ell_mic = 0.001;
  double length = 1.0;  // macroscopic length L
  double r_m = 1.0;
  double c_m = 1.0;
  double lambda_i = 0.5;
  double lambda_e = 0.5;
  double delta_v = 1.0;
  double delta_w = 1.0;

  /// All positive and finite, ell_mic < ell_mes. Throws NonPositiveInput.
  void validate() const;
};

struct DerivedScales {
  double lambda = 0.0;             // lambda_i + lambda_e
  double epsilon = 0.0;            // sqrt(ell_mes / (R_m lambda))
  double length_derived = 0.0;     // ell_mes / epsilon
  double epsilon_from_length = 0.0;     // L_derived / (R_m lambda)
  double epsilon_from_input_length = 0.0;  // L_input / (R_m lambda)
  /// |epsilon_from_length - epsilon| and |epsilon_from_input_length - epsilon|.
  double epsilon_defect = 0.0;
  double epsilon_defect_input = 0.0;
  double delta = 0.0;              // ell_mic / L_input
  double delta_derived = 0.0;      // ell_mic / L_derived
  double tau = 0.0;                // R_m C_m
  double conductivity_scale = 0.0; // 1 / lambda

  std::string table() const;
};

DerivedScales derive_scales(const PhysicalParams& p);

struct IonicTerms {
  double i_ion = 0.0;
  double i_app = 0.0;
  double h = 0.0;
};

/// Currents times R_m / delta_v, gating rate times tau / delta_w.
IonicTerms rescale_ionic(const PhysicalParams& p, const IonicTerms& raw);
IonicTerms unscale_ionic(const PhysicalParams& p, const IonicTerms& scaled);

}  // namespace trihom
