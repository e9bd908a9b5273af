#include "trihom/nondim.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "trihom/error.hpp"

namespace trihom {

namespace {

void positive(double x, const char* name) {
  require(std::isfinite(x) && x > 0.0, ErrorKind::NonPositiveInput, std::string(name) + " must be positive");
}

}  // namespace

void PhysicalParams::validate() const {
  positive(ell_mes, "ell_mes");
  positive(ell_mic, "ell_mic");
  positive(length, "L");
  positive(r_m, "R_m");
  positive(c_m, "C_m");
  positive(lambda_i, "lambda_i");
  positive(lambda_e, "lambda_e");
  positive(delta_v, "delta_v");
  positive(delta_w, "delta_w");
  require(ell_mic < ell_mes, ErrorKind::NonPositiveInput, "ell_mic must be smaller than ell_mes");
}

DerivedScales derive_scales(const PhysicalParams& p) {
  p.validate();
  DerivedScales s;
  s.lambda = p.lambda_i + p.lambda_e;
  s.epsilon = std::sqrt(p.ell_mes / (p.r_m * s.lambda));
  s.length_derived = p.ell_mes / s.epsilon;
  s.epsilon_from_length = s.length_derived / (p.r_m * s.lambda);
  s.epsilon_from_input_length = p.length / (p.r_m * s.lambda);
  s.epsilon_defect = std::abs(s.epsilon_from_length - s.epsilon);
  s.epsilon_defect_input = std::abs(s.epsilon_from_input_length - s.epsilon);
  s.delta = p.ell_mic / p.length;
  s.delta_derived = p.ell_mic / s.length_derived;
  s.tau = p.r_m * p.c_m;
  s.conductivity_scale = 1.0 / s.lambda;
  return s;
}

std::string DerivedScales::table() const {
  std::ostringstream os;
  auto row = [&](const char* name, double value) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-26s %.12g\n", name, value);
    os << buf;
  };
  row("lambda", lambda);
  row("epsilon", epsilon);
  row("L_derived", length_derived);
  row("epsilon_from_length", epsilon_from_length);
  row("epsilon_from_input_length", epsilon_from_input_length);
  row("epsilon_defect", epsilon_defect);
  row("epsilon_defect_input", epsilon_defect_input);
  row("delta", delta);
  row("delta_derived", delta_derived);
  row("tau", tau);
  row("conductivity_scale", conductivity_scale);
  return os.str();
}

IonicTerms rescale_ionic(const PhysicalParams& p, const IonicTerms& raw) {
  p.validate();
  const double current = p.r_m / p.delta_v;
  const double gate = p.r_m * p.c_m / p.delta_w;
  return {raw.i_ion * current, raw.i_app * current, raw.h * gate};
}

IonicTerms unscale_ionic(const PhysicalParams& p, const IonicTerms& scaled) {
  p.validate();
  const double current = p.delta_v / p.r_m;
  const double gate = p.delta_w / (p.r_m * p.c_m);
  return {scaled.i_ion * current, scaled.i_app * current, scaled.h * gate};
}

}  // namespace trihom
