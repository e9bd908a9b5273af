#include "trihom/ionic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "trihom/error.hpp"

namespace trihom {

void FhnParams::validate() const {
  require(std::isfinite(a) && a >= 0.0, ErrorKind::InvalidArgument, "FHN parameter a must be >= 0");
  require(std::isfinite(b) && b >= 0.0, ErrorKind::InvalidArgument, "FHN parameter b must be >= 0");
  require(std::isfinite(lambda) && lambda < 0.0, ErrorKind::InvalidArgument, "FHN parameter lambda must be < 0");
  require(theta > 0.0 && theta < 1.0, ErrorKind::InvalidArgument, "FHN parameter theta must lie in (0, 1)");
}

double ionic_cubic_slope(double v, const FhnParams& p) {
  return p.lambda * (-3.0 * v * v + 2.0 * (1.0 + p.theta) * v - p.theta);
}

double cubic_growth_ratio(double v, const FhnParams& p) {
  return std::abs(ionic_cubic(v, p)) / std::abs(v * v * v);
}

AssumptionAudit audit_assumptions(const FhnParams& p, const SampleBox& box, int samples) {
  p.validate();
  require(samples >= 2 && box.v_max > box.v_min && box.w_max > box.w_min, ErrorKind::InvalidArgument,
          "invalid sample box");
  const double lam = std::abs(p.lambda);
  AssumptionAudit out;
  out.samples = samples;

  std::vector<double> vs(static_cast<std::size_t>(samples)), ws(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / (samples - 1);
    vs[static_cast<std::size_t>(i)] = box.v_min + s * (box.v_max - box.v_min);
    ws[static_cast<std::size_t>(i)] = box.w_min + s * (box.w_max - box.w_min);
  }

  out.alpha1_lower = 2.0 / lam;
  out.alpha1_lower_radius = 0.0;
  for (double v : vs) {
    const double i1 = std::abs(ionic_cubic(v, p));
    const double c = std::abs(v * v * v);
    out.alpha1_upper = std::max(out.alpha1_upper, i1 / (c + 1.0));
    if (c / out.alpha1_lower > i1) out.alpha1_lower_radius = std::max(out.alpha1_lower_radius, std::abs(v));
  }
  // The radius is where the bound starts to hold: one sample step beyond the last failure.
  if (out.alpha1_lower_radius > 0.0) {
    const double step = (box.v_max - box.v_min) / (samples - 1);
    out.alpha1_lower_radius += step;
    if (out.alpha1_lower_radius > std::max(std::abs(box.v_min), std::abs(box.v_max)))
      out.alpha1_lower_radius = std::numeric_limits<double>::infinity();
  }
  for (double w : ws) out.alpha2 = std::max(out.alpha2, std::abs(ionic_gate(w, p)) / (std::abs(w) + 1.0));

  const double a3 = std::max(p.a, p.b);
  out.alpha4 = p.a > 0.0 ? lam / p.a : std::numeric_limits<double>::infinity();
  out.alpha5 = p.a > 0.0 ? lam * p.b / p.a : std::numeric_limits<double>::infinity();
  out.coupling_margin = std::numeric_limits<double>::infinity();
  for (double v : vs)
    for (double w : ws) {
      const double h = h_gate(v, w, p);
      const double r = std::abs(h) / (std::abs(v) + std::abs(w) + 1.0);
      out.alpha3 = std::max(out.alpha3, r);
      if (r > a3 * (1.0 + 1e-14)) ++out.alpha3_violations;
      if (p.a > 0.0)
        out.coupling_margin =
            std::min(out.coupling_margin, ionic_gate(w, p) * v - out.alpha4 * h * w - out.alpha5 * w * w);
    }
  if (!(p.a > 0.0)) out.coupling_margin = -std::numeric_limits<double>::infinity();

  // I1' is a convex parabola; its minimum over the reals sits at the vertex.
  const double vertex = (1.0 + p.theta) / 3.0;
  double min_slope = ionic_cubic_slope(vertex, p);
  for (double v : vs) min_slope = std::min(min_slope, ionic_cubic_slope(v, p));
  out.beta1 = std::max(0.0, -min_slope);
  out.beta1_used = out.beta1 + lam;
  auto shifted = [&](double z) { return ionic_cubic(z, p) + out.beta1_used * z; };
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      const double z1 = vs[i], z2 = vs[j];
      const double lhs = (shifted(z2) - shifted(z1)) * (z2 - z1);
      if (!(lhs > 0.0)) {
        ++out.monotonicity_violations;
        continue;
      }
      const double g = 1.0 + std::abs(z1) + std::abs(z2);
      out.c_witness = std::max(out.c_witness, g * g * (z2 - z1) * (z2 - z1) / lhs);
    }

  out.cubic_leading_ratio = cubic_growth_ratio(1e3, p);
  out.small_z_ratio = ionic_cubic_slope(0.0, p) + out.beta1_used;
  return out;
}

std::string AssumptionAudit::summary() const {
  std::ostringstream os;
  os.precision(6);
  os << "samples=" << samples << " alpha1_upper=" << alpha1_upper << " alpha1_lower=" << alpha1_lower
     << " (for |v|>=" << alpha1_lower_radius << ") alpha2=" << alpha2 << " alpha3=" << alpha3
     << " alpha3_violations=" << alpha3_violations << " alpha4=" << alpha4 << " alpha5=" << alpha5
     << " coupling_margin=" << coupling_margin << " beta1>" << beta1 << " (used " << beta1_used
     << ") monotonicity_violations=" << monotonicity_violations << " C=" << c_witness
     << " cubic_leading_ratio=" << cubic_leading_ratio << " small_z_ratio=" << small_z_ratio;
  return os.str();
}

}  // namespace trihom
