#include <cmath>
#include <limits>

#include "doctest.h"
#include "trihom/error.hpp"
#include "trihom/ionic.hpp"

using namespace trihom;

namespace {

// Model polynomial written out independently of the library.
double cubic_oracle(double v, double lambda, double theta) { return lambda * v * (1.0 - v) * (v - theta); }

}  // namespace

TEST_SUITE("ionic") {
  TEST_CASE("current examples") {
    const FhnParams p;
    CHECK(i_ion(0.0, 0.0, p) == 0.0);
    CHECK(i_ion(p.theta, 0.0, p) == 0.0);
    CHECK(i_ion(1.0, 0.0, p) == 0.0);
    CHECK(i_ion(0.5, 0.2, p) == doctest::Approx(0.1375).epsilon(1e-15));
    CHECK(i_ion(0.5, 0.2, p) == doctest::Approx(-1.0 * 0.5 * 0.5 * 0.25 + 1.0 * 0.2).epsilon(1e-15));
  }

  TEST_CASE("gate examples") {
    FhnParams p;
    CHECK(h_gate(0.0, 0.0, p) == 0.0);
    p.a = 0.3;
    CHECK(h_gate(1.0, 0.0, p) == doctest::Approx(0.3));
    p.a = 0.2;
    p.b = 0.4;
    CHECK(h_gate(0.5, 0.25, p) == 0.0);
  }

  TEST_CASE("decomposition, gate linearity and rest state") {
    for (double lambda : {-0.5, -1.0, -3.0})
      for (double theta : {0.1, 0.25, 0.7}) {
        FhnParams p;
        p.lambda = lambda;
        p.theta = theta;
        CHECK(i_ion(0.0, 0.0, p) == 0.0);
        CHECK(h_gate(0.0, 0.0, p) == 0.0);
        for (double v = -2.0; v <= 2.0; v += 0.37)
          for (double w = -1.0; w <= 1.0; w += 0.41) {
            CHECK(i_ion(v, w, p) == ionic_cubic(v, p) + ionic_gate(w, p));
            CHECK(ionic_cubic(v, p) == doctest::Approx(cubic_oracle(v, lambda, theta)).epsilon(1e-14));
            CHECK(ionic_gate(v + w, p) == doctest::Approx(ionic_gate(v, p) + ionic_gate(w, p)).epsilon(1e-14));
          }
      }
  }

  TEST_CASE("cubic leading behaviour") {
    const FhnParams p;
    // I1(v) / v^3 -> -lambda * (-1) ... i.e. the ratio |I1|/|v|^3 tends to |lambda|.
    for (double v : {10.0, 20.0, 50.0, 100.0, -10.0, -50.0, -100.0}) {
      const double exact = std::abs(p.lambda) * std::abs((1.0 - v) * (v - p.theta)) / (v * v);
      CHECK(cubic_growth_ratio(v, p) == doctest::Approx(exact).epsilon(1e-13));
    }
    CHECK(cubic_growth_ratio(100.0, p) == doctest::Approx(1.0).epsilon(0.02));
    CHECK(cubic_growth_ratio(-100.0, p) == doctest::Approx(1.0).epsilon(0.02));
    CHECK(ionic_cubic(1e3, p) / 1e9 == doctest::Approx(1.0).epsilon(2e-3));
    CHECK(ionic_cubic(-1e3, p) / -1e9 == doctest::Approx(1.0).epsilon(2e-3));
    const auto audit = audit_assumptions(p);
    CHECK(audit.cubic_leading_ratio == doctest::Approx(1.0).epsilon(2e-3));
  }

  TEST_CASE("slope matches a finite difference") {
    const FhnParams p;
    for (double v = -1.5; v <= 1.5; v += 0.25) {
      const double h = 1e-6;
      const double fd = (ionic_cubic(v + h, p) - ionic_cubic(v - h, p)) / (2 * h);
      CHECK(ionic_cubic_slope(v, p) == doctest::Approx(fd).epsilon(1e-7));
    }
  }

  TEST_CASE("assumption audit") {
    const FhnParams p;
    const auto a = audit_assumptions(p);
    CHECK(a.alpha3_violations == 0);
    CHECK(a.alpha3 <= std::max(p.a, p.b) + 1e-15);
    CHECK(a.monotonicity_violations == 0);
    CHECK(a.beta1_used > a.beta1);
    CHECK(a.alpha2 == doctest::Approx(std::abs(p.lambda) * 2.0 / 3.0));
    CHECK(a.alpha4 == doctest::Approx(10.0));
    CHECK(a.alpha5 == doctest::Approx(5.0));
    CHECK(a.coupling_margin >= -1e-12);
    CHECK(std::isfinite(a.c_witness));
    CHECK(a.c_witness > 0.0);
    // beta1 = -min I1' over the reals, at the vertex (1 + theta) / 3.
    const double vtx = (1.0 + p.theta) / 3.0;
    const double oracle_beta1 = -(p.lambda * (-3.0 * vtx * vtx + 2.0 * (1.0 + p.theta) * vtx - p.theta));
    CHECK(a.beta1 == doctest::Approx(oracle_beta1).epsilon(1e-12));
    CHECK_FALSE(a.summary().empty());
  }

  TEST_CASE("monotone shift sweep") {
    const FhnParams p;
    const auto a = audit_assumptions(p);
    double prev = -std::numeric_limits<double>::infinity();
    for (double z = -3.0; z <= 3.0; z += 1e-3) {
      const double shifted = ionic_cubic(z, p) + a.beta1_used * z;
      CHECK(shifted > prev);
      prev = shifted;
    }
  }

  TEST_CASE("lower growth radius") {
    FhnParams p;
    SampleBox wide{-50.0, 50.0, -1.0, 1.0};
    const auto a = audit_assumptions(p, wide, 2001);
    CHECK(std::isfinite(a.alpha1_lower_radius));
    // Beyond the radius the sampled bound holds.
    for (double v = a.alpha1_lower_radius; v <= 50.0; v += 0.5) {
      CHECK(std::abs(v * v * v) / a.alpha1_lower <= std::abs(ionic_cubic(v, p)));
      CHECK(std::abs(v * v * v) / a.alpha1_lower <= std::abs(ionic_cubic(-v, p)));
    }
    const auto small = audit_assumptions(p, SampleBox{-0.26, 0.26, -1, 1});
    CHECK(std::isinf(small.alpha1_lower_radius));
  }

  TEST_CASE("gate-free kinetics") {
    FhnParams p;
    p.a = 0.0;
    p.b = 0.0;
    const auto a = audit_assumptions(p);
    CHECK(std::isinf(a.alpha4));
    CHECK(a.alpha3 == 0.0);
  }

  TEST_CASE("parameter validation") {
    auto invalid = [](FhnParams p) {
      try {
        p.validate();
      } catch (const Error& e) {
        return e.kind() == ErrorKind::InvalidArgument;
      }
      return false;
    };
    FhnParams p;
    CHECK_NOTHROW(p.validate());
    p.a = -0.1;
    CHECK(invalid(p));
    p = {};
    p.b = -1.0;
    CHECK(invalid(p));
    p = {};
    p.lambda = 0.0;
    CHECK(invalid(p));
    p = {};
    p.theta = 1.0;
    CHECK(invalid(p));
    p = {};
    p.theta = 0.0;
    CHECK(invalid(p));
  }
}
