#include <cmath>

#include "doctest.h"
#include "trihom/error.hpp"
#include "trihom/nondim.hpp"

using namespace trihom;

TEST_SUITE("nondim") {
  TEST_CASE("charging time") {
    PhysicalParams p;
    p.r_m = 1.0;
    p.c_m = 1.0;
    CHECK(derive_scales(p).tau == 1.0);
    p.r_m = 3.0;
    p.c_m = 0.5;
    CHECK(derive_scales(p).tau == doctest::Approx(1.5));
  }

  TEST_CASE("epsilon fixed point") {
    PhysicalParams p;
    p.ell_mes = 2.0;
    p.ell_mic = 0.1;
    p.r_m = 2.0;
    p.lambda_i = 0.25;
    p.lambda_e = 0.75;
    CHECK(derive_scales(p).epsilon == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("both epsilon formulas") {
    PhysicalParams p;
    p.ell_mes = 0.01;
    p.ell_mic = 0.001;
    p.r_m = 1.0;
    p.lambda_i = 0.5;
    p.lambda_e = 0.5;
    p.length = 0.1;
    const auto s = derive_scales(p);
    const double eps = std::sqrt(0.01 / (1.0 * 1.0));
    CHECK(s.lambda == 1.0);
    CHECK(s.epsilon == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.length_derived == doctest::Approx(0.01 / eps).epsilon(1e-15));
    CHECK(s.epsilon_from_length == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(s.epsilon_defect <= 1e-15);
    CHECK(s.epsilon_from_input_length == doctest::Approx(0.1 / 1.0));
    CHECK(s.delta == doctest::Approx(0.001 / 0.1));
    CHECK(s.conductivity_scale == 1.0);
  }

  TEST_CASE("epsilon defect is reported, not hidden") {
    PhysicalParams p;
    p.ell_mes = 0.04;
    p.ell_mic = 0.001;
    p.length = 5.0;
    p.r_m = 1.0;
    const auto s = derive_scales(p);
    CHECK(s.epsilon == doctest::Approx(0.2));
    CHECK(s.epsilon_from_input_length == doctest::Approx(5.0));
    CHECK(s.epsilon_defect_input == doctest::Approx(4.8));
    CHECK(s.table().find("epsilon_defect") != std::string::npos);
  }

  TEST_CASE("monotonicity of the scales") {
    PhysicalParams p;
    double prev = 1e9;
    for (double r : {0.5, 1.0, 2.0, 4.0}) {
      p.r_m = r;
      const double e = derive_scales(p).epsilon;
      CHECK(e < prev);
      prev = e;
    }
    p = {};
    prev = 1e9;
    for (double l : {0.2, 0.5, 1.0, 3.0}) {
      p.lambda_i = l;
      const double e = derive_scales(p).epsilon;
      CHECK(e < prev);
      prev = e;
    }
    p = {};
    prev = 0.0;
    for (double m : {1e-4, 1e-3, 5e-3}) {
      p.ell_mic = m;
      const double d = derive_scales(p).delta;
      CHECK(d > prev);
      prev = d;
    }
  }

  TEST_CASE("ionic rescaling") {
    PhysicalParams p;
    p.r_m = 1.0;
    p.delta_v = 1.0;
    p.c_m = 1.0;
    p.delta_w = 1.0;
    const IonicTerms raw{0.3, -0.7, 1.25};
    const auto id = rescale_ionic(p, raw);
    CHECK(id.i_ion == raw.i_ion);
    CHECK(id.i_app == raw.i_app);
    CHECK(id.h == raw.h);
    p.r_m = 2.5;
    p.c_m = 0.4;
    p.delta_v = 3.0;
    p.delta_w = 0.7;
    const auto s = rescale_ionic(p, raw);
    CHECK(s.i_ion == doctest::Approx(raw.i_ion * 2.5 / 3.0));
    CHECK(s.h == doctest::Approx(raw.h * (2.5 * 0.4) / 0.7));
    PhysicalParams q = p;
    q.delta_v *= 2.0;
    CHECK(rescale_ionic(q, raw).i_ion == doctest::Approx(0.5 * s.i_ion));
    CHECK(rescale_ionic(q, raw).i_app == doctest::Approx(0.5 * s.i_app));
    const auto back = unscale_ionic(p, s);
    CHECK(back.i_ion == doctest::Approx(raw.i_ion).epsilon(1e-15));
    CHECK(back.i_app == doctest::Approx(raw.i_app).epsilon(1e-15));
    CHECK(back.h == doctest::Approx(raw.h).epsilon(1e-15));
  }

  TEST_CASE("invalid physical inputs") {
    auto rejected = [](PhysicalParams p) {
      try {
        derive_scales(p);
      } catch (const Error& e) {
        return e.kind() == ErrorKind::NonPositiveInput;
      }
      return false;
    };
    PhysicalParams p;
    p.r_m = 0.0;
    CHECK(rejected(p));
    p = {};
    p.c_m = -1.0;
    CHECK(rejected(p));
    p = {};
    p.ell_mic = p.ell_mes;
    CHECK(rejected(p));
    p = {};
    p.lambda_e = std::nan("");
    CHECK(rejected(p));
  }
}
