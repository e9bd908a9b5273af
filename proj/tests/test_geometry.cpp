#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "trihom/error.hpp"
#include "trihom/geometry.hpp"

using namespace trihom;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

UnitCellGeometry disk(int n, double r = 0.25) {
  return build_cell(GridSpec::cube(2, n), ShapeSpec::ball({0.5, 0.5, 0.0}, r), Level::Meso);
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("full cell has one label and no interface") {
    const auto g = build_cell(GridSpec::cube(2, 32), ShapeSpec::full(), Level::Meso);
    CHECK(g.count(kExtra) == 32u * 32u);
    CHECK(g.count(kIntra) == 0u);
    CHECK(g.facets().empty());
    CHECK(measure_volume(g, kExtra) == 1.0);
    CHECK(kind_of([&] { measure_interface(g); }) == ErrorKind::EmptyInterface);
    CHECK(kind_of([&] { membrane_ratio(g); }) == ErrorKind::EmptyInterface);
  }

  TEST_CASE("disk inclusion area and perimeter") {
    const double r = 0.25;
    const auto g128 = disk(128);
    CHECK(std::abs(measure_volume(g128, kIntra) - std::numbers::pi * r * r) <= 0.02 * std::numbers::pi * r * r);
    const auto g256 = disk(256);
    CHECK(std::abs(measure_volume(g256, kIntra) - 0.19635) <= 0.01 * 0.19635);
    const double perimeter = 2.0 * std::numbers::pi * r;
    CHECK(std::abs(measure_interface(g256) - perimeter) <= 0.02 * perimeter);
    CHECK(membrane_ratio(g256) == doctest::Approx(measure_interface(g256)));
  }

  TEST_CASE("laminate fractions and flat interfaces") {
    const auto g = build_cell(GridSpec::cube(2, 64), ShapeSpec::laminate(1, 0.5), Level::Meso);
    CHECK(measure_volume(g, kExtra) == 0.5);
    CHECK(measure_volume(g, kIntra) == 0.5);
    CHECK(measure_interface(g) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(measure_staircase_interface(g) == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("membrane ratio divides by the cell volume") {
    GridSpec grid = GridSpec::cube(2, 32);
    grid.lengths = {2.0, 1.0, 1.0};
    const auto g = build_cell(grid, ShapeSpec::laminate(1, 0.5), Level::Meso);
    // Two interfaces of length 2 in a cell of area 2.
    CHECK(membrane_ratio(g) == doctest::Approx(2.0).epsilon(1e-12));
    GridSpec tall = GridSpec::cube(2, 32);
    tall.lengths = {1.0, 2.0, 1.0};
    const auto h = build_cell(tall, ShapeSpec::laminate(1, 0.5), Level::Meso);
    CHECK(membrane_ratio(h) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("volume additivity is exact") {
    for (int n : {16, 33, 64}) {
      GridSpec grid = GridSpec::cube(2, n);
      grid.lengths = {1.3, 0.7, 1.0};
      const auto g = build_cell(grid, ShapeSpec::ball({0.6, 0.3, 0.0}, 0.2), Level::Meso);
      CHECK(measure_volume(g, kExtra) + measure_volume(g, kIntra) == doctest::Approx(1.3 * 0.7).epsilon(1e-15));
      CHECK(measure_volume(g, ActiveLabels::all()) == doctest::Approx(1.3 * 0.7).epsilon(1e-15));
    }
    const auto g3 = build_cell(GridSpec::cube(3, 12), ShapeSpec::ball({0.5, 0.5, 0.5}, 0.3), Level::Micro);
    CHECK(measure_volume(g3, kCytosol) + measure_volume(g3, kMito) == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("disk measures converge monotonically under refinement") {
    const double r = 0.25, area = std::numbers::pi * r * r, perimeter = 2.0 * std::numbers::pi * r;
    double prev_area = 1e9, prev_perimeter = 1e9;
    for (int n : {32, 64, 128, 256}) {
      const auto g = disk(n);
      const double ea = std::abs(measure_volume(g, kIntra) - area);
      const double ep = std::abs(measure_interface(g) - perimeter);
      CAPTURE(n);
      CHECK(ea < prev_area);
      CHECK(ep < prev_perimeter);
      prev_area = ea;
      prev_perimeter = ep;
    }
  }

  TEST_CASE("reconstructed interface beats the staircase on curved shapes") {
    const auto g = disk(64);
    const double perimeter = 2.0 * std::numbers::pi * 0.25;
    CHECK(std::abs(measure_interface(g) - perimeter) < std::abs(measure_staircase_interface(g) - perimeter));
    // Staircase length of a convex curve tends to 4/pi times its length.
    CHECK(measure_staircase_interface(g) == doctest::Approx(4.0 / std::numbers::pi * perimeter).epsilon(0.05));
  }

  TEST_CASE("translation by a full period leaves labels unchanged") {
    const auto grid = GridSpec::cube(2, 48);
    const auto a = build_cell(grid, ShapeSpec::ball({0.3, 0.7, 0.0}, 0.2), Level::Meso);
    const auto b = build_cell(grid, ShapeSpec::ball({1.3, -0.3, 0.0}, 0.2), Level::Meso);
    CHECK(a.labels() == b.labels());
  }

  TEST_CASE("periodic wrapping inclusion") {
    const auto g = build_cell(GridSpec::cube(2, 64), ShapeSpec::ball({0.0, 0.0, 0.0}, 0.25), Level::Meso);
    const auto centred = disk(64);
    CHECK(g.count(kIntra) == centred.count(kIntra));
    CHECK(measure_interface(g) == doctest::Approx(measure_interface(centred)).epsilon(1e-12));
  }

  TEST_CASE("connectivity of laminates and rejection of blocking inclusions") {
    const auto lam = build_cell(GridSpec::cube(2, 32), ShapeSpec::laminate(0, 0.5), Level::Meso);
    const auto c = lam.connectivity(ActiveLabels::only(kExtra));
    CHECK(c.components == 1);
    CHECK_FALSE(c.percolates[0]);
    CHECK(c.percolates[1]);
    ShapeSpec cross;
    cross.parts = {Laminate{0, 0.5}, Laminate{1, 0.5}};
    CHECK(kind_of([&] { build_cell(GridSpec::cube(2, 32), cross, Level::Meso); }) ==
          ErrorKind::DisconnectedSubdomain);
    // Inclusion that swallows the whole cell leaves no matrix phase.
    CHECK(kind_of([&] {
            build_cell(GridSpec::cube(2, 16), ShapeSpec::rounded_box({0.5, 0.5, 0}, {0.6, 0.6, 0}, 0.0), Level::Meso);
          }) == ErrorKind::DisconnectedSubdomain);
  }

  TEST_CASE("two separate inclusions form two components") {
    ShapeSpec two;
    two.parts = {Ball{{0.25, 0.25, 0}, 0.1}, Ball{{0.75, 0.75, 0}, 0.1}};
    const auto g = build_cell(GridSpec::cube(2, 32), two, Level::Meso);
    const auto c = g.connectivity(ActiveLabels::only(kIntra));
    CHECK(c.components == 2);
    CHECK_FALSE(c.percolates_any(2));
  }

  TEST_CASE("invalid inputs") {
    CHECK(kind_of([] { GridSpec::cube(2, 3).validate(); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { GridSpec::cube(4, 8).validate(); }) == ErrorKind::InvalidArgument);
    GridSpec bad = GridSpec::cube(2, 8);
    bad.lengths[1] = 0.0;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidArgument);
    CHECK(kind_of([] { build_cell(GridSpec::cube(2, 8), ShapeSpec::laminate(0, 1.0), Level::Meso); }) ==
          ErrorKind::InvalidShape);
    CHECK(kind_of([] { build_cell(GridSpec::cube(2, 8), ShapeSpec::laminate(2, 0.5), Level::Meso); }) ==
          ErrorKind::InvalidShape);
    CHECK(kind_of([] { build_cell(GridSpec::cube(2, 8), ShapeSpec::ball({0.5, 0.5, 0}, -1.0), Level::Meso); }) ==
          ErrorKind::InvalidShape);
    const auto g = disk(16);
    CHECK(kind_of([&] { measure_volume(g, std::uint8_t{5}); }) == ErrorKind::UnknownLabel);
  }

  TEST_CASE("interface facets point from inclusion to matrix") {
    const auto g = disk(64);
    double area = 0.0;
    for (const auto& f : g.facets()) {
      const double rx = f.position[0] - 0.5, ry = f.position[1] - 0.5;
      CHECK(rx * f.normal[0] + ry * f.normal[1] > 0.0);
      CHECK(std::hypot(f.normal[0], f.normal[1]) == doctest::Approx(1.0));
      area += f.area;
    }
    CHECK(area == doctest::Approx(measure_interface(g)));
  }

  TEST_CASE("3D ball volume and surface") {
    const auto g = build_cell(GridSpec::cube(3, 48), ShapeSpec::ball({0.5, 0.5, 0.5}, 0.3), Level::Micro);
    const double vol = 4.0 / 3.0 * std::numbers::pi * 0.027, surf = 4.0 * std::numbers::pi * 0.09;
    CHECK(measure_volume(g, kMito) == doctest::Approx(vol).epsilon(0.02));
    CHECK(measure_interface(g) == doctest::Approx(surf).epsilon(0.03));
  }

  TEST_CASE("label export header and payload") {
    const auto g = build_cell(GridSpec::cube(2, 8), ShapeSpec::laminate(1, 0.5), Level::Meso);
    std::ostringstream out;
    write_labels(out, g);
    const std::string s = out.str();
    const auto eol = s.find('\n');
    CHECK(s.substr(0, eol) == "TRIHOM-LABELS v1 level=meso dim=2 resolution=8,8 lengths=1,1 legend=0:EXTRA,1:INTRA");
    REQUIRE(s.size() == eol + 1 + 64);
    for (std::size_t v = 0; v < 64; ++v) CHECK(static_cast<std::uint8_t>(s[eol + 1 + v]) == g.label(v));
  }
}
