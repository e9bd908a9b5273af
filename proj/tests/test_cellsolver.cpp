#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "trihom/cellsolver.hpp"
#include "trihom/error.hpp"
#include "trihom/field_io.hpp"

using namespace trihom;

namespace {

using GeomPtr = std::shared_ptr<const UnitCellGeometry>;
using FieldPtr = std::shared_ptr<const ConductivityField>;

GeomPtr cell(int n, const ShapeSpec& shape, int dim = 2) {
  return std::make_shared<const UnitCellGeometry>(build_cell(GridSpec::cube(dim, n), shape, Level::Meso));
}

FieldPtr two_phase(const GeomPtr& g, double s0, double s1) {
  const int d = g->grid().dim;
  return std::make_shared<const ConductivityField>(ConductivityField::per_label(*g, {isotropic(d, s0), isotropic(d, s1)}));
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("cellsolver") {
  TEST_CASE("constant coefficient on the full cell has zero load and zero correctors") {
    for (int dim : {2, 3}) {
      auto g = cell(dim == 2 ? 32 : 8, ShapeSpec::full(), dim);
      auto m = std::make_shared<const ConductivityField>(ConductivityField::uniform(g->grid(), isotropic(dim, 2.5)));
      auto disc = std::make_shared<const CellDiscretization>(g, ActiveLabels::only(kExtra), m);
      for (int q = 0; q < dim; ++q) CHECK(disc->rhs(q).cwiseAbs().maxCoeff() == 0.0);
      for (const auto& f : solve_all_correctors(disc)) {
        CHECK(f.max_abs() == 0.0);
        CHECK(std::abs(f.mean()) <= 1e-12);
      }
    }
  }

  TEST_CASE("assembled matrix is exactly symmetric with zero row sums") {
    auto g = cell(24, ShapeSpec::ball({0.5, 0.5, 0}, 0.3));
    Matrix aniso(2, 2);
    aniso << 2.0, 0.3, 0.3, 1.0;
    auto m = std::make_shared<const ConductivityField>(ConductivityField::uniform(g->grid(), aniso));
    CellDiscretization disc(g, ActiveLabels::only(kExtra), m);
    const SparseMatrix& a = disc.matrix();
    const SparseMatrix at = a.transpose();
    CHECK((a - at).norm() == 0.0);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(disc.dofs());
    CHECK((a * ones).cwiseAbs().maxCoeff() <= 1e-13);
  }

  TEST_CASE("laminate load lives next to the interfaces") {
    auto g = cell(16, ShapeSpec::laminate(0, 0.5));
    auto disc = std::make_shared<const CellDiscretization>(g, ActiveLabels::all(), two_phase(g, 1.0, 4.0));
    const Eigen::VectorXd b = disc->rhs(0);
    const auto& grid = g->grid();
    for (Eigen::Index i = 0; i < disc->dofs(); ++i) {
      const Point x = grid.node_position(disc->node_of_dof(i));
      const bool at_interface = std::abs(x[0] - 0.25) < 1e-12 || std::abs(x[0] - 0.75) < 1e-12;
      if (!at_interface) CHECK(b(i) == 0.0);
      else CHECK(b(i) != 0.0);
    }
    CHECK(disc->rhs(1).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("compatibility residual") {
    auto g = cell(32, ShapeSpec::laminate(0, 0.5));
    auto disc = std::make_shared<const CellDiscretization>(g, ActiveLabels::all(), two_phase(g, 1.0, 4.0));
    LinearSystem sys{disc, disc->rhs(0), 0};
    CHECK(check_compatibility(sys) <= 1e-12 * sys.rhs.norm());
    LinearSystem corrupted = sys;
    corrupted.rhs(3) += 1.0;
    CHECK(check_compatibility(corrupted) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(kind_of([&] { solve_system(corrupted); }) == ErrorKind::Incompatible);
    auto full = cell(16, ShapeSpec::full());
    auto u = std::make_shared<const CellDiscretization>(
        full, ActiveLabels::only(kExtra),
        std::make_shared<const ConductivityField>(ConductivityField::uniform(full->grid(), isotropic(2, 1.0))));
    CHECK(check_compatibility({u, u->rhs(1), 1}) == 0.0);
  }

  TEST_CASE("laminate corrector matches the 1D closed form") {
    const int n = 32;
    auto g = cell(n, ShapeSpec::laminate(0, 0.5));
    auto disc = std::make_shared<const CellDiscretization>(g, ActiveLabels::all(), two_phase(g, 1.0, 4.0));
    const auto fields = solve_all_correctors(disc, 1e-12);
    const auto& grid = g->grid();
    // Oracle values, shifted to the same weighted mean.
    std::vector<double> ref(grid.node_count());
    double ref_mean = 0.0, wsum = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      ref[k] = oracle::laminate_corrector(grid.node_position(k)[0], 0.25, 0.75, 1.0, 4.0);
      ref_mean += fields[0].weights[k] * ref[k];
      wsum += fields[0].weights[k];
    }
    ref_mean /= wsum;
    double err = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) err = std::max(err, std::abs(fields[0].values[k] - (ref[k] - ref_mean)));
    CHECK(err <= 1e-8);
    // Slopes: +0.6 in the sigma = 1 phase, -0.6 in the sigma = 4 phase.
    const double h = 1.0 / n;
    CHECK((fields[0].values[grid.ravel({2, 0, 0})] - fields[0].values[grid.ravel({1, 0, 0})]) / h ==
          doctest::Approx(0.6).epsilon(1e-7));
    CHECK((fields[0].values[grid.ravel({17, 0, 0})] - fields[0].values[grid.ravel({16, 0, 0})]) / h ==
          doctest::Approx(-0.6).epsilon(1e-7));
    CHECK(fields[1].max_abs() == 0.0);
  }

  TEST_CASE("zero mean, residual and energy minimality on a disk cell") {
    auto g = cell(48, ShapeSpec::ball({0.5, 0.5, 0}, 0.3));
    auto disc = std::make_shared<const CellDiscretization>(g, ActiveLabels::all(), two_phase(g, 1.0, 10.0));
    const auto fields = solve_all_correctors(disc, 1e-10);
    for (const auto& f : fields) {
      CHECK(std::abs(f.mean()) <= 1e-12);
      CHECK(f.residual <= 1e-10);
      const double e0 = corrector_energy(*disc, f.values, f.direction);
      std::vector<double> zero(f.values.size(), 0.0);
      CHECK(e0 <= corrector_energy(*disc, zero, f.direction));
      for (double s : {0.9, 1.1}) {
        std::vector<double> p = f.values;
        for (auto& x : p) x *= s;
        CHECK(e0 <= corrector_energy(*disc, p, f.direction));
      }
    }
  }

  TEST_CASE("isotropic disk correctors map onto each other under the diagonal swap") {
    const int n = 40;
    auto g = cell(n, ShapeSpec::ball({0.5, 0.5, 0}, 0.3));
    auto disc = std::make_shared<const CellDiscretization>(g, ActiveLabels::only(kExtra), two_phase(g, 1.0, 1.0));
    const auto f = solve_all_correctors(disc, 1e-12);
    const auto& grid = g->grid();
    double err = 0.0, scale = f[0].max_abs();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        err = std::max(err, std::abs(f[0].values[grid.ravel({i, j, 0})] - f[1].values[grid.ravel({j, i, 0})]));
    CHECK(scale > 1e-3);
    CHECK(err <= 1e-8 * scale);
  }

  TEST_CASE("correctors are invariant under coefficient scaling") {
    auto g = cell(32, ShapeSpec::ball({0.5, 0.5, 0}, 0.25));
    auto a = solve_all_correctors(g, ActiveLabels::all(), two_phase(g, 1.0, 3.0), 1e-12);
    auto b = solve_all_correctors(g, ActiveLabels::all(), two_phase(g, 7.0, 21.0), 1e-12);
    for (int q = 0; q < 2; ++q) {
      double err = 0.0;
      for (std::size_t k = 0; k < a[q].values.size(); ++k) err = std::max(err, std::abs(a[q].values[k] - b[q].values[k]));
      CHECK(err <= 1e-9 * a[q].max_abs());
    }
  }

  TEST_CASE("periodic identification: one value per node class") {
    auto g = cell(16, ShapeSpec::laminate(0, 0.5));
    auto f = solve_all_correctors(g, ActiveLabels::all(), two_phase(g, 1.0, 4.0));
    CHECK(f[0].values.size() == g->grid().node_count());
    CHECK(g->grid().node_count() == g->grid().voxel_count());
  }

  TEST_CASE("perforated problems keep inactive nodes out of the system") {
    auto g = cell(32, ShapeSpec::ball({0.5, 0.5, 0}, 0.25));
    auto m = two_phase(g, 1.0, 1.0);
    CellDiscretization disc(g, ActiveLabels::only(kExtra), m);
    CHECK(disc.dofs() < static_cast<Eigen::Index>(g->grid().node_count()));
    CHECK(disc.active_volume() == doctest::Approx(measure_volume(*g, kExtra)));
    CHECK(disc.mass_weights().sum() == doctest::Approx(disc.active_volume()).epsilon(1e-13));
  }

  TEST_CASE("error paths") {
    ShapeSpec two;
    two.parts = {Ball{{0.25, 0.25, 0}, 0.1}, Ball{{0.75, 0.75, 0}, 0.1}};
    auto g = cell(32, two);
    CHECK(kind_of([&] { CellDiscretization(g, ActiveLabels::only(kIntra), two_phase(g, 1, 1)); }) ==
          ErrorKind::DisconnectedSubdomain);
    Matrix asym(2, 2);
    asym << 1.0, 0.5, 0.0, 1.0;
    auto full = cell(8, ShapeSpec::full());
    CHECK(kind_of([&] { ConductivityField::uniform(full->grid(), asym).audit(*full, ActiveLabels::all()); }) ==
          ErrorKind::InvalidArgument);
    Matrix indefinite(2, 2);
    indefinite << 1.0, 0.0, 0.0, -1.0;
    CHECK(kind_of([&] { ConductivityField::uniform(full->grid(), indefinite).audit(*full, ActiveLabels::all()); }) ==
          ErrorKind::InvalidArgument);
    const auto bounds = ConductivityField::uniform(full->grid(), diagonal(SmallVector{{2.0, 5.0}})).audit(*full, ActiveLabels::all());
    CHECK(bounds.alpha == doctest::Approx(2.0));
    CHECK(bounds.beta == doctest::Approx(5.0));
    CellProblem bad;
    bad.geometry = full;
    bad.coefficient = std::make_shared<const ConductivityField>(ConductivityField::uniform(full->grid(), isotropic(2, 1)));
    bad.direction = 2;
    CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::InvalidArgument);
  }

  TEST_CASE("iteration budget exhaustion raises NoConvergence") {
    auto g = cell(32, ShapeSpec::ball({0.5, 0.5, 0}, 0.3));
    CellDiscretization disc(g, ActiveLabels::all(), two_phase(g, 1.0, 100.0));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(disc.dofs());
    PcgOptions opts;
    opts.max_iterations = 2;
    opts.kernel_weights = disc.mass_weights();
    CHECK(kind_of([&] { pcg_solve(disc.matrix(), disc.rhs(0), x, opts); }) == ErrorKind::NoConvergence);
  }

  TEST_CASE("corrector export header") {
    auto g = cell(8, ShapeSpec::laminate(0, 0.5));
    auto f = solve_all_correctors(g, ActiveLabels::all(), two_phase(g, 1.0, 4.0));
    std::stringstream s;
    write_corrector(s, f[0], "chi0");
    const FieldRecord rec = read_field(s);
    CHECK(rec.name == "chi0");
    CHECK(rec.dtype == "float32");
    CHECK(rec.shape == std::vector<int>{8, 8});
    CHECK(*rec.attribute("direction") == "0");
    CHECK(rec.number("residual") == doctest::Approx(f[0].residual));
    for (std::size_t k = 0; k < rec.values.size(); ++k)
      CHECK(rec.values[k] == doctest::Approx(static_cast<float>(f[0].values[k])));
  }
}
