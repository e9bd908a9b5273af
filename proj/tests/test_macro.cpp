#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "trihom/error.hpp"
#include "trihom/macrosolver.hpp"

using namespace trihom;

namespace {

MacroConfig square(int cells, double dt, double t_final) {
  MacroConfig c;
  c.grid.dim = 2;
  c.grid.cells = {cells, cells, 1};
  c.dt = dt;
  c.t_final = t_final;
  return c;
}

MacroConfig line(int cells, double length, double dt, double t_final) {
  MacroConfig c;
  c.grid.dim = 1;
  c.grid.cells = {cells, 1, 1};
  c.grid.lengths = {length, 1.0, 1.0};
  c.m_i = Matrix::Constant(1, 1, 1.0);
  c.m_e = Matrix::Constant(1, 1, 1.0);
  c.dt = dt;
  c.t_final = t_final;
  return c;
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

double max_abs(const Eigen::VectorXd& x) { return x.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("macro") {
  TEST_CASE("assembled operators are symmetric with zero row sums") {
    auto c = square(16, 0.01, 0.0);
    c.m_i << 2.0, 0.5, 0.5, 1.0;
    const MacroSolver s(c);
    const SparseMatrix ki_t = s.stiffness_intra().transpose();
    CHECK((s.stiffness_intra() - ki_t).norm() <= 1e-14);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(c.grid.node_count()));
    CHECK(max_abs(s.stiffness_sum() * ones) <= 1e-13);
    CHECK(s.mass().sum() == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("rest state is a fixed point") {
    const auto c = square(16, 0.01, 1.0);
    const auto run = run_macro(c);
    CHECK(run.steps == 100);
    CHECK(max_abs(run.final_state.v) <= 1e-12);
    CHECK(max_abs(run.final_state.w) <= 1e-12);
    CHECK(max_abs(run.final_state.u_e) <= 1e-12);
  }

  TEST_CASE("T = 0 echoes the initial state") {
    auto c = square(16, 0.01, 0.0);
    c.v0 = 0.3;
    InitialPatch p;
    p.region = {RegionShape::Ellipse, {0.5, 0.5, 0}, {0.2, 0.2, 0}};
    p.v = 1.0;
    c.patches = {p};
    int calls = 0;
    const auto run = run_macro(c, [&](const MacroState&) { ++calls; });
    CHECK(run.steps == 0);
    CHECK(calls == 1);
    const MacroSolver s(c);
    const auto init = s.initial_state();
    CHECK((run.final_state.v - init.v).cwiseAbs().maxCoeff() == 0.0);
    CHECK((run.final_state.u_e - init.u_e).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("constant v gives zero extracellular potential") {
    auto c = square(16, 0.01, 0.0);
    c.v0 = 0.7;
    const MacroSolver s(c);
    CHECK(max_abs(s.initial_state().u_e) == 0.0);
  }

  TEST_CASE("two-conductor cosine profile") {
    const double si = 1.0, se = 3.0;
    auto c = line(128, 1.0, 0.01, 0.0);
    c.m_i(0, 0) = si;
    c.m_e(0, 0) = se;
    const MacroSolver s(c);
    MacroState st;
    const auto n = static_cast<Eigen::Index>(c.grid.node_count());
    st.v.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) st.v(i) = std::cos(2.0 * std::numbers::pi * c.grid.position(i)[0]);
    st.u_e = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd ue = s.elliptic_solve(st);
    double err = 0.0;
    for (Eigen::Index i = n / 8; i < n - n / 8; ++i) err = std::max(err, std::abs(ue(i) + si / (si + se) * st.v(i)));
    CHECK(err <= 0.05 * si / (si + se));
    // Same profile along one axis of a 2D grid.
    auto c2 = square(32, 0.01, 0.0);
    c2.m_i = isotropic(2, si);
    c2.m_e = isotropic(2, se);
    const MacroSolver s2(c2);
    MacroState st2;
    const auto n2 = static_cast<Eigen::Index>(c2.grid.node_count());
    st2.v.resize(n2);
    for (Eigen::Index i = 0; i < n2; ++i) st2.v(i) = std::cos(2.0 * std::numbers::pi * c2.grid.position(i)[1]);
    st2.u_e = Eigen::VectorXd::Zero(n2);
    const Eigen::VectorXd ue2 = s2.elliptic_solve(st2);
    CHECK((ue2 + si / (si + se) * st2.v).cwiseAbs().maxCoeff() <= 0.05 * si / (si + se));
  }

  TEST_CASE("non-zero total current is rejected") {
    const MacroSolver s(square(16, 0.01, 0.0));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(17 * 17));
    rhs(5) = 1.0;
    CHECK(kind_of([&] { s.solve_sum_operator(rhs); }) == ErrorKind::Incompatible);
    rhs(6) = -1.0;
    CHECK(std::abs(s.weighted_mean(s.solve_sum_operator(rhs))) <= 1e-14);
  }

  TEST_CASE("uniform run follows the membrane ODE with first-order accuracy") {
    const oracle::Fhn f{0.1, 0.5, -1.0, 0.25};
    const auto ref = oracle::rk4(f, 0.5, 0.0, 1.0, 1e-4);
    std::vector<double> err;
    for (double dt : {0.02, 0.01, 0.005}) {
      auto c = square(16, dt, 1.0);
      c.v0 = 0.5;
      const auto run = run_macro(c);
      CHECK(run.final_state.v.maxCoeff() - run.final_state.v.minCoeff() <= 1e-10);
      CHECK(max_abs(run.final_state.u_e) <= 1e-10);
      err.push_back(std::abs(run.final_state.v(0) - ref[0]));
    }
    CHECK(err[0] / err[1] >= 1.8);
    CHECK(err[1] / err[2] >= 1.8);
  }

  TEST_CASE("halving dt: successive differences shrink") {
    std::vector<Eigen::VectorXd> v;
    for (double dt : {0.04, 0.02, 0.01, 0.005}) {
      auto c = square(16, dt, 2.0);
      c.ionic.a = 0.001;
      c.ionic.b = 0.0025;
      InitialPatch p;
      p.region = {RegionShape::Box, {0.0, 0.5, 0}, {0.25, 1.0, 0}};
      p.v = 1.0;
      c.patches = {p};
      v.push_back(run_macro(c).final_state.v);
    }
    const double d1 = (v[1] - v[0]).norm(), d2 = (v[2] - v[1]).norm(), d3 = (v[3] - v[2]).norm();
    CHECK(d1 / d2 >= 1.5);
    CHECK(d2 / d3 >= 1.5);
  }

  TEST_CASE("zero-mean extracellular potential and current balance on every step") {
    auto c = square(24, 0.02, 1.0);
    c.m_i << 2.0, 0.3, 0.3, 1.0;
    c.m_e = isotropic(2, 1.5);
    Stimulus st;
    st.region = {RegionShape::Ellipse, {0.2, 0.3, 0}, {0.15, 0.1, 0}};
    st.amplitude = 5.0;
    st.t_off = 0.2;
    c.stimuli = {st};
    double worst = 0.0;
    const MacroSolver s(c);
    auto state = s.initial_state();
    for (int k = 0; k < 50; ++k) {
      s.step(state);
      worst = std::max(worst, std::abs(s.weighted_mean(state.u_e)));
      CHECK(s.current_balance(state) <= 1e-10);
    }
    CHECK(worst <= 1e-10);
    CHECK(max_abs(state.u_e) > 1e-4);
    const auto run = run_macro(c);
    CHECK(run.max_abs_mean_ue <= 1e-10);
    CHECK(run.max_current_balance <= 1e-10);
  }

  TEST_CASE("boundedness with default kinetics and a bounded stimulus") {
    auto c = square(16, 0.05, 500.0);
    Stimulus st;
    st.region = {RegionShape::Box, {0.0, 0.0, 0}, {0.2, 0.2, 0}};
    st.amplitude = 1.0;
    st.t_off = 250.0;
    c.stimuli = {st};
    const auto run = run_macro(c);
    CHECK(run.steps == 10000);
    double vmax = 0.0;
    for (const auto& r : run.summary) vmax = std::max({vmax, std::abs(r.v_min), std::abs(r.v_max)});
    CHECK(vmax <= 2.0);
  }

  TEST_CASE("plane wave front moves outward and slows when mu_m doubles") {
    auto c = line(128, 10.0, 0.1, 70.0);
    c.ionic.a = 0.001;
    c.ionic.b = 0.0025;
    InitialPatch p;
    p.region = {RegionShape::Box, {0.0, 0, 0}, {1.0, 0, 0}};
    p.v = 1.0;
    c.patches = {p};
    const auto fast = run_macro(c);
    for (int k = 20; k < 100; ++k) CHECK(fast.activation[k + 1] > fast.activation[k]);
    c.mu_m = 2.0;
    const auto slow = run_macro(c);
    CHECK(std::isfinite(fast.activation[90]));
    CHECK(slow.activation[90] > fast.activation[90]);
    CHECK(fast.velocity[0] > slow.velocity[0]);
    // Speed scales like 1 / sqrt(mu_m).
    CHECK(fast.velocity[0] / slow.velocity[0] == doctest::Approx(std::sqrt(2.0)).epsilon(0.1));
  }

  TEST_CASE("velocity fit on a synthetic activation map") {
    MacroGrid g;
    g.dim = 2;
    g.cells = {40, 20, 1};
    g.lengths = {4.0, 2.0, 1.0};
    std::vector<double> t(g.node_count());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0 + g.position(i)[0] / 0.8;
    CHECK(conduction_velocity(g, t, 0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(std::isnan(conduction_velocity(g, t, 1)));
    t[g.ravel({20, 10, 0})] = std::nan("");
    CHECK(std::isnan(conduction_velocity(g, t, 0)));
  }

  TEST_CASE("activation, stimulus and region helpers") {
    Region e{RegionShape::Ellipse, {0.5, 0.5, 0}, {0.2, 0.1, 0}};
    CHECK(e.contains({0.69, 0.5, 0}, 2));
    CHECK_FALSE(e.contains({0.5, 0.61, 0}, 2));
    Region b{RegionShape::Box, {0.5, 0.5, 0}, {0.2, 0.1, 0}};
    CHECK(b.contains({0.69, 0.59, 0}, 2));
    Stimulus s;
    s.t_on = 1.0;
    s.t_off = 2.0;
    CHECK(s.active(1.0));
    CHECK_FALSE(s.active(2.0));
    MacroGrid g;
    g.dim = 3;
    g.cells = {16, 17, 18};
    for (std::size_t i : {std::size_t{0}, std::size_t{123}, g.node_count() - 1}) CHECK(g.ravel(g.unravel(i)) == i);
  }

  TEST_CASE("non-finite states are reported") {
    auto c = line(16, 1.0, 10.0, 100.0);
    c.v0 = 5.0;
    CHECK(kind_of([&] { run_macro(c); }) == ErrorKind::NonFinite);
  }

  TEST_CASE("configuration validation") {
    auto c = square(16, 0.0, 1.0);
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
    c = square(8, 0.01, 1.0);
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
    c = square(16, 0.01, 1.0);
    c.m_i << 1.0, 0.0, 0.0, -1.0;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
    c = square(16, 0.01, 1.0);
    c.m_e = isotropic(3, 1.0);
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
    c = square(16, 0.01, 1.0);
    c.mu_m = 0.0;
    CHECK(kind_of([&] { c.validate(); }) == ErrorKind::InvalidArgument);
  }
}
