#include "trihom/macrosolver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "trihom/error.hpp"
#include "trihom/fem.hpp"

namespace trihom {

namespace {

void check_tensor(const Matrix& m, int dim, const char* name) {
  require(m.rows() == dim && m.cols() == dim, ErrorKind::InvalidArgument,
          std::string(name) + " must be " + std::to_string(dim) + "x" + std::to_string(dim));
  require(m.allFinite(), ErrorKind::InvalidArgument, std::string(name) + " has non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorKind::InvalidArgument,
          std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() > 0.0, ErrorKind::InvalidArgument,
          std::string(name) + " is not positive definite");
}

bool all_finite(const Eigen::VectorXd& x) { return x.allFinite(); }

}  // namespace

std::size_t MacroGrid::node_count() const {
  std::size_t n = 1;
  for (int a = 0; a < kMaxDim; ++a) n *= static_cast<std::size_t>(nodes(a));
  return n;
}

Index3 MacroGrid::unravel(std::size_t node) const {
  Index3 idx{0, 0, 0};
  idx[2] = static_cast<int>(node % static_cast<std::size_t>(nodes(2)));
  node /= static_cast<std::size_t>(nodes(2));
  idx[1] = static_cast<int>(node % static_cast<std::size_t>(nodes(1)));
  idx[0] = static_cast<int>(node / static_cast<std::size_t>(nodes(1)));
  return idx;
}

Point MacroGrid::position(std::size_t node) const {
  const Index3 idx = unravel(node);
  Point x{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) x[a] = idx[a] * spacing(a);
  return x;
}

bool Region::contains(const Point& x, int dim) const {
  if (shape == RegionShape::Box) {
    for (int a = 0; a < dim; ++a)
      if (std::abs(x[a] - center[a]) > semi_axes[a]) return false;
    return true;
  }
  double s = 0.0;
  for (int a = 0; a < dim; ++a) {
    if (semi_axes[a] <= 0.0) return false;
    const double r = (x[a] - center[a]) / semi_axes[a];
    s += r * r;
  }
  return s <= 1.0;
}

void MacroConfig::validate() const {
  require(grid.dim >= 1 && grid.dim <= 3, ErrorKind::InvalidArgument, "macro dim must be 1, 2 or 3");
  for (int a = 0; a < grid.dim; ++a) {
    require(grid.cells[a] >= min_cells, ErrorKind::InvalidArgument,
            "macro grid needs at least " + std::to_string(min_cells) + " cells per axis");
    require(std::isfinite(grid.lengths[a]) && grid.lengths[a] > 0.0, ErrorKind::InvalidArgument,
            "macro lengths must be positive");
  }
  require(std::isfinite(dt) && dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
  require(std::isfinite(t_final) && t_final >= 0.0, ErrorKind::InvalidArgument, "T must be non-negative");
  require(std::isfinite(mu_m) && mu_m > 0.0, ErrorKind::InvalidArgument, "mu_m must be positive");
  check_tensor(m_i, grid.dim, "intracellular tensor");
  check_tensor(m_e, grid.dim, "extracellular tensor");
  ionic.validate();
  require(elliptic_tolerance > 0.0 && parabolic_tolerance > 0.0, ErrorKind::InvalidArgument,
          "solver tolerances must be positive");
  require(snapshot_every >= 0, ErrorKind::InvalidArgument, "snapshot_every must be >= 0");
  for (const auto& s : stimuli)
    require(std::isfinite(s.amplitude) && s.t_off >= s.t_on, ErrorKind::InvalidArgument, "invalid stimulus");
}

MacroSolver::MacroSolver(MacroConfig config) : config_(std::move(config)) {
  config_.validate();
  const MacroGrid& g = config_.grid;
  const int d = g.dim;
  Point h{1.0, 1.0, 1.0};
  for (int a = 0; a < d; ++a) h[a] = g.spacing(a);
  const BoxElement el(d, h);
  const auto ki = el.stiffness(config_.m_i);
  const auto ke = el.stiffness(config_.m_e);
  const int corners = el.nodes();
  const std::size_t n = g.node_count();

  std::vector<Eigen::Triplet<double>> ti, te;
  std::size_t elements = 1;
  for (int a = 0; a < d; ++a) elements *= static_cast<std::size_t>(g.cells[a]);
  ti.reserve(elements * corners * corners);
  te.reserve(elements * corners * corners);
  mass_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const double share = el.volume() / corners;
  Index3 e{0, 0, 0};
  for (e[0] = 0; e[0] < g.cells[0]; ++e[0])
    for (e[1] = 0; e[1] < (d > 1 ? g.cells[1] : 1); ++e[1])
      for (e[2] = 0; e[2] < (d > 2 ? g.cells[2] : 1); ++e[2]) {
        std::array<std::size_t, 8> nodes{};
        for (int c = 0; c < corners; ++c) {
          Index3 idx = e;
          for (int a = 0; a < d; ++a) idx[a] += (c >> a) & 1;
          nodes[c] = g.ravel(idx);
          mass_(static_cast<Eigen::Index>(nodes[c])) += share;
        }
        for (int a = 0; a < corners; ++a)
          for (int b = 0; b < corners; ++b) {
            ti.emplace_back(nodes[a], nodes[b], ki(a, b));
            te.emplace_back(nodes[a], nodes[b], ke(a, b));
          }
      }
  const auto nn = static_cast<Eigen::Index>(n);
  k_i_.resize(nn, nn);
  k_i_.setFromTriplets(ti.begin(), ti.end());
  SparseMatrix k_e(nn, nn);
  k_e.setFromTriplets(te.begin(), te.end());
  k_sum_ = k_i_ + k_e;
  SparseMatrix m(nn, nn);
  std::vector<Eigen::Triplet<double>> tm;
  for (Eigen::Index i = 0; i < nn; ++i) tm.emplace_back(i, i, config_.mu_m * mass_(i) / config_.dt);
  m.setFromTriplets(tm.begin(), tm.end());
  parabolic_ = m + k_i_;
  parabolic_.makeCompressed();
  k_sum_.makeCompressed();
  k_i_.makeCompressed();
}

Eigen::VectorXd MacroSolver::applied_current(double t) const {
  const MacroGrid& g = config_.grid;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.node_count()));
  for (const auto& s : config_.stimuli) {
    if (!s.active(t)) continue;
    for (std::size_t i = 0; i < g.node_count(); ++i)
      if (s.region.contains(g.position(i), g.dim)) out(static_cast<Eigen::Index>(i)) += s.amplitude;
  }
  return out;
}

double MacroSolver::weighted_mean(const Eigen::VectorXd& x) const { return mass_.dot(x) / mass_.sum(); }

Eigen::VectorXd MacroSolver::solve_sum_operator(const Eigen::VectorXd& rhs) const {
  return solve_sum(rhs, Eigen::VectorXd::Zero(rhs.size()), 0.0);
}

Eigen::VectorXd MacroSolver::solve_sum(const Eigen::VectorXd& rhs, Eigen::VectorXd guess, double term_scale) const {
  const double size = rhs.cwiseAbs().sum();
  // A right-hand side at rounding level of its own terms (uniform v) is zero.
  if (size == 0.0 || size <= 1e-13 * term_scale) return Eigen::VectorXd::Zero(rhs.size());
  require(std::abs(rhs.sum()) <= 1e-10 * std::max(size, term_scale), ErrorKind::Incompatible,
          "elliptic right-hand side has non-zero total current " + std::to_string(rhs.sum()));
  if (guess.size() != rhs.size()) guess = Eigen::VectorXd::Zero(rhs.size());
  PcgOptions opts;
  opts.tolerance = config_.elliptic_tolerance;
  opts.kernel_weights = mass_;
  pcg_solve(k_sum_, rhs, guess, opts);
  project_zero_mean(guess, mass_);
  return guess;
}

Eigen::VectorXd MacroSolver::elliptic_solve(const MacroState& state) const {
  const Eigen::VectorXd abs_v = state.v.cwiseAbs();
  double term_scale = 0.0;
  for (Eigen::Index r = 0; r < k_i_.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(k_i_, r); it; ++it) term_scale += std::abs(it.value()) * abs_v(it.col());
  return solve_sum(-(k_i_ * state.v), state.u_e, term_scale);
}

MacroState MacroSolver::initial_state() const {
  const MacroGrid& g = config_.grid;
  const auto n = static_cast<Eigen::Index>(g.node_count());
  MacroState s;
  s.v = Eigen::VectorXd::Constant(n, config_.v0);
  s.w = Eigen::VectorXd::Constant(n, config_.w0);
  for (const auto& p : config_.patches)
    for (Eigen::Index i = 0; i < n; ++i)
      if (p.region.contains(g.position(static_cast<std::size_t>(i)), g.dim)) {
        s.v(i) = p.v;
        s.w(i) = p.w;
      }
  s.u_e = Eigen::VectorXd::Zero(n);
  s.u_e = elliptic_solve(s);
  return s;
}

void MacroSolver::step(MacroState& state) const {
  const double dt = config_.dt;
  const auto& p = config_.ionic;
  const Eigen::Index n = state.v.size();
  const Eigen::VectorXd iapp = applied_current(state.t);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i)
    rhs(i) = config_.mu_m * mass_(i) * (state.v(i) / dt - (i_ion(state.v(i), state.w(i), p) - iapp(i)));
  rhs.noalias() -= k_i_ * state.u_e;
  require(all_finite(rhs), ErrorKind::NonFinite,
          "non-finite reaction at t = " + std::to_string(state.t) + "; dt is likely too large");

  Eigen::VectorXd v_next = state.v;
  PcgOptions opts;
  opts.tolerance = config_.parabolic_tolerance;
  pcg_solve(parabolic_, rhs, v_next, opts);
  for (Eigen::Index i = 0; i < n; ++i) state.w(i) += dt * h_gate(v_next(i), state.w(i), p);
  state.v = std::move(v_next);
  require(all_finite(state.v) && all_finite(state.w), ErrorKind::NonFinite,
          "non-finite state at t = " + std::to_string(state.t + dt) + "; dt is likely too large");
  state.u_e = elliptic_solve(state);
  state.t += dt;
  ++state.step;
}

double MacroSolver::current_balance(const MacroState& state) const {
  const Eigen::VectorXd a = k_sum_ * state.u_e;
  const Eigen::VectorXd b = k_i_ * state.v;
  const double scale = a.cwiseAbs().sum() + b.cwiseAbs().sum();
  if (scale == 0.0) return 0.0;
  return std::abs(a.sum() + b.sum()) / scale;
}

double conduction_velocity(const MacroGrid& grid, const std::vector<double>& activation, int axis) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (axis >= grid.dim) return nan;
  Index3 idx{0, 0, 0};
  for (int a = 0; a < grid.dim; ++a) idx[a] = grid.nodes(a) / 2;
  double sx = 0.0, st = 0.0, sxx = 0.0, sxt = 0.0;
  int count = 0;
  const double len = grid.lengths[axis];
  for (int k = 0; k < grid.nodes(axis); ++k) {
    idx[axis] = k;
    const double x = k * grid.spacing(axis);
    if (x < 0.25 * len - 1e-12 || x > 0.75 * len + 1e-12) continue;
    const double t = activation[grid.ravel(idx)];
    if (!std::isfinite(t)) return nan;
    sx += x;
    st += t;
    sxx += x * x;
    sxt += x * t;
    ++count;
  }
  if (count < 2) return nan;
  const double denom = count * sxx - sx * sx;
  const double slope = (count * sxt - sx * st) / denom;
  // A flat activation profile means no wave travels along this axis.
  if (!(std::abs(slope) * 0.5 * len > 1e-9 * (1.0 + std::abs(st / count)))) return nan;
  return 1.0 / std::abs(slope);
}

MacroRun run_macro(const MacroConfig& config, const SnapshotSink& sink) {
  const MacroSolver solver(config);
  const MacroGrid& g = solver.grid();
  MacroRun run;
  MacroState state = solver.initial_state();
  const auto n = static_cast<std::size_t>(state.v.size());
  const double thr = config.activation_threshold;
  run.activation.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i)
    if (state.v(static_cast<Eigen::Index>(i)) >= thr) run.activation[i] = 0.0;

  const long steps = static_cast<long>(std::llround(config.t_final / config.dt));
  const long summary_every = config.snapshot_every > 0 ? config.snapshot_every : std::max(1L, steps / 100);
  auto record = [&](const MacroState& s) {
    MacroSummaryRow row;
    row.t = s.t;
    row.v_min = s.v.minCoeff();
    row.v_max = s.v.maxCoeff();
    row.w_min = s.w.minCoeff();
    row.w_max = s.w.maxCoeff();
    row.ue_mean = solver.weighted_mean(s.u_e);
    row.ue_min = s.u_e.minCoeff();
    row.ue_max = s.u_e.maxCoeff();
    std::size_t act = 0;
    for (double t : run.activation)
      if (std::isfinite(t)) ++act;
    row.activated_fraction = static_cast<double>(act) / static_cast<double>(n);
    run.summary.push_back(row);
  };
  auto track = [&](const MacroState& s) {
    run.max_abs_mean_ue = std::max(run.max_abs_mean_ue, std::abs(solver.weighted_mean(s.u_e)));
    run.max_current_balance = std::max(run.max_current_balance, solver.current_balance(s));
  };
  track(state);
  record(state);
  if (sink) sink(state);

  Eigen::VectorXd prev;
  for (long k = 0; k < steps; ++k) {
    prev = state.v;
    const double t_prev = state.t;
    solver.step(state);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isfinite(run.activation[i])) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      if (prev(ii) < thr && state.v(ii) >= thr)
        run.activation[i] = t_prev + config.dt * (thr - prev(ii)) / (state.v(ii) - prev(ii));
    }
    track(state);
    const bool last = k + 1 == steps;
    if ((k + 1) % summary_every == 0 || last) record(state);
    if (sink && config.snapshot_every > 0 && ((k + 1) % config.snapshot_every == 0)) sink(state);
  }
  run.steps = steps;
  for (int a = 0; a < g.dim; ++a) run.velocity[a] = conduction_velocity(g, run.activation, a);
  run.final_state = std::move(state);
  return run;
}

}  // namespace trihom
