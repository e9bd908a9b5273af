#include "trihom/microref.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "trihom/error.hpp"
#include "trihom/fem.hpp"

namespace trihom {

namespace {

void check_tensor(const Matrix& m, const char* name) {
  require(m.rows() == 2 && m.cols() == 2 && m.allFinite(), ErrorKind::InvalidArgument,
          std::string(name) + " must be a finite 2x2 matrix");
  require(std::abs(m(0, 1) - m(1, 0)) <= 1e-12 * m.cwiseAbs().maxCoeff(), ErrorKind::InvalidArgument,
          std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() > 0.0, ErrorKind::InvalidArgument,
          std::string(name) + " is not positive definite");
}

double frac(double x) { return x - std::floor(x); }

}  // namespace

int MicroConfig::cells_per_side() const { return static_cast<int>(std::lround(1.0 / epsilon)); }

void MicroConfig::validate() const {
  require(std::isfinite(epsilon) && epsilon > 0.0, ErrorKind::InvalidArgument, "epsilon must be positive");
  const int m = cells_per_side();
  require(m >= 1 && m <= 8 && std::abs(m * epsilon - 1.0) <= 1e-12, ErrorKind::InvalidArgument,
          "epsilon must be 1/m with integer 1 <= m <= 8");
  require(cell_resolution >= 4, ErrorKind::InvalidArgument, "cell resolution must be >= 4");
  require(resolution() <= max_resolution, ErrorKind::InvalidArgument,
          "micro grid " + std::to_string(resolution()) + " exceeds " + std::to_string(max_resolution) + " per side");
  require(hole_cells >= 1, ErrorKind::InvalidArgument, "hole_cells must be >= 1");
  require(std::isfinite(dt) && dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
  require(std::isfinite(t_final) && t_final >= 0.0, ErrorKind::InvalidArgument, "T must be non-negative");
  require(tolerance > 0.0, ErrorKind::InvalidArgument, "tolerance must be positive");
  require(snapshot_every >= 0, ErrorKind::InvalidArgument, "snapshot_every must be >= 0");
  check_tensor(m_i, "intracellular conductivity");
  check_tensor(m_e, "extracellular conductivity");
  ionic.validate();
}

MicroSolver::MicroSolver(MicroConfig config) : config_(std::move(config)) {
  config_.validate();
  const int nc = config_.cell_resolution;
  const int cells = config_.cells_per_side();
  n_ = config_.resolution();
  const double h = 1.0 / n_;

  const GridSpec cell_grid = GridSpec::cube(2, nc);
  const UnitCellGeometry cell = build_cell(cell_grid, config_.cell_shape, Level::Meso);
  require(cell.has_label(kIntra), ErrorKind::InvalidArgument, "micro cell has no intracellular voxels");
  const GridSpec hole_grid = GridSpec::cube(2, 4);

  labels_.resize(static_cast<std::size_t>(n_) * n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      std::uint8_t l = cell.label(cell_grid.ravel({i % nc, j % nc, 0}));
      if (l == kIntra && config_.hole_shape) {
        const Point z{frac(((i % nc) + 0.5) / nc * config_.hole_cells),
                      frac(((j % nc) + 0.5) / nc * config_.hole_cells), 0.0};
        if (config_.hole_shape->signed_distance(hole_grid, z) < 0.0) l = kHole;
      }
      labels_[static_cast<std::size_t>(i) * n_ + j] = l;
    }
  (void)cells;

  const int np = n_ + 1;
  const std::size_t nodes = static_cast<std::size_t>(np) * np;
  auto node_of = [np](int i, int j) { return static_cast<std::size_t>(i) * np + j; };
  auto voxel_corners = [&](int i, int j) {
    return std::array<std::size_t, 4>{node_of(i, j), node_of(i + 1, j), node_of(i, j + 1), node_of(i + 1, j + 1)};
  };

  std::vector<char> touches_i(nodes, 0), touches_e(nodes, 0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const auto l = labels_[static_cast<std::size_t>(i) * n_ + j];
      for (auto c : voxel_corners(i, j)) {
        if (l == kIntra) touches_i[c] = 1;
        if (l == kExtra) touches_e[c] = 1;
      }
    }
  intra_of_node_.assign(nodes, -1);
  extra_of_node_.assign(nodes, -1);
  for (std::size_t p = 0; p < nodes; ++p) {
    if (touches_i[p]) {
      intra_of_node_[p] = static_cast<int>(intra_nodes_.size());
      intra_nodes_.push_back(p);
    }
    if (touches_e[p]) {
      extra_of_node_[p] = static_cast<int>(extra_nodes_.size());
      extra_nodes_.push_back(p);
    }
  }

  // Membrane weights from the staircase edges.
  std::vector<double> w_node(nodes, 0.0);
  auto is_pair = [](std::uint8_t a, std::uint8_t b) {
    return (a == kIntra && b == kExtra) || (a == kExtra && b == kIntra);
  };
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const auto l = labels_[static_cast<std::size_t>(i) * n_ + j];
      if (i + 1 < n_ && is_pair(l, labels_[static_cast<std::size_t>(i + 1) * n_ + j])) {
        w_node[node_of(i + 1, j)] += 0.5 * h;
        w_node[node_of(i + 1, j + 1)] += 0.5 * h;
      }
      if (j + 1 < n_ && is_pair(l, labels_[static_cast<std::size_t>(i) * n_ + j + 1])) {
        w_node[node_of(i, j + 1)] += 0.5 * h;
        w_node[node_of(i + 1, j + 1)] += 0.5 * h;
      }
    }
  std::vector<double> weights;
  for (std::size_t p = 0; p < nodes; ++p) {
    if (w_node[p] <= 0.0) continue;
    membrane_.push_back({intra_of_node_[p], extra_of_node_[p]});
    membrane_positions_.push_back({static_cast<double>(p / np) * h, static_cast<double>(p % np) * h, 0.0});
    weights.push_back(w_node[p]);
  }
  weights_ = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  require(!membrane_.empty(), ErrorKind::EmptyInterface, "micro domain has no membrane");

  const BoxElement el(2, Point{h, h, 1.0});
  const auto ki = el.stiffness(config_.m_i);
  const auto ke = el.stiffness(config_.m_e);
  const Eigen::Index ni = intra_dofs(), ne = extra_dofs();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n_) * n_ * 16 + 4 * membrane_.size());
  extra_mass_ = Eigen::VectorXd::Zero(ne);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const auto l = labels_[static_cast<std::size_t>(i) * n_ + j];
      if (l == kHole) continue;
      const auto corners = voxel_corners(i, j);
      for (int a = 0; a < 4; ++a) {
        if (l == kExtra) extra_mass_(extra_of_node_[corners[a]]) += 0.25 * h * h;
        for (int b = 0; b < 4; ++b) {
          if (l == kIntra)
            trip.emplace_back(intra_of_node_[corners[a]], intra_of_node_[corners[b]], ki(a, b));
          else
            trip.emplace_back(ni + extra_of_node_[corners[a]], ni + extra_of_node_[corners[b]], ke(a, b));
        }
      }
    }
  for (std::size_t k = 0; k < membrane_.size(); ++k) {
    const double c = config_.epsilon * weights_(static_cast<Eigen::Index>(k)) / config_.dt;
    const Eigen::Index a = membrane_[k].intra, b = ni + membrane_[k].extra;
    trip.emplace_back(a, a, c);
    trip.emplace_back(b, b, c);
    trip.emplace_back(a, b, -c);
    trip.emplace_back(b, a, -c);
  }
  system_.resize(ni + ne, ni + ne);
  system_.setFromTriplets(trip.begin(), trip.end());
  system_.makeCompressed();
  kernel_weights_ = Eigen::VectorXd::Zero(ni + ne);
  kernel_weights_.tail(ne) = extra_mass_;
}

Eigen::VectorXd MicroSolver::applied_current(double t) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(membrane_nodes());
  for (const auto& s : config_.stimuli) {
    if (!s.active(t)) continue;
    for (Eigen::Index k = 0; k < membrane_nodes(); ++k)
      if (s.region.contains(membrane_positions_[static_cast<std::size_t>(k)], 2)) out(k) += s.amplitude;
  }
  return out;
}

MicroState MicroSolver::initial_state() const {
  MicroState s;
  s.u_i = Eigen::VectorXd::Zero(intra_dofs());
  s.u_e = Eigen::VectorXd::Zero(extra_dofs());
  s.v = Eigen::VectorXd::Constant(membrane_nodes(), config_.v0);
  s.w = Eigen::VectorXd::Constant(membrane_nodes(), config_.w0);
  for (const auto& p : config_.patches)
    for (Eigen::Index k = 0; k < membrane_nodes(); ++k)
      if (p.region.contains(membrane_positions_[static_cast<std::size_t>(k)], 2)) {
        s.v(k) = p.v;
        s.w(k) = p.w;
      }
  return s;
}

void MicroSolver::step(MicroState& state) const {
  const double dt = config_.dt, eps = config_.epsilon;
  const auto& p = config_.ionic;
  const Eigen::Index ni = intra_dofs(), ne = extra_dofs();
  const Eigen::VectorXd iapp = applied_current(state.t);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(ni + ne);
  for (std::size_t k = 0; k < membrane_.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double r =
        weights_(kk) * eps * (state.v(kk) / dt - (i_ion(state.v(kk), state.w(kk), p) - iapp(kk)));
    b(membrane_[k].intra) += r;
    b(ni + membrane_[k].extra) -= r;
  }
  Eigen::VectorXd x(ni + ne);
  x << state.u_i, state.u_e;
  // Increment form.
  const Eigen::VectorXd residual = b - system_ * x;
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(ni + ne);
  PcgOptions opts;
  opts.tolerance = config_.tolerance;
  opts.kernel_weights = kernel_weights_;
  pcg_solve(system_, residual, delta, opts);
  x += delta;
  project_zero_mean(x, kernel_weights_);

  state.u_i = x.head(ni);
  state.u_e = x.tail(ne);
  const Eigen::VectorXd v_next = membrane_trace(state);
  for (Eigen::Index k = 0; k < membrane_nodes(); ++k) state.w(k) += dt * h_gate(v_next(k), state.w(k), p);
  state.v = v_next;
  require(state.v.allFinite() && state.w.allFinite() && x.allFinite(), ErrorKind::NonFinite,
          "non-finite micro state at t = " + std::to_string(state.t + dt));
  state.t += dt;
  ++state.step;
}

Eigen::VectorXd MicroSolver::membrane_trace(const MicroState& state) const {
  Eigen::VectorXd v(membrane_nodes());
  for (std::size_t k = 0; k < membrane_.size(); ++k)
    v(static_cast<Eigen::Index>(k)) = state.u_i(membrane_[k].intra) - state.u_e(membrane_[k].extra);
  return v;
}

double MicroSolver::extra_mean(const MicroState& state) const { return extra_mass_.dot(state.u_e) / extra_mass_.sum(); }

double MicroSolver::current_balance(const MicroState& before, const MicroState& after) const {
  const auto& p = config_.ionic;
  const Eigen::VectorXd iapp = applied_current(before.t);
  double sum = 0.0, mag = 0.0;
  for (Eigen::Index k = 0; k < membrane_nodes(); ++k) {
    const double im = weights_(k) * config_.epsilon *
                      ((after.v(k) - before.v(k)) / config_.dt + i_ion(before.v(k), before.w(k), p) - iapp(k));
    sum += im;
    mag += std::abs(im);
  }
  return mag > 0.0 ? std::abs(sum) / mag : 0.0;
}

MicroRun run_micro(const MicroConfig& config, const MicroSink& sink) {
  const MicroSolver solver(config);
  MicroRun run;
  run.positions = solver.membrane_positions();
  run.weights = solver.membrane_weights();
  MicroState state = solver.initial_state();
  run.snapshots.push_back({state.t, state.v});
  if (sink) sink(solver, state);
  const long steps = static_cast<long>(std::llround(config.t_final / config.dt));
  for (long k = 0; k < steps; ++k) {
    const MicroState before = state;
    solver.step(state);
    run.max_abs_mean_ue = std::max(run.max_abs_mean_ue, std::abs(solver.extra_mean(state)));
    run.max_current_balance = std::max(run.max_current_balance, solver.current_balance(before, state));
    run.max_trace_defect =
        std::max(run.max_trace_defect, (solver.membrane_trace(state) - state.v).cwiseAbs().maxCoeff());
    if (config.snapshot_every > 0 && (k + 1) % config.snapshot_every == 0) {
      run.snapshots.push_back({state.t, state.v});
      if (sink) sink(solver, state);
    }
  }
  run.steps = steps;
  run.final_state = std::move(state);
  return run;
}

double interpolate(const MacroGrid& grid, const Eigen::VectorXd& field, const Point& x) {
  Index3 base{0, 0, 0};
  Point t{0.0, 0.0, 0.0};
  for (int a = 0; a < grid.dim; ++a) {
    const double s = std::clamp(x[a] / grid.spacing(a), 0.0, static_cast<double>(grid.cells[a]));
    base[a] = std::min(static_cast<int>(std::floor(s)), grid.cells[a] - 1);
    t[a] = s - base[a];
  }
  double value = 0.0;
  for (int c = 0; c < (1 << grid.dim); ++c) {
    Index3 idx = base;
    double weight = 1.0;
    for (int a = 0; a < grid.dim; ++a) {
      const int bit = (c >> a) & 1;
      idx[a] += bit;
      weight *= bit ? t[a] : 1.0 - t[a];
    }
    value += weight * field(static_cast<Eigen::Index>(grid.ravel(idx)));
  }
  return value;
}

ComparisonReport compare_to_macro(const MicroTrajectory& micro, const MacroTrajectory& macro) {
  require(micro.snapshots.size() == macro.snapshots.size() && !micro.snapshots.empty(), ErrorKind::GridMismatch,
          "micro and macro runs have different numbers of samples");
  require(static_cast<std::size_t>(micro.weights.size()) == micro.positions.size(), ErrorKind::GridMismatch,
          "micro membrane weights do not match positions");
  for (const auto& x : micro.positions)
    for (int a = 0; a < macro.grid.dim; ++a)
      require(x[a] >= -1e-12 && x[a] <= macro.grid.lengths[a] + 1e-12, ErrorKind::GridMismatch,
              "micro membrane lies outside the macro domain");
  const auto n_macro = static_cast<Eigen::Index>(macro.grid.node_count());
  ComparisonReport rep;
  double sq = 0.0;
  const double total_weight = micro.weights.sum();
  for (std::size_t s = 0; s < micro.snapshots.size(); ++s) {
    const auto& a = micro.snapshots[s];
    const auto& b = macro.snapshots[s];
    require(std::abs(a.t - b.t) <= 1e-9 * std::max(1.0, std::abs(a.t)), ErrorKind::GridMismatch,
            "sample times differ: " + std::to_string(a.t) + " vs " + std::to_string(b.t));
    require(b.v.size() == n_macro, ErrorKind::GridMismatch, "macro snapshot does not match its grid");
    require(static_cast<std::size_t>(a.v.size()) == micro.positions.size(), ErrorKind::GridMismatch,
            "micro snapshot does not match its membrane");
    double e = 0.0;
    for (std::size_t k = 0; k < micro.positions.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      const double d = a.v(kk) - interpolate(macro.grid, b.v, micro.positions[k]);
      e += micro.weights(kk) * d * d;
    }
    const double err = std::sqrt(e / total_weight);
    rep.times.push_back(a.t);
    rep.errors.push_back(err);
    sq += err * err;
    rep.max = std::max(rep.max, err);
  }
  rep.rms = std::sqrt(sq / static_cast<double>(rep.errors.size()));
  return rep;
}

}  // namespace trihom
