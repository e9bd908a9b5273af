#pragma once

#include <array>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "trihom/ionic.hpp"
#include "trihom/pcg.hpp"
#include "trihom/types.hpp"

namespace trihom {

/// Node grid on the box [0, L_1] x ... x [0, L_d] with `cells[a]` elements per axis.
struct MacroGrid {
  int dim = 2;
  Index3 cells{1, 1, 1};
  Point lengths{1.0, 1.0, 1.0};

  int nodes(int axis) const { return axis < dim ? cells[axis] + 1 : 1; }
  std::size_t node_count() const;
  double spacing(int axis) const { return lengths[axis] / cells[axis]; }
  std::size_t ravel(const Index3& idx) const {
    return (static_cast<std::size_t>(idx[0]) * nodes(1) + idx[1]) * nodes(2) + idx[2];
  }
  Index3 unravel(std::size_t node) const;
  Point position(std::size_t node) const;
};

enum class RegionShape { Ellipse, Box };

/// Axis-aligned ellipse/ellipsoid or box given by centre and semi-axes.
struct Region {
  RegionShape shape = RegionShape::Box;
  Point center{};
  Point semi_axes{};

  bool contains(const Point& x, int dim) const;
};

struct Stimulus {
  Region region;
  double amplitude = 0.0;
  double t_on = 0.0;
  double t_off = 0.0;

  bool active(double t) const { return t >= t_on && t < t_off; }
};

/// Initial value assigned on a region, on top of the uniform background.
struct InitialPatch {
  Region region;
  double v = 0.0;
  double w = 0.0;
};

struct MacroConfig {
  MacroGrid grid;
  double dt = 0.01;
  double t_final = 1.0;
  Matrix m_i = Matrix::Identity(2, 2);  // two-level intracellular tensor
  Matrix m_e = Matrix::Identity(2, 2);  // extracellular tensor
  double mu_m = 1.0;
  FhnParams ionic;
  std::vector<Stimulus> stimuli;
  double v0 = 0.0;
  double w0 = 0.0;
  std::vector<InitialPatch> patches;
  double elliptic_tolerance = 1e-8;
  double parabolic_tolerance = 1e-10;
  int snapshot_every = 0;  // 0: no snapshots
  double activation_threshold = 0.5;
  int min_cells = 16;

  /// Throws InvalidArgument (ConfigError-level problems) on invalid input.
  void validate() const;
};

struct MacroState {
  Eigen::VectorXd u_e;
  Eigen::VectorXd v;
  Eigen::VectorXd w;
  double t = 0.0;
  long step = 0;

  Eigen::VectorXd u_i() const { return v + u_e; }
};

/// Multilinear finite elements with lumped mass on the node grid; no-flux
/// boundaries are natural. Assembled operators are symmetric with zero row sums.
class MacroSolver {
 public:
  explicit MacroSolver(MacroConfig config);

  const MacroConfig& config() const { return config_; }
  const MacroGrid& grid() const { return config_.grid; }
  const Eigen::VectorXd& mass() const { return mass_; }
  const SparseMatrix& stiffness_intra() const { return k_i_; }
  const SparseMatrix& stiffness_sum() const { return k_sum_; }

  MacroState initial_state() const;
  /// Applied current at every node at time t.
  Eigen::VectorXd applied_current(double t) const;

  /// Solves (K_i + K_e) u_e = -K_i v for the zero-mean u_e.
  Eigen::VectorXd elliptic_solve(const MacroState& state) const;
  /// Zero-mean solution of (K_i + K_e) u = rhs. Throws Incompatible if
  /// |sum rhs| exceeds 1e-10 of sum |rhs|, NoConvergence on failure.
  Eigen::VectorXd solve_sum_operator(const Eigen::VectorXd& rhs) const;
  /// One step: elliptic solve, implicit diffusion with explicit reaction for
  /// v, forward gate update, then mean removal of u_e. Throws NonFinite.
  void step(MacroState& state) const;

  double weighted_mean(const Eigen::VectorXd& x) const;
  /// |sum (K_sum u_e + K_i v)| relative to the magnitude of the summed terms.
  double current_balance(const MacroState& state) const;

 private:
  Eigen::VectorXd solve_sum(const Eigen::VectorXd& rhs, Eigen::VectorXd guess, double term_scale) const;

  MacroConfig config_;
  Eigen::VectorXd mass_;
  SparseMatrix k_i_;
  SparseMatrix k_sum_;
  SparseMatrix parabolic_;
};

struct MacroSummaryRow {
  double t = 0.0;
  double v_min = 0.0;
  double v_max = 0.0;
  double w_min = 0.0;
  double w_max = 0.0;
  double ue_mean = 0.0;
  double ue_min = 0.0;
  double ue_max = 0.0;
  double activated_fraction = 0.0;
};

struct MacroRun {
  MacroState final_state;
  std::vector<MacroSummaryRow> summary;
  /// First upward crossing of the activation threshold, linearly interpolated; NaN if never.
  std::vector<double> activation;
  /// Plane-wave speed along each axis from a least-squares fit of the
  /// activation times on the centre line (25%..75% of the length); NaN if undetermined.
  std::array<double, kMaxDim> velocity{std::numeric_limits<double>::quiet_NaN(),
                                       std::numeric_limits<double>::quiet_NaN(),
                                       std::numeric_limits<double>::quiet_NaN()};
  double max_abs_mean_ue = 0.0;
  double max_current_balance = 0.0;
  long steps = 0;
};

using SnapshotSink = std::function<void(const MacroState&)>;

/// Steps until t_final (t_final = 0 echoes the initial state). The sink, if
/// given, receives the initial state and every `snapshot_every`-th state.
MacroRun run_macro(const MacroConfig& config, const SnapshotSink& sink = {});

/// Activation-time fit along `axis` on the centre line of the other axes.
double conduction_velocity(const MacroGrid& grid, const std::vector<double>& activation, int axis);

}  // namespace trihom
