#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "trihom/geometry.hpp"
#include "trihom/ionic.hpp"
#include "trihom/macrosolver.hpp"
#include "trihom/pcg.hpp"
#include "trihom/types.hpp"

namespace trihom {

/// Extra voxel label in the micro-resolved domain: mitochondria holes in the
/// intracellular medium. They carry no unknowns.
inline constexpr std::uint8_t kHole = 2;

/// Micro-resolved bidomain problem on the unit square tiled by 1/epsilon
/// copies of the meso cell (labels EXTRA / INTRA of `cell_shape`).
struct MicroConfig {
  double epsilon = 0.25;
  int cell_resolution = 32;  // voxels per meso cell side
  ShapeSpec cell_shape;
  /// Optional holes: `hole_shape` on a micro cell repeated `hole_cells`
  /// times per meso cell side, removed from the intracellular voxels.
  std::optional<ShapeSpec> hole_shape;
  int hole_cells = 2;
  Matrix m_i = Matrix::Identity(2, 2);
  Matrix m_e = Matrix::Identity(2, 2);
  FhnParams ionic;
  double dt = 0.01;
  double t_final = 1.0;
  std::vector<Stimulus> stimuli;
  double v0 = 0.0;
  double w0 = 0.0;
  std::vector<InitialPatch> patches;
  double tolerance = 1e-12;
  int snapshot_every = 0;
  int max_resolution = 512;

  int cells_per_side() const;
  int resolution() const { return cells_per_side() * cell_resolution; }
  /// epsilon must be 1/m for an integer 1 <= m <= 8; total grid within max_resolution.
  void validate() const;
};

struct MicroState {
  Eigen::VectorXd u_i;  // intracellular nodes
  Eigen::VectorXd u_e;  // extracellular nodes
  Eigen::VectorXd v;    // membrane nodes
  Eigen::VectorXd w;    // membrane nodes
  double t = 0.0;
  long step = 0;
};

/// Nodal multilinear discretization of both media on the (N+1)^2 node grid.
/// Membrane nodes touch voxels of both media; each staircase edge between an
/// intracellular and an extracellular voxel gives half its length to each
/// endpoint. One step solves the coupled symmetric system for (u_i, u_e) with
/// the membrane current eps (dv/dt + I_ion - I_app) implicit in v.
class MicroSolver {
 public:
  explicit MicroSolver(MicroConfig config);

  const MicroConfig& config() const { return config_; }
  int resolution() const { return n_; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  Eigen::Index intra_dofs() const { return static_cast<Eigen::Index>(intra_nodes_.size()); }
  Eigen::Index extra_dofs() const { return static_cast<Eigen::Index>(extra_nodes_.size()); }
  Eigen::Index membrane_nodes() const { return static_cast<Eigen::Index>(membrane_.size()); }
  const std::vector<Point>& membrane_positions() const { return membrane_positions_; }
  const Eigen::VectorXd& membrane_weights() const { return weights_; }
  double membrane_length() const { return weights_.sum(); }

  MicroState initial_state() const;
  void step(MicroState& state) const;

  /// Mean of u_e over the extracellular medium (lumped).
  double extra_mean(const MicroState& state) const;
  /// |sum_k W_k I_m,k| / sum_k |W_k I_m,k| for the step from `before` to `after`.
  double current_balance(const MicroState& before, const MicroState& after) const;
  /// u_i - u_e on the membrane nodes.
  Eigen::VectorXd membrane_trace(const MicroState& state) const;

 private:
  Eigen::VectorXd applied_current(double t) const;

  MicroConfig config_;
  int n_ = 0;
  std::vector<std::uint8_t> labels_;
  std::vector<std::size_t> intra_nodes_, extra_nodes_;
  std::vector<int> intra_of_node_, extra_of_node_;
  struct MembraneNode {
    Eigen::Index intra;
    Eigen::Index extra;
  };
  std::vector<MembraneNode> membrane_;
  std::vector<Point> membrane_positions_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd extra_mass_;
  SparseMatrix system_;
  Eigen::VectorXd kernel_weights_;
};

struct MembraneSnapshot {
  double t = 0.0;
  Eigen::VectorXd v;
};

struct MicroRun {
  MicroState final_state;
  std::vector<MembraneSnapshot> snapshots;
  std::vector<Point> positions;
  Eigen::VectorXd weights;
  double max_abs_mean_ue = 0.0;
  double max_current_balance = 0.0;
  double max_trace_defect = 0.0;
  long steps = 0;
};

using MicroSink = std::function<void(const MicroSolver&, const MicroState&)>;

/// Snapshots (initial state and every `snapshot_every` steps) are kept in the
/// result and passed to the sink.
MicroRun run_micro(const MicroConfig& config, const MicroSink& sink = {});

/// Sampled membrane potential of a micro run.
struct MicroTrajectory {
  std::vector<Point> positions;
  Eigen::VectorXd weights;
  std::vector<MembraneSnapshot> snapshots;
};

/// Nodal snapshots of a macro run on the same physical domain.
struct MacroTrajectory {
  MacroGrid grid;
  std::vector<MembraneSnapshot> snapshots;  // nodal v on the macro grid
};

struct ComparisonReport {
  std::vector<double> times;
  /// Membrane-weighted L2 error of v_micro against v_macro interpolated to the membrane nodes.
  std::vector<double> errors;
  double rms = 0.0;
  double max = 0.0;
};

/// Throws GridMismatch if the sample times or domains differ.
ComparisonReport compare_to_macro(const MicroTrajectory& micro, const MacroTrajectory& macro);

/// Multilinear interpolation of a nodal macro field; coordinates beyond the grid dimension are ignored.
double interpolate(const MacroGrid& grid, const Eigen::VectorXd& field, const Point& x);

}  // namespace trihom
