#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "trihom/fem.hpp"
#include "trihom/geometry.hpp"
#include "trihom/pcg.hpp"
#include "trihom/types.hpp"

namespace trihom {

struct EllipticityBounds {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Piecewise-constant conductivity, one symmetric d x d matrix per voxel.
/// Stored as a palette of distinct matrices plus a per-voxel palette index.
class ConductivityField {
 public:
  ConductivityField(const GridSpec& grid, std::vector<Matrix> palette, std::vector<std::uint32_t> index);

  static ConductivityField uniform(const GridSpec& grid, const Matrix& value);
  /// `by_label[l]` is used on voxels carrying label l.
  static ConductivityField per_label(const UnitCellGeometry& geom, const std::vector<Matrix>& by_label);

  const GridSpec& grid() const { return grid_; }
  const Matrix& at(std::size_t voxel) const { return palette_[index_[voxel]]; }
  std::uint32_t palette_index(std::size_t voxel) const { return index_[voxel]; }
  const std::vector<Matrix>& palette() const { return palette_; }

  ConductivityField scaled(double factor) const;

  /// Checks symmetry and positive definiteness of every matrix used on the
  /// active labels; returns the extreme eigenvalues. Throws InvalidArgument.
  EllipticityBounds audit(const UnitCellGeometry& geom, ActiveLabels active) const;

 private:
  GridSpec grid_;
  std::vector<Matrix> palette_;
  std::vector<std::uint32_t> index_;
};

/// One periodic corrector problem: find a zero-mean periodic chi on the
/// active voxels with  int M (grad chi + e_q) . grad v = 0  for all periodic v.
struct CellProblem {
  std::shared_ptr<const UnitCellGeometry> geometry;
  ActiveLabels active = ActiveLabels::only(kMatrixLabel);
  std::shared_ptr<const ConductivityField> coefficient;
  int direction = 0;

  void validate() const;
};

/// Multilinear nodal discretisation restricted to the active voxels, with
/// periodic node identification. Inactive voxels carry no unknowns.
class CellDiscretization {
 public:
  CellDiscretization(std::shared_ptr<const UnitCellGeometry> geometry, ActiveLabels active,
                     std::shared_ptr<const ConductivityField> coefficient);

  const UnitCellGeometry& geometry() const { return *geometry_; }
  const GridSpec& grid() const { return geometry_->grid(); }
  ActiveLabels active() const { return active_; }
  const ConductivityField& coefficient() const { return *coefficient_; }

  const SparseMatrix& matrix() const { return matrix_; }
  Eigen::Index dofs() const { return static_cast<Eigen::Index>(node_of_dof_.size()); }
  /// -1 for nodes that touch no active voxel.
  int dof_of_node(std::size_t node) const { return dof_of_node_[node]; }
  std::size_t node_of_dof(Eigen::Index dof) const { return node_of_dof_[static_cast<std::size_t>(dof)]; }
  /// Lumped volume weights: int phi_i over the active subdomain.
  const Eigen::VectorXd& mass_weights() const { return mass_; }
  const Connectivity& connectivity() const { return connectivity_; }
  double active_volume() const { return active_volume_; }

  /// b_i = - int M e_q . grad phi_i.
  Eigen::VectorXd rhs(int direction) const;

  /// Global node indices of the corners of a voxel, in BoxElement order.
  std::array<std::size_t, 8> voxel_nodes(std::size_t voxel) const;
  const BoxElement& element() const { return element_; }

 private:
  std::shared_ptr<const UnitCellGeometry> geometry_;
  ActiveLabels active_;
  std::shared_ptr<const ConductivityField> coefficient_;
  BoxElement element_;
  std::vector<int> dof_of_node_;
  std::vector<std::size_t> node_of_dof_;
  Eigen::VectorXd mass_;
  SparseMatrix matrix_;
  Connectivity connectivity_;
  double active_volume_ = 0.0;
};

struct LinearSystem {
  std::shared_ptr<const CellDiscretization> discretization;
  Eigen::VectorXd rhs;
  int direction = 0;
};

/// Zero-mean periodic nodal field on the full periodic node grid. Nodes
/// outside the active subdomain hold 0 and have zero weight.
struct CorrectorField {
  GridSpec grid;
  ActiveLabels active;
  int direction = 0;
  std::vector<double> values;
  std::vector<double> weights;
  double residual = 0.0;
  double tolerance = 0.0;
  int iterations = 0;

  double mean() const;
  double max_abs() const;
};

LinearSystem assemble(const CellProblem& problem);
/// |sum_i b_i|, the discrete form of (F, 1).
double check_compatibility(const LinearSystem& system);
CorrectorField solve_system(const LinearSystem& system, double tol = 1e-10);
CorrectorField solve_corrector(const CellProblem& problem, double tol = 1e-10);
/// All d directions on one shared matrix; the solves are independent and run
/// on up to thread_limit() workers.
std::vector<CorrectorField> solve_all_correctors(std::shared_ptr<const UnitCellGeometry> geometry,
                                                 ActiveLabels active,
                                                 std::shared_ptr<const ConductivityField> coefficient,
                                                 double tol = 1e-10);
std::vector<CorrectorField> solve_all_correctors(const std::shared_ptr<const CellDiscretization>& disc,
                                                 double tol = 1e-10);

/// Energy  int M (grad psi + e_q) . (grad psi + e_q)  for a nodal field psi.
double corrector_energy(const CellDiscretization& disc, const std::vector<double>& psi, int direction);

/// Field file (see field_io.hpp) with float32 nodal values on the periodic node grid.
void write_corrector(std::ostream& out, const CorrectorField& field, std::string_view name);

}  // namespace trihom
