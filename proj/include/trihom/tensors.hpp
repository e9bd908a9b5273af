#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trihom/cellsolver.hpp"
#include "trihom/geometry.hpp"
#include "trihom/types.hpp"

namespace trihom {

enum class TensorLevel { ExtraMeso, IntraMicro, IntraTwoLevel };

std::string_view tensor_level_name(TensorLevel level);

struct TensorProvenance {
  std::string geometry;
  bool corrected = true;
  double active_volume = 0.0;
  double normalization_volume = 0.0;
  double tolerance = 0.0;
  std::vector<double> residuals;
  /// max|T - T^T| / max|T| of the raw tensor, before symmetrization.
  double asymmetry = 0.0;
  std::array<bool, kMaxDim> blocked{false, false, false};
  /// Number of distinct micro cell problems solved (three-scale pass only).
  std::size_t micro_solves = 0;
};

struct HomogenizedTensor {
  Matrix entries;
  TensorLevel level = TensorLevel::ExtraMeso;
  TensorProvenance provenance;

  int dim() const { return static_cast<int>(entries.rows()); }
};

struct HomogenizeOptions {
  double tolerance = 1e-10;
  /// Accept active subdomains that do not percolate along every axis. The
  /// blocked rows and columns of the tensor are set to zero.
  bool allow_blocked = false;
};

/// Raw (unsymmetrized) tensor
///   T(p,k) = (1/volume) sum over active voxels of int M(p,k) + M(p,q) d_q chi^k.
Matrix integrate_tensor(const CellDiscretization& disc, const std::vector<CorrectorField>& correctors,
                        double normalization_volume);

/// Normalized by |Y|, integrated over the active subdomain of `disc`.
HomogenizedTensor homogenize_extracellular(const CellDiscretization& disc,
                                           const std::vector<CorrectorField>& correctors,
                                           const HomogenizeOptions& options = {});
/// Normalized by |Z| (the whole micro cell), integrated over the cytosol.
HomogenizedTensor homogenize_micro(const CellDiscretization& disc, const std::vector<CorrectorField>& correctors,
                                   const HomogenizeOptions& options = {});
/// `disc` carries the z-homogenized coefficient field on the intracellular
/// meso subdomain. Normalized by |Y|.
HomogenizedTensor homogenize_meso(const CellDiscretization& disc, const std::vector<CorrectorField>& correctors,
                                  const HomogenizeOptions& options = {});

/// Assembles the discretization, solves the d correctors and homogenizes.
struct CellHomogenization {
  std::shared_ptr<const CellDiscretization> discretization;
  std::vector<CorrectorField> correctors;
  HomogenizedTensor tensor;
};
CellHomogenization homogenize_cell(std::shared_ptr<const UnitCellGeometry> geometry, ActiveLabels active,
                                   std::shared_ptr<const ConductivityField> coefficient, TensorLevel level,
                                   const HomogenizeOptions& options = {});

/// Plain volume average over the active subdomain (correctors set to zero),
/// with the same normalization as the corrected tensor of that level.
HomogenizedTensor volume_average(const UnitCellGeometry& geometry, ActiveLabels active,
                                 const ConductivityField& coefficient, TensorLevel level);

struct ThreeScaleResult {
  HomogenizedTensor tensor;  // two-level intracellular tensor
  /// z-homogenized tensors, one per distinct intracellular coefficient value.
  std::vector<HomogenizedTensor> micro_tensors;
  std::shared_ptr<const ConductivityField> micro_field;  // z-homogenized coefficient on the meso grid
  std::vector<std::vector<CorrectorField>> micro_correctors;
  CellHomogenization meso;
};

/// Intracellular pass: for every distinct value of the intracellular
/// coefficient on the active meso voxels, solve the micro correctors on the
/// cytosol of `micro` with that value frozen; then solve the meso correctors
/// with the resulting field and integrate. Distinct values are solved in
/// parallel.
ThreeScaleResult homogenize_intracellular(std::shared_ptr<const UnitCellGeometry> meso, ActiveLabels meso_active,
                                          std::shared_ptr<const UnitCellGeometry> micro,
                                          const ConductivityField& intracellular,
                                          const HomogenizeOptions& options = {});

/// Scalar isotropic two-phase description for the Voigt-Reuss check.
struct TwoPhaseScalar {
  double fraction_a = 0.5;
  double sigma_a = 1.0;
  double fraction_b = 0.5;
  double sigma_b = 1.0;

  double harmonic() const;
  double arithmetic() const;
};

struct AuditReport {
  double symmetry_defect = 0.0;  // relative to max|T|
  SmallVector eigenvalues;       // ascending
  bool positive_definite = false;
  bool bounds_checked = false;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  bool bounds_hold = true;
};

/// Bounds are tested with relative slack `slack`.
AuditReport audit_tensor(const Matrix& entries, const std::optional<TwoPhaseScalar>& phases = std::nullopt,
                         double slack = 1e-8);
/// Uses the larger of the recorded pre-symmetrization defect and the defect of the stored entries.
AuditReport audit_tensor(const HomogenizedTensor& tensor, const std::optional<TwoPhaseScalar>& phases = std::nullopt,
                         double slack = 1e-8);

}  // namespace trihom
