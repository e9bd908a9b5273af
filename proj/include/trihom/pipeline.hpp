#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "trihom/config.hpp"
#include "trihom/error.hpp"
#include "trihom/microref.hpp"
#include "trihom/tensors.hpp"

namespace trihom {

/// Failure of one pipeline stage; keeps the kind of the underlying error.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// The sweep decreased monotonically but did not meet a check, or did not decrease.
class ValidationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Geometries {
  std::shared_ptr<const UnitCellGeometry> meso;
  std::shared_ptr<const UnitCellGeometry> micro;  // null without [geometry.micro]
};

Geometries build_geometries(const RunConfig& config);

/// Intracellular coefficient on the meso grid, including the optional laminate scaling.
ConductivityField intracellular_field(const RunConfig& config, const UnitCellGeometry& meso);

struct TensorRow {
  HomogenizedTensor tensor;
  std::string role;  // extra, intra, intra_micro_<k>
  AuditReport audit;
};

struct TensorStage {
  Geometries geometry;
  std::vector<TensorRow> rows;  // corrected and volume-average rows
  std::optional<HomogenizedTensor> extra, intra, extra_average, intra_average;
  double mu_m = 0.0;
  double mu_m_staircase = 0.0;
  /// Corrector fields by name, for export.
  std::vector<std::pair<std::string, CorrectorField>> correctors;
  /// Largest |sum b| / ||b|| over all assembled cell problems (0 when b = 0).
  double max_compatibility = 0.0;
};

TensorStage compute_tensors(const RunConfig& config, const Geometries& geometry);

/// CSV with header
/// role,level,corrected,dim,m11,m12,m13,m21,...,m33,eig1,eig2,eig3,symmetry_defect,
/// mu_m,max_residual,tolerance,micro_solves,blocked,bounds
/// Absent entries are empty; numbers use 17 significant digits.
void write_tensors_csv(std::ostream& out, const TensorStage& stage);

/// Leading dim x dim block.
Matrix leading_block(const Matrix& m, int dim);

/// Fills tensors, mu_m and ionic parameters of the [macro] run.
MacroConfig resolve_macro(const RunConfig& config, const TensorStage* tensors);

/// Writes snapshots v_<step>.fld, ue_<step>.fld, w_<step>.fld, summary.csv and
/// activation.fld into `dir`.
MacroRun write_macro_run(const MacroConfig& config, const std::filesystem::path& dir);

MicroConfig micro_config(const RunConfig& config, double epsilon);
/// membrane.csv (x,y,weight) and membrane_v_<sample>.fld per snapshot.
MicroRun write_micro_run(const MicroConfig& config, const std::filesystem::path& dir);

MicroTrajectory read_micro_dir(const std::filesystem::path& dir);
MacroTrajectory read_macro_dir(const std::filesystem::path& dir);

struct ValidationRow {
  double epsilon = 0.0;
  std::string tensors;  // corrected | volume_average | given
  ComparisonReport report;
};

/// report.csv: epsilon,tensors,rms,max,samples,errors (errors ';'-separated).
void write_report_csv(std::ostream& out, const std::vector<ValidationRow>& rows);
/// Errors of the `corrected` rows must decrease strictly with epsilon. If
/// volume-average rows are present, the corrected error must be smaller at the
/// smallest epsilon. Returns an empty string when every check passes.
std::string validation_verdict(const std::vector<ValidationRow>& rows);

/// Geometry, correctors, tensors, macro run and validation sweep into
/// config.output.dir (or `out` if given), plus manifest.json. Throws
/// StageError or ValidationFailure.
nlohmann::json run_pipeline(const RunConfig& config, const std::optional<std::filesystem::path>& out = std::nullopt);

}  // namespace trihom
