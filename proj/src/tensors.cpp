#include "trihom/tensors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "trihom/error.hpp"
#include "trihom/parallel.hpp"

namespace trihom {

namespace {

double relative_asymmetry(const Matrix& t) {
  const double scale = t.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (t - t.transpose()).cwiseAbs().maxCoeff() / scale;
}

void check_correctors(const CellDiscretization& disc, const std::vector<CorrectorField>& correctors,
                      const HomogenizeOptions& options) {
  const GridSpec& g = disc.grid();
  require(correctors.size() == static_cast<std::size_t>(g.dim), ErrorKind::MissingCorrector,
          "expected " + std::to_string(g.dim) + " correctors, got " + std::to_string(correctors.size()));
  for (std::size_t k = 0; k < correctors.size(); ++k) {
    const auto& c = correctors[k];
    require(c.direction == static_cast<int>(k) && c.grid == g && c.active == disc.active() &&
                c.values.size() == g.node_count(),
            ErrorKind::MissingCorrector, "corrector " + std::to_string(k) + " does not belong to this cell problem");
    require(c.residual <= 10.0 * options.tolerance, ErrorKind::ResidualTooHigh,
            "corrector " + std::to_string(k) + " residual " + std::to_string(c.residual) + " exceeds 10 x tolerance");
  }
}

HomogenizedTensor finish(const CellDiscretization& disc, const std::vector<CorrectorField>& correctors,
                         TensorLevel level, double volume, const HomogenizeOptions& options) {
  check_correctors(disc, correctors, options);
  const GridSpec& g = disc.grid();
  const Connectivity& conn = disc.connectivity();
  HomogenizedTensor out;
  for (int a = 0; a < g.dim; ++a) {
    out.provenance.blocked[a] = !conn.percolates[a];
    require(conn.percolates[a] || options.allow_blocked, ErrorKind::DisconnectedSubdomain,
            "active subdomain does not percolate along axis " + std::to_string(a) +
                "; the effective conductivity is zero in that direction");
  }
  const Matrix raw = integrate_tensor(disc, correctors, volume);
  out.entries = 0.5 * (raw + raw.transpose());
  // No current crosses a blocked axis.
  for (int a = 0; a < g.dim; ++a)
    if (out.provenance.blocked[a]) {
      out.entries.row(a).setZero();
      out.entries.col(a).setZero();
    }
  out.level = level;
  out.provenance.geometry = disc.geometry().shape().describe();
  out.provenance.active_volume = disc.active_volume();
  out.provenance.normalization_volume = volume;
  out.provenance.tolerance = options.tolerance;
  out.provenance.asymmetry = relative_asymmetry(raw);
  for (const auto& c : correctors) out.provenance.residuals.push_back(c.residual);
  return out;
}

}  // namespace

std::string_view tensor_level_name(TensorLevel level) {
  switch (level) {
    case TensorLevel::ExtraMeso: return "EXTRA_MESO";
    case TensorLevel::IntraMicro: return "INTRA_MICRO";
    case TensorLevel::IntraTwoLevel: return "INTRA_TWO_LEVEL";
  }
  return "?";
}

Matrix integrate_tensor(const CellDiscretization& disc, const std::vector<CorrectorField>& correctors,
                        double normalization_volume) {
  const GridSpec& g = disc.grid();
  const int d = g.dim;
  const auto& el = disc.element();
  const int corners = el.nodes();
  Matrix t = Matrix::Zero(d, d);
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!disc.active().contains(disc.geometry().label(v))) continue;
    const Matrix& m = disc.coefficient().at(v);
    const auto nodes = disc.voxel_nodes(v);
    for (int k = 0; k < d; ++k) {
      // grad_chi(q) = int d_q chi^k over the voxel
      SmallVector grad = SmallVector::Zero(d);
      if (k < static_cast<int>(correctors.size())) {
        const auto& chi = correctors[static_cast<std::size_t>(k)].values;
        for (int q = 0; q < d; ++q)
          for (int a = 0; a < corners; ++a) grad(q) += el.gradient_integral(q, a) * chi[nodes[a]];
      }
      for (int p = 0; p < d; ++p) t(p, k) += m(p, k) * el.volume() + m.row(p).dot(grad);
    }
  }
  return t / normalization_volume;
}

HomogenizedTensor homogenize_extracellular(const CellDiscretization& disc,
                                           const std::vector<CorrectorField>& correctors,
                                           const HomogenizeOptions& options) {
  return finish(disc, correctors, TensorLevel::ExtraMeso, disc.grid().cell_volume(), options);
}

HomogenizedTensor homogenize_micro(const CellDiscretization& disc, const std::vector<CorrectorField>& correctors,
                                   const HomogenizeOptions& options) {
  return finish(disc, correctors, TensorLevel::IntraMicro, disc.grid().cell_volume(), options);
}

HomogenizedTensor homogenize_meso(const CellDiscretization& disc, const std::vector<CorrectorField>& correctors,
                                  const HomogenizeOptions& options) {
  return finish(disc, correctors, TensorLevel::IntraTwoLevel, disc.grid().cell_volume(), options);
}

CellHomogenization homogenize_cell(std::shared_ptr<const UnitCellGeometry> geometry, ActiveLabels active,
                                   std::shared_ptr<const ConductivityField> coefficient, TensorLevel level,
                                   const HomogenizeOptions& options) {
  CellHomogenization out;
  out.discretization = std::make_shared<const CellDiscretization>(std::move(geometry), active, std::move(coefficient));
  const Connectivity& conn = out.discretization->connectivity();
  for (int a = 0; a < out.discretization->grid().dim; ++a)
    require(conn.percolates[a] || options.allow_blocked, ErrorKind::DisconnectedSubdomain,
            "active subdomain does not percolate along axis " + std::to_string(a) +
                "; the effective conductivity is zero in that direction");
  out.correctors = solve_all_correctors(out.discretization, options.tolerance);
  switch (level) {
    case TensorLevel::ExtraMeso: out.tensor = homogenize_extracellular(*out.discretization, out.correctors, options); break;
    case TensorLevel::IntraMicro: out.tensor = homogenize_micro(*out.discretization, out.correctors, options); break;
    case TensorLevel::IntraTwoLevel: out.tensor = homogenize_meso(*out.discretization, out.correctors, options); break;
  }
  return out;
}

HomogenizedTensor volume_average(const UnitCellGeometry& geometry, ActiveLabels active,
                                 const ConductivityField& coefficient, TensorLevel level) {
  const GridSpec& g = geometry.grid();
  require(coefficient.grid() == g, ErrorKind::GridMismatch, "coefficient and geometry grids differ");
  Matrix t = Matrix::Zero(g.dim, g.dim);
  std::size_t count = 0;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!active.contains(geometry.label(v))) continue;
    t += coefficient.at(v) * g.voxel_volume();
    ++count;
  }
  HomogenizedTensor out;
  out.entries = t / g.cell_volume();
  out.level = level;
  out.provenance.geometry = geometry.shape().describe();
  out.provenance.corrected = false;
  out.provenance.active_volume = static_cast<double>(count) * g.voxel_volume();
  out.provenance.normalization_volume = g.cell_volume();
  return out;
}

ThreeScaleResult homogenize_intracellular(std::shared_ptr<const UnitCellGeometry> meso, ActiveLabels meso_active,
                                          std::shared_ptr<const UnitCellGeometry> micro,
                                          const ConductivityField& intracellular,
                                          const HomogenizeOptions& options) {
  require(meso && micro, ErrorKind::InvalidArgument, "missing cell geometry");
  const GridSpec& gy = meso->grid();
  require(intracellular.grid() == gy, ErrorKind::GridMismatch, "intracellular coefficient is not on the meso grid");
  require(micro->grid().dim == gy.dim, ErrorKind::GridMismatch, "meso and micro cells differ in dimension");

  // Distinct coefficient values on the active meso voxels.
  const auto& palette = intracellular.palette();
  std::vector<int> distinct_of(palette.size(), -1);
  std::vector<Matrix> distinct;
  for (std::size_t v = 0; v < gy.voxel_count(); ++v) {
    if (!meso_active.contains(meso->label(v))) continue;
    const auto pi = intracellular.palette_index(v);
    if (distinct_of[pi] >= 0) continue;
    for (std::size_t j = 0; j < distinct.size(); ++j)
      if (distinct[j] == palette[pi]) distinct_of[pi] = static_cast<int>(j);
    if (distinct_of[pi] < 0) {
      distinct_of[pi] = static_cast<int>(distinct.size());
      distinct.push_back(palette[pi]);
    }
  }
  require(!distinct.empty(), ErrorKind::InvalidArgument, "intracellular meso subdomain is empty");

  ThreeScaleResult out;
  std::vector<CellHomogenization> cells(distinct.size());
  parallel_for(distinct.size(), [&](std::size_t j) {
    auto coeff = std::make_shared<const ConductivityField>(
        ConductivityField::per_label(*micro, {distinct[j], distinct[j]}));
    cells[j] = homogenize_cell(micro, ActiveLabels::only(kCytosol), coeff, TensorLevel::IntraMicro, options);
  });

  std::vector<Matrix> micro_palette;
  for (auto& c : cells) {
    micro_palette.push_back(c.tensor.entries);
    out.micro_tensors.push_back(c.tensor);
    out.micro_correctors.push_back(std::move(c.correctors));
  }
  std::vector<std::uint32_t> index(gy.voxel_count(), 0);
  for (std::size_t v = 0; v < gy.voxel_count(); ++v) {
    const int j = distinct_of[intracellular.palette_index(v)];
    if (j >= 0) index[v] = static_cast<std::uint32_t>(j);
  }
  out.micro_field = std::make_shared<const ConductivityField>(gy, std::move(micro_palette), std::move(index));
  out.meso = homogenize_cell(meso, meso_active, out.micro_field, TensorLevel::IntraTwoLevel, options);
  out.tensor = out.meso.tensor;
  out.tensor.provenance.micro_solves = distinct.size();
  for (const auto& t : out.micro_tensors)
    for (double r : t.provenance.residuals) out.tensor.provenance.residuals.push_back(r);
  return out;
}

double TwoPhaseScalar::harmonic() const {
  return (fraction_a + fraction_b) / (fraction_a / sigma_a + fraction_b / sigma_b);
}

double TwoPhaseScalar::arithmetic() const {
  return (fraction_a * sigma_a + fraction_b * sigma_b) / (fraction_a + fraction_b);
}

AuditReport audit_tensor(const Matrix& entries, const std::optional<TwoPhaseScalar>& phases, double slack) {
  AuditReport rep;
  rep.symmetry_defect = relative_asymmetry(entries);
  const Matrix sym = 0.5 * (entries + entries.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  rep.eigenvalues = eig.eigenvalues();
  rep.positive_definite = rep.eigenvalues.minCoeff() > 0.0;
  if (phases) {
    rep.bounds_checked = true;
    rep.lower_bound = phases->harmonic();
    rep.upper_bound = phases->arithmetic();
    rep.bounds_hold = rep.eigenvalues.minCoeff() >= rep.lower_bound * (1.0 - slack) &&
                      rep.eigenvalues.maxCoeff() <= rep.upper_bound * (1.0 + slack);
  }
  return rep;
}

AuditReport audit_tensor(const HomogenizedTensor& tensor, const std::optional<TwoPhaseScalar>& phases, double slack) {
  AuditReport rep = audit_tensor(tensor.entries, phases, slack);
  rep.symmetry_defect = std::max(rep.symmetry_defect, tensor.provenance.asymmetry);
  return rep;
}

}  // namespace trihom
