#include "trihom/cellsolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <Eigen/Eigenvalues>

#include "trihom/error.hpp"
#include "trihom/field_io.hpp"
#include "trihom/parallel.hpp"

namespace trihom {

namespace {

Point spacing_of(const GridSpec& grid) {
  Point h{1.0, 1.0, 1.0};
  for (int a = 0; a < grid.dim; ++a) h[a] = grid.spacing(a);
  return h;
}

}  // namespace

ConductivityField::ConductivityField(const GridSpec& grid, std::vector<Matrix> palette,
                                     std::vector<std::uint32_t> index)
    : grid_(grid), palette_(std::move(palette)), index_(std::move(index)) {
  require(index_.size() == grid_.voxel_count(), ErrorKind::InvalidArgument,
          "conductivity index does not match the grid");
  for (const auto& m : palette_)
    require(m.rows() == grid_.dim && m.cols() == grid_.dim, ErrorKind::InvalidArgument,
            "conductivity matrix has wrong size");
  for (auto i : index_)
    require(i < palette_.size(), ErrorKind::InvalidArgument, "conductivity palette index out of range");
}

ConductivityField ConductivityField::uniform(const GridSpec& grid, const Matrix& value) {
  return ConductivityField(grid, {value}, std::vector<std::uint32_t>(grid.voxel_count(), 0));
}

ConductivityField ConductivityField::per_label(const UnitCellGeometry& geom, const std::vector<Matrix>& by_label) {
  require(by_label.size() >= 2, ErrorKind::InvalidArgument, "need one conductivity per label");
  std::vector<std::uint32_t> index(geom.labels().begin(), geom.labels().end());
  return ConductivityField(geom.grid(), by_label, std::move(index));
}

ConductivityField ConductivityField::scaled(double factor) const {
  auto palette = palette_;
  for (auto& m : palette) m *= factor;
  return ConductivityField(grid_, std::move(palette), index_);
}

EllipticityBounds ConductivityField::audit(const UnitCellGeometry& geom, ActiveLabels active) const {
  std::vector<bool> used(palette_.size(), false);
  for (std::size_t v = 0; v < index_.size(); ++v)
    if (active.contains(geom.label(v))) used[index_[v]] = true;
  EllipticityBounds bounds{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < palette_.size(); ++i) {
    if (!used[i]) continue;
    const Matrix& m = palette_[i];
    const double scale = m.cwiseAbs().maxCoeff();
    require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorKind::InvalidArgument,
            "conductivity matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    require(eig.eigenvalues().minCoeff() > 0.0, ErrorKind::InvalidArgument,
            "conductivity matrix is not positive definite");
    bounds.alpha = std::min(bounds.alpha, eig.eigenvalues().minCoeff());
    bounds.beta = std::max(bounds.beta, eig.eigenvalues().maxCoeff());
  }
  require(bounds.beta > 0.0, ErrorKind::InvalidArgument, "no active voxels");
  return bounds;
}

void CellProblem::validate() const {
  require(geometry != nullptr && coefficient != nullptr, ErrorKind::InvalidArgument, "incomplete cell problem");
  require(direction >= 0 && direction < geometry->grid().dim, ErrorKind::InvalidArgument,
          "direction out of range");
  require(coefficient->grid() == geometry->grid(), ErrorKind::GridMismatch,
          "coefficient and geometry grids differ");
}

CellDiscretization::CellDiscretization(std::shared_ptr<const UnitCellGeometry> geometry, ActiveLabels active,
                                       std::shared_ptr<const ConductivityField> coefficient)
    : geometry_(std::move(geometry)),
      active_(active),
      coefficient_(std::move(coefficient)),
      element_(geometry_->grid().dim, spacing_of(geometry_->grid())) {
  const GridSpec& g = grid();
  require(coefficient_->grid() == g, ErrorKind::GridMismatch, "coefficient and geometry grids differ");
  coefficient_->audit(*geometry_, active_);

  connectivity_ = geometry_->connectivity(active_);
  require(connectivity_.voxels > 0, ErrorKind::DisconnectedSubdomain, "active subdomain is empty");
  require(connectivity_.components == 1, ErrorKind::DisconnectedSubdomain,
          "active subdomain splits into " + std::to_string(connectivity_.components) + " periodic components");

  const std::size_t n_nodes = g.node_count();
  const int corners = element_.nodes();
  std::vector<char> node_active(n_nodes, 0);
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!active_.contains(geometry_->label(v))) continue;
    const auto nodes = voxel_nodes(v);
    for (int c = 0; c < corners; ++c) node_active[nodes[c]] = 1;
  }
  dof_of_node_.assign(n_nodes, -1);
  for (std::size_t node = 0; node < n_nodes; ++node)
    if (node_active[node]) {
      dof_of_node_[node] = static_cast<int>(node_of_dof_.size());
      node_of_dof_.push_back(node);
    }
  const Eigen::Index n = dofs();

  // Sparsity: every node couples to its 3^d periodic neighbours.
  matrix_.resize(n, n);
  Eigen::VectorXi row_sizes = Eigen::VectorXi::Constant(n, g.dim == 2 ? 9 : 27);
  matrix_.reserve(row_sizes);
  std::vector<int> cols;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Index3 idx = g.unravel(node_of_dof_[static_cast<std::size_t>(i)]);
    cols.clear();
    for (int dz = (g.dim == 3 ? -1 : 0); dz <= (g.dim == 3 ? 1 : 0); ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          Index3 nb = idx;
          nb[0] += dx;
          nb[1] += dy;
          nb[2] += dz;
          const int j = dof_of_node_[g.ravel_wrapped(nb)];
          if (j >= 0) cols.push_back(j);
        }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    for (int j : cols) matrix_.insert(i, j) = 0.0;
  }
  matrix_.makeCompressed();

  std::vector<BoxElement::ElementMatrix> local(coefficient_->palette().size());
  std::vector<bool> local_ready(local.size(), false);
  mass_ = Eigen::VectorXd::Zero(n);
  const double share = element_.volume() / corners;
  std::size_t active_voxels = 0;
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!active_.contains(geometry_->label(v))) continue;
    ++active_voxels;
    const auto pi = coefficient_->palette_index(v);
    if (!local_ready[pi]) {
      local[pi] = element_.stiffness(coefficient_->palette()[pi]);
      local_ready[pi] = true;
    }
    const auto& k = local[pi];
    const auto nodes = voxel_nodes(v);
    for (int a = 0; a < corners; ++a) {
      const int ia = dof_of_node_[nodes[a]];
      mass_(ia) += share;
      for (int b = 0; b < corners; ++b) matrix_.coeffRef(ia, dof_of_node_[nodes[b]]) += k(a, b);
    }
  }
  active_volume_ = static_cast<double>(active_voxels) * g.voxel_volume();
}

std::array<std::size_t, 8> CellDiscretization::voxel_nodes(std::size_t voxel) const {
  const GridSpec& g = grid();
  const Index3 base = g.unravel(voxel);
  std::array<std::size_t, 8> out{};
  for (int c = 0; c < (1 << g.dim); ++c) {
    Index3 idx = base;
    for (int a = 0; a < g.dim; ++a) idx[a] += (c >> a) & 1;
    out[c] = g.ravel_wrapped(idx);
  }
  return out;
}

Eigen::VectorXd CellDiscretization::rhs(int direction) const {
  const GridSpec& g = grid();
  require(direction >= 0 && direction < g.dim, ErrorKind::InvalidArgument, "direction out of range");
  // Entering and leaving parts per axis, subtracted once.
  const int corners = element_.nodes();
  std::vector<Eigen::VectorXd> plus(static_cast<std::size_t>(g.dim), Eigen::VectorXd::Zero(dofs()));
  std::vector<Eigen::VectorXd> minus(static_cast<std::size_t>(g.dim), Eigen::VectorXd::Zero(dofs()));
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!active_.contains(geometry_->label(v))) continue;
    const Matrix& m = coefficient_->at(v);
    const auto nodes = voxel_nodes(v);
    for (int a = 0; a < corners; ++a) {
      const int dof = dof_of_node_[nodes[a]];
      for (int p = 0; p < g.dim; ++p) {
        auto& side = element_.gradient_integral(p, a) > 0.0 ? plus : minus;
        side[static_cast<std::size_t>(p)](dof) += m(p, direction);
      }
    }
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dofs());
  for (int p = 0; p < g.dim; ++p) {
    const double c = std::abs(element_.gradient_integral(p, 0));
    b -= c * (plus[static_cast<std::size_t>(p)] - minus[static_cast<std::size_t>(p)]);
  }
  return b;
}

double CorrectorField::mean() const {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    num += weights[i] * values[i];
    den += weights[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

double CorrectorField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

LinearSystem assemble(const CellProblem& problem) {
  problem.validate();
  auto disc = std::make_shared<const CellDiscretization>(problem.geometry, problem.active, problem.coefficient);
  LinearSystem sys;
  sys.rhs = disc->rhs(problem.direction);
  sys.direction = problem.direction;
  sys.discretization = std::move(disc);
  return sys;
}

double check_compatibility(const LinearSystem& system) { return std::abs(system.rhs.sum()); }

CorrectorField solve_system(const LinearSystem& system, double tol) {
  const auto& disc = *system.discretization;
  const double bnorm = system.rhs.norm();
  const double compat = check_compatibility(system);
  require(compat <= 1e-12 * std::max(bnorm, 1.0) * std::sqrt(static_cast<double>(disc.dofs())),
          ErrorKind::Incompatible, "right-hand side violates the compatibility condition (|sum b| = " +
                                       std::to_string(compat) + ")");

  Eigen::VectorXd x = Eigen::VectorXd::Zero(disc.dofs());
  PcgOptions opts;
  opts.tolerance = tol;
  opts.kernel_weights = disc.mass_weights();
  const PcgResult res = pcg_solve(disc.matrix(), system.rhs, x, opts);

  CorrectorField field;
  field.grid = disc.grid();
  field.active = disc.active();
  field.direction = system.direction;
  field.values.assign(disc.grid().node_count(), 0.0);
  field.weights.assign(disc.grid().node_count(), 0.0);
  for (Eigen::Index i = 0; i < disc.dofs(); ++i) {
    field.values[disc.node_of_dof(i)] = x(i);
    field.weights[disc.node_of_dof(i)] = disc.mass_weights()(i);
  }
  field.residual = res.relative_residual;
  field.tolerance = tol;
  field.iterations = res.iterations;
  return field;
}

CorrectorField solve_corrector(const CellProblem& problem, double tol) { return solve_system(assemble(problem), tol); }

std::vector<CorrectorField> solve_all_correctors(const std::shared_ptr<const CellDiscretization>& disc, double tol) {
  const int d = disc->grid().dim;
  std::vector<CorrectorField> out(static_cast<std::size_t>(d));
  parallel_for(static_cast<std::size_t>(d), [&](std::size_t q) {
    LinearSystem sys{disc, disc->rhs(static_cast<int>(q)), static_cast<int>(q)};
    out[q] = solve_system(sys, tol);
  });
  return out;
}

std::vector<CorrectorField> solve_all_correctors(std::shared_ptr<const UnitCellGeometry> geometry,
                                                 ActiveLabels active,
                                                 std::shared_ptr<const ConductivityField> coefficient, double tol) {
  auto disc = std::make_shared<const CellDiscretization>(std::move(geometry), active, std::move(coefficient));
  return solve_all_correctors(disc, tol);
}

double corrector_energy(const CellDiscretization& disc, const std::vector<double>& psi, int direction) {
  const GridSpec& g = disc.grid();
  const auto& el = disc.element();
  const int corners = el.nodes();
  double energy = 0.0;
  Eigen::Matrix<double, 8, 1> local = Eigen::Matrix<double, 8, 1>::Zero();
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    if (!disc.active().contains(disc.geometry().label(v))) continue;
    const Matrix& m = disc.coefficient().at(v);
    const auto nodes = disc.voxel_nodes(v);
    for (int a = 0; a < corners; ++a) local(a) = psi[nodes[a]];
    const auto k = el.stiffness(m);
    energy += m(direction, direction) * el.volume();
    for (int a = 0; a < corners; ++a) {
      double s = 0.0;
      for (int p = 0; p < g.dim; ++p) s += m(p, direction) * el.gradient_integral(p, a);
      energy += 2.0 * local(a) * s;
    }
    energy += local.head(corners).dot(k.topLeftCorner(corners, corners) * local.head(corners));
  }
  return energy;
}

void write_corrector(std::ostream& out, const CorrectorField& field, std::string_view name) {
  const auto& g = field.grid;
  FieldRecord rec;
  rec.name = std::string(name);
  rec.dtype = "float32";
  std::vector<double> lengths;
  for (int a = 0; a < g.dim; ++a) {
    rec.shape.push_back(g.resolution[a]);
    lengths.push_back(g.lengths[a]);
  }
  rec.attributes = {{"lengths", join_doubles(lengths)},
                    {"direction", std::to_string(field.direction)},
                    {"residual", format_double(field.residual)},
                    {"periodic", "1"}};
  rec.values = field.values;
  write_field(out, rec);
}

}  // namespace trihom
