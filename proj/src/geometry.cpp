#include "trihom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "trihom/error.hpp"

namespace trihom {

namespace {

double min_image(double delta, double length) { return delta - length * std::round(delta / length); }

double primitive_distance(const Ball& ball, const GridSpec& grid, const Point& y) {
  double sq = 0.0;
  for (int a = 0; a < grid.dim; ++a) {
    const double d = min_image(y[a] - ball.center[a], grid.lengths[a]);
    sq += d * d;
  }
  return std::sqrt(sq) - ball.radius;
}

double primitive_distance(const Laminate& lam, const GridSpec& grid, const Point& y) {
  const double length = grid.lengths[lam.axis];
  const double d = min_image(y[lam.axis] - 0.5 * length, length);
  return std::abs(d) - 0.5 * lam.fraction * length;
}

double primitive_distance(const RoundedBox& box, const GridSpec& grid, const Point& y) {
  double outside_sq = 0.0;
  double inside = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < grid.dim; ++a) {
    const double d = min_image(y[a] - box.center[a], grid.lengths[a]);
    const double q = std::abs(d) - (box.half_widths[a] - box.corner_radius);
    outside_sq += std::max(q, 0.0) * std::max(q, 0.0);
    inside = std::max(inside, q);
  }
  return std::sqrt(outside_sq) + std::min(inside, 0.0) - box.corner_radius;
}

bool finite_point(const Point& p, int dim) {
  for (int a = 0; a < dim; ++a)
    if (!std::isfinite(p[a])) return false;
  return true;
}

// Crossing of the zero level set on the edge p -> q.
Eigen::Vector3d edge_crossing(const Eigen::Vector3d& p, double fp, const Eigen::Vector3d& q, double fq) {
  const double t = fp / (fp - fq);
  return p + t * (q - p);
}

struct SimplexFacet {
  double area = 0.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
};

// Zero-level-set piece inside a triangle (2D) given vertex positions and values.
SimplexFacet triangle_facet(const std::array<Eigen::Vector3d, 3>& x, const std::array<double, 3>& f) {
  std::array<bool, 3> neg{f[0] < 0.0, f[1] < 0.0, f[2] < 0.0};
  const int n_neg = neg[0] + neg[1] + neg[2];
  SimplexFacet out;
  if (n_neg == 0 || n_neg == 3) return out;
  std::array<Eigen::Vector3d, 2> pts;
  int k = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (neg[i] != neg[j]) pts[k++] = edge_crossing(x[i], f[i], x[j], f[j]);
  out.area = (pts[1] - pts[0]).norm();
  out.centroid = 0.5 * (pts[0] + pts[1]);
  return out;
}

SimplexFacet tetra_facet(const std::array<Eigen::Vector3d, 4>& x, const std::array<double, 4>& f) {
  std::array<bool, 4> neg{};
  int n_neg = 0;
  for (int i = 0; i < 4; ++i) n_neg += (neg[i] = f[i] < 0.0);
  SimplexFacet out;
  if (n_neg == 0 || n_neg == 4) return out;
  auto tri_area = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    return 0.5 * (b - a).cross(c - a).norm();
  };
  if (n_neg == 1 || n_neg == 3) {
    const bool lone_sign = (n_neg == 1);
    int lone = 0;
    while (neg[lone] != lone_sign) ++lone;
    std::array<Eigen::Vector3d, 3> pts;
    int k = 0;
    for (int j = 0; j < 4; ++j)
      if (j != lone) pts[k++] = edge_crossing(x[lone], f[lone], x[j], f[j]);
    out.area = tri_area(pts[0], pts[1], pts[2]);
    out.centroid = (pts[0] + pts[1] + pts[2]) / 3.0;
    return out;
  }
  std::array<int, 2> a{}, b{};
  int ia = 0, ib = 0;
  for (int i = 0; i < 4; ++i) (neg[i] ? a[ia++] : b[ib++]) = i;
  const auto p00 = edge_crossing(x[a[0]], f[a[0]], x[b[0]], f[b[0]]);
  const auto p01 = edge_crossing(x[a[0]], f[a[0]], x[b[1]], f[b[1]]);
  const auto p11 = edge_crossing(x[a[1]], f[a[1]], x[b[1]], f[b[1]]);
  const auto p10 = edge_crossing(x[a[1]], f[a[1]], x[b[0]], f[b[0]]);
  const double a1 = tri_area(p00, p01, p11);
  const double a2 = tri_area(p00, p11, p10);
  out.area = a1 + a2;
  if (out.area > 0.0)
    out.centroid = (a1 * (p00 + p01 + p11) / 3.0 + a2 * (p00 + p11 + p10) / 3.0) / out.area;
  else
    out.centroid = 0.25 * (p00 + p01 + p11 + p10);
  return out;
}

// Gradient of the linear interpolant on a simplex.
template <std::size_t N>
Eigen::Vector3d simplex_gradient(const std::array<Eigen::Vector3d, N>& x, const std::array<double, N>& f,
                                 int dim) {
  Eigen::MatrixXd edges(dim, dim);
  Eigen::VectorXd rhs(dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) edges(r, c) = x[r + 1](c) - x[0](c);
    rhs(r) = f[r + 1] - f[0];
  }
  Eigen::VectorXd g = edges.partialPivLu().solve(rhs);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int c = 0; c < dim; ++c) out(c) = g(c);
  return out;
}

std::vector<Facet> reconstruct_interface(const GridSpec& grid, const ShapeSpec& shape) {
  std::vector<Facet> facets;
  if (shape.is_full()) return facets;

  const std::size_t n = grid.node_count();
  std::vector<double> phi(n);
  for (std::size_t node = 0; node < n; ++node) phi[node] = shape.signed_distance(grid, grid.node_position(node));

  const int corners = 1 << grid.dim;
  std::vector<Eigen::Vector3d> local(corners);
  for (int c = 0; c < corners; ++c) {
    local[c].setZero();
    for (int a = 0; a < grid.dim; ++a)
      if ((c >> a) & 1) local[c](a) = grid.spacing(a);
  }

  // Kuhn decomposition: simplices follow the main diagonal, one per axis permutation.
  std::vector<std::vector<int>> simplices;
  std::array<int, 3> perm{0, 1, 2};
  do {
    if (grid.dim == 2 && perm[2] != 2) continue;
    std::vector<int> verts{0};
    int cur = 0;
    for (int k = 0; k < grid.dim; ++k) {
      cur |= 1 << perm[k];
      verts.push_back(cur);
    }
    simplices.push_back(verts);
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::vector<double> fc(corners);
  for (std::size_t v = 0; v < grid.voxel_count(); ++v) {
    const Index3 base = grid.unravel(v);
    bool any_neg = false, any_pos = false;
    for (int c = 0; c < corners; ++c) {
      Index3 idx = base;
      for (int a = 0; a < grid.dim; ++a) idx[a] += (c >> a) & 1;
      fc[c] = phi[grid.ravel_wrapped(idx)];
      (fc[c] < 0.0 ? any_neg : any_pos) = true;
    }
    if (!(any_neg && any_pos)) continue;

    Point origin{};
    for (int a = 0; a < grid.dim; ++a) origin[a] = base[a] * grid.spacing(a);

    for (const auto& s : simplices) {
      SimplexFacet piece;
      Eigen::Vector3d grad;
      if (grid.dim == 2) {
        std::array<Eigen::Vector3d, 3> x{local[s[0]], local[s[1]], local[s[2]]};
        std::array<double, 3> f{fc[s[0]], fc[s[1]], fc[s[2]]};
        piece = triangle_facet(x, f);
        if (piece.area <= 0.0) continue;
        grad = simplex_gradient(x, f, 2);
      } else {
        std::array<Eigen::Vector3d, 4> x{local[s[0]], local[s[1]], local[s[2]], local[s[3]]};
        std::array<double, 4> f{fc[s[0]], fc[s[1]], fc[s[2]], fc[s[3]]};
        piece = tetra_facet(x, f);
        if (piece.area <= 0.0) continue;
        grad = simplex_gradient(x, f, 3);
      }
      Facet facet;
      facet.area = piece.area;
      const double gn = grad.norm();
      for (int a = 0; a < grid.dim; ++a) {
        facet.position[a] = origin[a] + piece.centroid(a);
        facet.normal[a] = gn > 0.0 ? grad(a) / gn : 0.0;
      }
      facets.push_back(facet);
    }
  }
  return facets;
}

std::vector<StaircaseFace> staircase(const GridSpec& grid, const std::vector<std::uint8_t>& labels) {
  std::vector<StaircaseFace> faces;
  for (std::size_t v = 0; v < grid.voxel_count(); ++v) {
    const Index3 idx = grid.unravel(v);
    for (int a = 0; a < grid.dim; ++a) {
      Index3 nb = idx;
      nb[a] += 1;
      const std::size_t w = grid.ravel_wrapped(nb);
      if (labels[v] == labels[w]) continue;
      StaircaseFace face;
      face.axis = a;
      if (labels[v] == kInclusionLabel) {
        face.inclusion_voxel = v;
        face.matrix_voxel = w;
        face.sign = 1;
      } else {
        face.inclusion_voxel = w;
        face.matrix_voxel = v;
        face.sign = -1;
      }
      faces.push_back(face);
    }
  }
  return faces;
}

}  // namespace

GridSpec GridSpec::cube(int dim, int n, double length) {
  GridSpec g;
  g.dim = dim;
  for (int a = 0; a < dim; ++a) {
    g.resolution[a] = n;
    g.lengths[a] = length;
  }
  return g;
}

void GridSpec::validate() const {
  require(dim == 2 || dim == 3, ErrorKind::InvalidArgument, "cell dimension must be 2 or 3");
  for (int a = 0; a < kMaxDim; ++a) {
    if (a < dim) {
      require(resolution[a] >= 4, ErrorKind::InvalidArgument, "cell resolution must be >= 4 per axis");
      require(std::isfinite(lengths[a]) && lengths[a] > 0.0, ErrorKind::InvalidArgument,
              "cell lengths must be positive");
    } else {
      require(resolution[a] == 1, ErrorKind::InvalidArgument, "unused axes must have resolution 1");
    }
  }
}

std::size_t GridSpec::voxel_count() const {
  return static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2];
}

double GridSpec::voxel_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= spacing(a);
  return v;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= lengths[a];
  return v;
}

Index3 GridSpec::unravel(std::size_t linear) const {
  Index3 idx{};
  idx[2] = static_cast<int>(linear % resolution[2]);
  linear /= resolution[2];
  idx[1] = static_cast<int>(linear % resolution[1]);
  idx[0] = static_cast<int>(linear / resolution[1]);
  return idx;
}

std::size_t GridSpec::ravel_wrapped(Index3 idx) const {
  for (int a = 0; a < kMaxDim; ++a) {
    const int n = resolution[a];
    idx[a] = ((idx[a] % n) + n) % n;
  }
  return ravel(idx);
}

Point GridSpec::voxel_center(std::size_t voxel) const {
  const Index3 idx = unravel(voxel);
  Point p{};
  for (int a = 0; a < dim; ++a) p[a] = (idx[a] + 0.5) * spacing(a);
  return p;
}

Point GridSpec::node_position(std::size_t node) const {
  const Index3 idx = unravel(node);
  Point p{};
  for (int a = 0; a < dim; ++a) p[a] = idx[a] * spacing(a);
  return p;
}

bool GridSpec::operator==(const GridSpec& other) const {
  return dim == other.dim && resolution == other.resolution && lengths == other.lengths;
}

void ShapeSpec::validate(const GridSpec& grid) const {
  for (const auto& part : parts) {
    if (const auto* b = std::get_if<Ball>(&part)) {
      require(std::isfinite(b->radius) && b->radius > 0.0, ErrorKind::InvalidShape, "ball radius must be positive");
      require(finite_point(b->center, grid.dim), ErrorKind::InvalidShape, "ball center must be finite");
    } else if (const auto* l = std::get_if<Laminate>(&part)) {
      require(l->axis >= 0 && l->axis < grid.dim, ErrorKind::InvalidShape, "laminate axis out of range");
      require(l->fraction > 0.0 && l->fraction < 1.0, ErrorKind::InvalidShape,
              "laminate fraction must lie in (0, 1)");
    } else if (const auto* r = std::get_if<RoundedBox>(&part)) {
      require(finite_point(r->center, grid.dim), ErrorKind::InvalidShape, "box center must be finite");
      double min_half = std::numeric_limits<double>::infinity();
      for (int a = 0; a < grid.dim; ++a) {
        require(std::isfinite(r->half_widths[a]) && r->half_widths[a] > 0.0, ErrorKind::InvalidShape,
                "box half-widths must be positive");
        min_half = std::min(min_half, r->half_widths[a]);
      }
      require(r->corner_radius >= 0.0 && r->corner_radius <= min_half, ErrorKind::InvalidShape,
              "corner radius must lie in [0, min half-width]");
    }
  }
}

double ShapeSpec::signed_distance(const GridSpec& grid, const Point& y) const {
  double phi = std::numeric_limits<double>::infinity();
  for (const auto& part : parts)
    phi = std::min(phi, std::visit([&](const auto& p) { return primitive_distance(p, grid, y); }, part));
  return phi;
}

std::string ShapeSpec::describe() const {
  if (is_full()) return "full";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& part : parts) {
    if (!first) os << "; ";
    first = false;
    if (const auto* b = std::get_if<Ball>(&part)) {
      os << "ball:" << b->center[0] << ',' << b->center[1] << ',' << b->center[2] << ',' << b->radius;
    } else if (const auto* l = std::get_if<Laminate>(&part)) {
      os << "laminate:" << l->axis << ',' << l->fraction;
    } else if (const auto* r = std::get_if<RoundedBox>(&part)) {
      os << "box:" << r->center[0] << ',' << r->center[1] << ',' << r->center[2] << ',' << r->half_widths[0]
         << ',' << r->half_widths[1] << ',' << r->half_widths[2] << ',' << r->corner_radius;
    }
  }
  return os.str();
}

std::string_view label_name(Level level, std::uint8_t label) {
  if (level == Level::Meso) return label == kIntra ? "INTRA" : "EXTRA";
  return label == kMito ? "MITO" : "CYTOSOL";
}

std::string_view level_name(Level level) { return level == Level::Meso ? "meso" : "micro"; }

bool Connectivity::percolates_any(int dim) const {
  for (int a = 0; a < dim; ++a)
    if (percolates[a]) return true;
  return false;
}

bool Connectivity::percolates_all(int dim) const {
  for (int a = 0; a < dim; ++a)
    if (!percolates[a]) return false;
  return true;
}

Connectivity analyze_connectivity(const GridSpec& grid, const std::vector<std::uint8_t>& labels,
                                  ActiveLabels active) {
  const std::size_t n = grid.voxel_count();
  Connectivity out;
  std::vector<int> component(n, -1);
  std::vector<Index3> offset(n, Index3{0, 0, 0});
  std::deque<std::size_t> queue;

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!active.contains(labels[seed]) || component[seed] >= 0) continue;
    const int comp = out.components++;
    component[seed] = comp;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      ++out.voxels;
      const Index3 idx = grid.unravel(v);
      for (int a = 0; a < grid.dim; ++a) {
        for (int step : {-1, 1}) {
          Index3 nb = idx;
          nb[a] += step;
          int wrap = 0;
          if (nb[a] < 0) {
            nb[a] += grid.resolution[a];
            wrap = -1;
          } else if (nb[a] >= grid.resolution[a]) {
            nb[a] -= grid.resolution[a];
            wrap = 1;
          }
          const std::size_t w = grid.ravel(nb);
          if (!active.contains(labels[w])) continue;
          Index3 off = offset[v];
          off[a] += wrap;
          if (component[w] < 0) {
            component[w] = comp;
            offset[w] = off;
            queue.push_back(w);
          } else {
            for (int b = 0; b < grid.dim; ++b)
              if (offset[w][b] != off[b]) out.percolates[b] = true;
          }
        }
      }
    }
  }
  return out;
}

UnitCellGeometry::UnitCellGeometry(GridSpec grid, Level level, ShapeSpec shape, std::vector<std::uint8_t> labels,
                                   std::vector<Facet> facets, std::vector<StaircaseFace> faces)
    : grid_(grid),
      level_(level),
      shape_(std::move(shape)),
      labels_(std::move(labels)),
      facets_(std::move(facets)),
      faces_(std::move(faces)) {}

std::size_t UnitCellGeometry::count(std::uint8_t label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

Connectivity UnitCellGeometry::connectivity(ActiveLabels active) const {
  return analyze_connectivity(grid_, labels_, active);
}

UnitCellGeometry build_cell(const GridSpec& grid, const ShapeSpec& shape, Level level) {
  grid.validate();
  shape.validate(grid);

  std::vector<std::uint8_t> labels(grid.voxel_count(), kMatrixLabel);
  if (!shape.is_full()) {
    for (std::size_t v = 0; v < labels.size(); ++v)
      if (shape.signed_distance(grid, grid.voxel_center(v)) < 0.0) labels[v] = kInclusionLabel;
  }

  const auto conn = analyze_connectivity(grid, labels, ActiveLabels::only(kMatrixLabel));
  require(conn.voxels > 0, ErrorKind::DisconnectedSubdomain,
          std::string(label_name(level, kMatrixLabel)) + " phase is empty");
  require(conn.components == 1, ErrorKind::DisconnectedSubdomain,
          std::string(label_name(level, kMatrixLabel)) + " phase splits into " + std::to_string(conn.components) +
              " periodic components");
  require(conn.percolates_any(grid.dim), ErrorKind::DisconnectedSubdomain,
          std::string(label_name(level, kMatrixLabel)) + " phase does not percolate along any axis");

  auto facets = reconstruct_interface(grid, shape);
  auto faces = staircase(grid, labels);
  return UnitCellGeometry(grid, level, shape, std::move(labels), std::move(facets), std::move(faces));
}

double measure_volume(const UnitCellGeometry& geom, std::uint8_t label) {
  require(label == kMatrixLabel || label == kInclusionLabel, ErrorKind::UnknownLabel,
          "label " + std::to_string(label) + " does not exist");
  return static_cast<double>(geom.count(label)) * geom.grid().voxel_volume();
}

double measure_volume(const UnitCellGeometry& geom, ActiveLabels labels) {
  double v = 0.0;
  for (std::uint8_t l : {kMatrixLabel, kInclusionLabel})
    if (labels.contains(l)) v += measure_volume(geom, l);
  return v;
}

double measure_interface(const UnitCellGeometry& geom) {
  require(geom.has_label(kMatrixLabel) && geom.has_label(kInclusionLabel), ErrorKind::EmptyInterface,
          "cell carries a single label");
  double area = 0.0;
  for (const auto& f : geom.facets()) area += f.area;
  return area;
}

double measure_staircase_interface(const UnitCellGeometry& geom) {
  require(geom.has_label(kMatrixLabel) && geom.has_label(kInclusionLabel), ErrorKind::EmptyInterface,
          "cell carries a single label");
  double area = 0.0;
  const auto& grid = geom.grid();
  for (const auto& f : geom.staircase_faces()) area += grid.voxel_volume() / grid.spacing(f.axis);
  return area;
}

double membrane_ratio(const UnitCellGeometry& geom) { return measure_interface(geom) / geom.grid().cell_volume(); }

void write_labels(std::ostream& out, const UnitCellGeometry& geom) {
  const auto& g = geom.grid();
  out.precision(17);
  out << "TRIHOM-LABELS v1 level=" << level_name(geom.level()) << " dim=" << g.dim << " resolution=";
  for (int a = 0; a < g.dim; ++a) out << (a ? "," : "") << g.resolution[a];
  out << " lengths=";
  for (int a = 0; a < g.dim; ++a) out << (a ? "," : "") << g.lengths[a];
  out << " legend=0:" << label_name(geom.level(), 0) << ",1:" << label_name(geom.level(), 1) << '\n';
  out.write(reinterpret_cast<const char*>(geom.labels().data()), static_cast<std::streamsize>(geom.labels().size()));
}

}  // namespace trihom
