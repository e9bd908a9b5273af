#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "trihom/types.hpp"

namespace trihom {

/// Axis-aligned periodic reference cell sampled by a regular voxel grid.
/// Axes beyond `dim` carry resolution 1 and length 1 so loops can always run
/// over three axes.
struct GridSpec {
  int dim = 2;
  Index3 resolution{1, 1, 1};
  Point lengths{1.0, 1.0, 1.0};

  static GridSpec cube(int dim, int n, double length = 1.0);

  void validate() const;

  std::size_t voxel_count() const;
  /// Periodic grid: one node per voxel corner class, so node count == voxel count.
  std::size_t node_count() const { return voxel_count(); }
  double spacing(int axis) const { return lengths[axis] / resolution[axis]; }
  double voxel_volume() const;
  double cell_volume() const;

  /// Row-major linearisation, axis 0 slowest.
  std::size_t ravel(const Index3& idx) const {
    return (static_cast<std::size_t>(idx[0]) * resolution[1] + idx[1]) * resolution[2] + idx[2];
  }
  Index3 unravel(std::size_t linear) const;
  /// Index with periodic wrap applied on every active axis.
  std::size_t ravel_wrapped(Index3 idx) const;
  Point voxel_center(std::size_t voxel) const;
  Point node_position(std::size_t node) const;

  bool operator==(const GridSpec& other) const;
};

struct Ball {
  Point center{};
  double radius = 0.0;
};

/// Slab of thickness `fraction * length[axis]` centred in the cell, normal to `axis`.
struct Laminate {
  int axis = 0;
  double fraction = 0.5;
};

struct RoundedBox {
  Point center{};
  Point half_widths{};
  double corner_radius = 0.0;
};

using ShapePrimitive = std::variant<Ball, Laminate, RoundedBox>;

/// Inclusion region as a union of periodic primitives. No parts means FULL
/// (every voxel belongs to the matrix phase).
struct ShapeSpec {
  std::vector<ShapePrimitive> parts;

  static ShapeSpec full() { return {}; }
  static ShapeSpec ball(Point center, double radius) { return {{Ball{center, radius}}}; }
  static ShapeSpec laminate(int axis, double fraction) { return {{Laminate{axis, fraction}}}; }
  static ShapeSpec rounded_box(Point center, Point half_widths, double corner_radius) {
    return {{RoundedBox{center, half_widths, corner_radius}}};
  }

  bool is_full() const { return parts.empty(); }
  void validate(const GridSpec& grid) const;
  /// Signed distance to the inclusion boundary (negative inside), using the
  /// nearest periodic image of every primitive.
  double signed_distance(const GridSpec& grid, const Point& y) const;
  std::string describe() const;
};

enum class Level { Meso, Micro };

/// Label 0 is the matrix phase (EXTRA at the meso level, CYTOSOL at the micro
/// level); label 1 is the inclusion (INTRA resp. MITO).
inline constexpr std::uint8_t kMatrixLabel = 0;
inline constexpr std::uint8_t kInclusionLabel = 1;
inline constexpr std::uint8_t kExtra = 0;
inline constexpr std::uint8_t kIntra = 1;
inline constexpr std::uint8_t kCytosol = 0;
inline constexpr std::uint8_t kMito = 1;

std::string_view label_name(Level level, std::uint8_t label);
std::string_view level_name(Level level);

/// Bit set of labels that carry degrees of freedom in a cell problem.
struct ActiveLabels {
  std::uint8_t bits = 0;

  static ActiveLabels only(std::uint8_t label) { return {static_cast<std::uint8_t>(1u << label)}; }
  static ActiveLabels all() { return {0b11}; }
  bool contains(std::uint8_t label) const { return (bits >> label) & 1u; }
  bool operator==(const ActiveLabels&) const = default;
};

struct Facet {
  Point position{};
  Point normal{};  // unit, pointing from the inclusion into the matrix phase
  double area = 0.0;
};

/// Voxel face separating the two labels (staircase representation).
struct StaircaseFace {
  std::size_t inclusion_voxel = 0;
  std::size_t matrix_voxel = 0;
  int axis = 0;
  int sign = 1;  // +1 if the matrix voxel lies in the +axis direction
};

struct Connectivity {
  int components = 0;
  std::array<bool, kMaxDim> percolates{false, false, false};
  std::size_t voxels = 0;

  bool percolates_any(int dim) const;
  bool percolates_all(int dim) const;
};

/// Face-adjacency connectivity on the torus. Percolation along an axis is
/// detected from a non-zero winding of a cluster across the periodic wrap.
Connectivity analyze_connectivity(const GridSpec& grid, const std::vector<std::uint8_t>& labels,
                                  ActiveLabels active);

class UnitCellGeometry {
 public:
  UnitCellGeometry(GridSpec grid, Level level, ShapeSpec shape, std::vector<std::uint8_t> labels,
                   std::vector<Facet> facets, std::vector<StaircaseFace> faces);

  const GridSpec& grid() const { return grid_; }
  Level level() const { return level_; }
  const ShapeSpec& shape() const { return shape_; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }
  std::uint8_t label(std::size_t voxel) const { return labels_[voxel]; }
  const std::vector<Facet>& facets() const { return facets_; }
  const std::vector<StaircaseFace>& staircase_faces() const { return faces_; }

  std::size_t count(std::uint8_t label) const;
  bool has_label(std::uint8_t label) const { return count(label) > 0; }
  Connectivity connectivity(ActiveLabels active) const;

 private:
  GridSpec grid_;
  Level level_;
  ShapeSpec shape_;
  std::vector<std::uint8_t> labels_;
  std::vector<Facet> facets_;
  std::vector<StaircaseFace> faces_;
};

/// Labels voxels by centre membership, reconstructs the interface, and checks
/// that the matrix phase is a single periodic component that percolates along
/// at least one axis.
UnitCellGeometry build_cell(const GridSpec& grid, const ShapeSpec& shape, Level level);

double measure_volume(const UnitCellGeometry& geom, std::uint8_t label);
double measure_volume(const UnitCellGeometry& geom, ActiveLabels labels);
/// Interface measure from the piecewise-linear reconstruction of the level set.
double measure_interface(const UnitCellGeometry& geom);
/// Staircase measure: total area of label-change voxel faces.
double measure_staircase_interface(const UnitCellGeometry& geom);
/// |interface| / |cell|.
double membrane_ratio(const UnitCellGeometry& geom);

/// One text header line followed by the row-major label bytes.
void write_labels(std::ostream& out, const UnitCellGeometry& geom);

}  // namespace trihom
