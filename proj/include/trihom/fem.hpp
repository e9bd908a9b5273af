#pragma once

#include <vector>

#include <Eigen/Core>

#include "trihom/types.hpp"

namespace trihom {

/// Exact integrals of the multilinear shape functions on one axis-aligned box
/// element. Local node `a` sits at offset bit `(a >> axis) & 1` along each axis.
class BoxElement {
 public:
  using ElementMatrix = Eigen::Matrix<double, 8, 8>;

  BoxElement(int dim, const Point& spacing);

  int dim() const { return dim_; }
  int nodes() const { return nodes_; }
  double volume() const { return volume_; }

  /// K_ab = int grad(phi_a) . M grad(phi_b).
  ElementMatrix stiffness(const Matrix& m) const;
  /// int d(phi_a)/dx_p over the element.
  double gradient_integral(int p, int a) const { return g_[p * nodes_ + a]; }

 private:
  double pair_integral(int p, int q, int a, int b) const;

  int dim_;
  int nodes_;
  Point h_;
  double volume_;
  std::vector<ElementMatrix> g_pq_;  // dim*dim blocks
  std::vector<double> g_;
};

}  // namespace trihom
