#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include <Eigen/Core>

namespace trihom {

inline constexpr int kMaxDim = 3;

using Point = std::array<double, kMaxDim>;
using Index3 = std::array<int, kMaxDim>;

/// Small dense d x d matrix (d <= 3) without heap allocation.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

inline Matrix isotropic(int dim, double sigma) { return Matrix::Identity(dim, dim) * sigma; }

inline Matrix diagonal(const SmallVector& diag) {
  Matrix m = Matrix::Zero(diag.size(), diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) m(i, i) = diag(i);
  return m;
}

}  // namespace trihom
