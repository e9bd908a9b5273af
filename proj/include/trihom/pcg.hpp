#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace trihom {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct PcgOptions {
  double tolerance = 1e-10;  // on ||b - A x|| / ||b||
  int max_iterations = 0;    // 0: 50 * sqrt(n)
  /// When non-empty the operator is assumed singular with the constant
  /// vector as kernel. Iterates are kept at zero weighted mean with these
  /// weights and residuals are projected onto the range.
  Eigen::VectorXd kernel_weights;
};

struct PcgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Jacobi-preconditioned conjugate gradients; `x` holds the initial guess on
/// entry. Throws NoConvergence when the iteration budget is exhausted.
PcgResult pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                    const PcgOptions& options = {});

int default_max_iterations(Eigen::Index n);

/// Weighted mean removal: x <- x - (w.x / sum w).
void project_zero_mean(Eigen::VectorXd& x, const Eigen::VectorXd& weights);

}  // namespace trihom
