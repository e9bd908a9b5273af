#include "trihom/pcg.hpp"

#include <cmath>
#include <string>

#include "trihom/error.hpp"

namespace trihom {

int default_max_iterations(Eigen::Index n) {
  return static_cast<int>(std::ceil(50.0 * std::sqrt(static_cast<double>(std::max<Eigen::Index>(n, 1)))));
}

void project_zero_mean(Eigen::VectorXd& x, const Eigen::VectorXd& weights) {
  const double total = weights.sum();
  if (total <= 0.0) return;
  x.array() -= weights.dot(x) / total;
}

PcgResult pcg_solve(const SparseMatrix& a, const Eigen::VectorXd& b, Eigen::VectorXd& x,
                    const PcgOptions& options) {
  const Eigen::Index n = b.size();
  require(a.rows() == n && a.cols() == n && x.size() == n, ErrorKind::InvalidArgument, "pcg: size mismatch");
  const bool singular = options.kernel_weights.size() > 0;
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : default_max_iterations(n);

  PcgResult result;
  Eigen::VectorXd rhs = b;
  if (singular) rhs.array() -= rhs.mean();
  const double bnorm = rhs.norm();
  require(std::isfinite(bnorm), ErrorKind::NonFinite, "pcg: right-hand side is not finite");
  if (bnorm == 0.0) {
    x.setZero();
    result.converged = true;
    return result;
  }

  Eigen::VectorXd inv_diag = a.diagonal();
  for (Eigen::Index i = 0; i < n; ++i) inv_diag(i) = inv_diag(i) > 0.0 ? 1.0 / inv_diag(i) : 1.0;

  int it = 0;
  double true_res = 0.0;
  // Restarts guard against drift between the recursive and the true residual.
  for (int restart = 0; restart < 4; ++restart) {
    if (singular) project_zero_mean(x, options.kernel_weights);
    Eigen::VectorXd r = rhs - a * x;
    if (singular) r.array() -= r.mean();
    double rnorm = r.norm();
    true_res = rnorm / bnorm;
    if (true_res <= options.tolerance || it >= max_iter) break;

    Eigen::VectorXd z = inv_diag.cwiseProduct(r);
    Eigen::VectorXd p = z;
    if (singular) project_zero_mean(p, options.kernel_weights);
    Eigen::VectorXd ap(n);
    double rz = r.dot(z);
    while (rnorm > options.tolerance * bnorm && it < max_iter) {
      ap.noalias() = a * p;
      const double pap = p.dot(ap);
      if (!(pap > 0.0)) break;
      const double alpha = rz / pap;
      x.noalias() += alpha * p;
      r.noalias() -= alpha * ap;
      if (singular) r.array() -= r.mean();
      z = inv_diag.cwiseProduct(r);
      const double rz_next = r.dot(z);
      const double beta = rz_next / rz;
      rz = rz_next;
      p = z + beta * p;
      if (singular) project_zero_mean(p, options.kernel_weights);
      rnorm = r.norm();
      ++it;
    }
  }
  if (singular) project_zero_mean(x, options.kernel_weights);
  {
    Eigen::VectorXd r = rhs - a * x;
    if (singular) r.array() -= r.mean();
    true_res = r.norm() / bnorm;
  }
  result.iterations = it;
  result.relative_residual = true_res;
  result.converged = true_res <= options.tolerance;
  if (!result.converged)
    fail(ErrorKind::NoConvergence, "pcg stopped after " + std::to_string(it) + " iterations (max " +
                                       std::to_string(max_iter) + "), relative residual " +
                                       std::to_string(result.relative_residual));
  return result;
}

}  // namespace trihom
