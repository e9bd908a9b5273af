#include "trihom/fem.hpp"

namespace trihom {

namespace {

int bit(int a, int axis) { return (a >> axis) & 1; }
double slope(int b) { return b ? 1.0 : -1.0; }

}  // namespace

BoxElement::BoxElement(int dim, const Point& spacing) : dim_(dim), nodes_(1 << dim), h_(spacing), volume_(1.0) {
  for (int a = 0; a < dim_; ++a) volume_ *= h_[a];
  g_pq_.resize(static_cast<std::size_t>(dim_ * dim_));
  for (int p = 0; p < dim_; ++p)
    for (int q = 0; q < dim_; ++q) {
      ElementMatrix block = ElementMatrix::Zero();
      for (int a = 0; a < nodes_; ++a)
        for (int b = 0; b < nodes_; ++b) block(a, b) = pair_integral(p, q, a, b);
      g_pq_[p * dim_ + q] = block;
    }
  g_.resize(static_cast<std::size_t>(dim_ * nodes_));
  for (int p = 0; p < dim_; ++p)
    for (int a = 0; a < nodes_; ++a) {
      double v = slope(bit(a, p));
      for (int i = 0; i < dim_; ++i)
        if (i != p) v *= 0.5 * h_[i];
      g_[p * nodes_ + a] = v;
    }
}

// Tensor-product factorisation of int d_p(phi_a) d_q(phi_b).
double BoxElement::pair_integral(int p, int q, int a, int b) const {
  double v = 1.0;
  for (int i = 0; i < dim_; ++i) {
    const int ai = bit(a, i), bi = bit(b, i);
    if (i == p && i == q) {
      v *= slope(ai) * slope(bi) / h_[i];
    } else if (i == p) {
      v *= 0.5 * slope(ai);
    } else if (i == q) {
      v *= 0.5 * slope(bi);
    } else {
      v *= h_[i] * (ai == bi ? 1.0 / 3.0 : 1.0 / 6.0);
    }
  }
  return v;
}

BoxElement::ElementMatrix BoxElement::stiffness(const Matrix& m) const {
  ElementMatrix k = ElementMatrix::Zero();
  for (int p = 0; p < dim_; ++p)
    for (int q = 0; q < dim_; ++q)
      if (m(p, q) != 0.0) k += m(p, q) * g_pq_[p * dim_ + q];
  return k;
}

}  // namespace trihom
