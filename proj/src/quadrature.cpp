#include "lsmd/quadrature.hpp"

#include <cmath>

#include "lsmd/errors.hpp"
#include "lsmd/rng.hpp"

namespace lsmd {

QuadratureRule gauss_hermite_normal(int n) {
  if (n < 1) throw DimensionError("gauss_hermite_normal: need n >= 1");
  // Jacobi matrix for Hermite polynomials (weight exp(-x^2)): zero diagonal,
  // off-diagonal sqrt(k/2). Nodes are its eigenvalues, weights the squared
  // first components of the eigenvectors.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = std::sqrt(0.5 * k);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  rule.nodes = std::sqrt(2.0) * es.eigenvalues();  // change of variables to N(0,1)
  rule.weights = es.eigenvectors().row(0).transpose().array().square();
  rule.weights /= rule.weights.sum();
  return rule;
}

QuadratureRule gauss_hermite_product(int n_per_dim, int L) {
  if (L < 1) throw DimensionError("gauss_hermite_product: need L >= 1");
  QuadratureRule base = gauss_hermite_normal(n_per_dim);
  if (L == 1) return base;
  const int q1 = base.count();
  int total = 1;
  for (int l = 0; l < L; ++l) total *= q1;
  QuadratureRule rule;
  rule.nodes.resize(total, L);
  rule.weights.resize(total);
  for (int i = 0; i < total; ++i) {
    int rem = i;
    double w = 1.0;
    for (int l = 0; l < L; ++l) {
      int idx = rem % q1;
      rem /= q1;
      rule.nodes(i, l) = base.nodes(idx, 0);
      w *= base.weights(idx);
    }
    rule.weights(i) = w;
  }
  rule.weights /= rule.weights.sum();
  return rule;
}

namespace {

double halton_point(int index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

}  // namespace

QuadratureRule halton_normal(int n, int L, int skip) {
  static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                               23, 29, 31, 37, 41, 43, 47, 53};
  if (L < 1 || L > 16) throw DimensionError("halton_normal: need 1 <= L <= 16");
  QuadratureRule rule;
  rule.nodes.resize(n, L);
  rule.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < L; ++l)
      rule.nodes(i, l) = normal_icdf(halton_point(i + 1 + skip, primes[l]));
  return rule;
}

QuadratureRule make_rule(QuadratureKind kind, int n_nodes, int L) {
  switch (kind) {
    case QuadratureKind::gauss_hermite:
      return gauss_hermite_product(n_nodes, L);
    case QuadratureKind::halton:
      return halton_normal(n_nodes, L);
    case QuadratureKind::automatic:
    default:
      if (L <= 3) return gauss_hermite_product(n_nodes, L);
      return halton_normal(n_nodes * 16, L);
  }
}

}  // namespace lsmd
