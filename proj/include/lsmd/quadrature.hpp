#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace lsmd {

// Integration rule for E[f(v)] with v a vector of independent standard
// normals; taste scales multiply the nodes downstream. Weights are
// positive and normalized to sum to one.
struct QuadratureRule {
  Eigen::MatrixXd nodes;    // Q x L, standard-normal space
  Eigen::VectorXd weights;  // Q

  int count() const { return static_cast<int>(nodes.rows()); }
  int dim() const { return static_cast<int>(nodes.cols()); }
};

enum class QuadratureKind {
  automatic,      // Gauss-Hermite product for L <= 3, Halton beyond
  gauss_hermite,  // tensor product, n nodes per dimension
  halton          // inverse-CDF quasi-random draws, n total
};

// One-dimensional Gauss-Hermite rule mapped to the standard normal
// (Golub-Welsch on the Hermite Jacobi matrix, then v = sqrt(2) x).
QuadratureRule gauss_hermite_normal(int n);

// Tensor product of the 1-D rule over L dimensions (n^L points).
QuadratureRule gauss_hermite_product(int n_per_dim, int L);

// Deterministic Halton sequence pushed through the normal inverse CDF.
QuadratureRule halton_normal(int n, int L, int skip = 20);

QuadratureRule make_rule(QuadratureKind kind, int n_nodes, int L);

}  // namespace lsmd
