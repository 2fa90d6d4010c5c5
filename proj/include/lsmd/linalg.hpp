#pragma once

#include <Eigen/Dense>

#include "lsmd/errors.hpp"

// Small dense linear-algebra helpers shared across the library. Projectors
// use an eigenvalue-thresholded pseudo-inverse so rank-deficient (or empty)
// column blocks are handled without special cases.

namespace lsmd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Pseudo-inverse of a symmetric PSD matrix. Eigenvalues below
// rel_tol * max eigenvalue are treated as zero.
template <typename Derived>
MatrixXd pseudo_inverse_sym(const Eigen::MatrixBase<Derived>& S,
                            double rel_tol = 1e-10) {
  if (S.rows() == 0) return MatrixXd(0, 0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  const VectorXd& ev = es.eigenvalues();
  double cut = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  VectorXd inv = VectorXd::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > cut) inv(i) = 1.0 / ev(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// P_A = A (A'A)^+ A'. A may have zero columns (P = 0) or deficient rank.
template <typename Derived>
MatrixXd proj_onto(const Eigen::MatrixBase<Derived>& A, double rel_tol = 1e-10) {
  if (A.cols() == 0) return MatrixXd::Zero(A.rows(), A.rows());
  MatrixXd AtA = A.transpose() * A;
  return A * pseudo_inverse_sym(AtA, rel_tol) * A.transpose();
}

// M_A = I - P_A.
template <typename Derived>
MatrixXd proj_orth(const Eigen::MatrixBase<Derived>& A, double rel_tol = 1e-10) {
  return MatrixXd::Identity(A.rows(), A.rows()) - proj_onto(A, rel_tol);
}

// Eigenvalues of the Gram matrix of Y, descending. Decomposes the smaller
// of Y'Y and YY' (they share nonzero spectrum).
template <typename Derived>
VectorXd gram_eigenvalues(const Eigen::MatrixBase<Derived>& Y) {
  MatrixXd G;
  if (Y.cols() <= Y.rows())
    G.noalias() = Y.transpose() * Y;
  else
    G.noalias() = Y * Y.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
  return es.eigenvalues().reverse();
}

// Sum of the eigenvalues of Y'Y beyond the R largest. Equals the squared
// Frobenius distance from Y to the best rank-R approximation.
template <typename Derived>
double trailing_eigenvalue_sum(const Eigen::MatrixBase<Derived>& Y, int R) {
  const int n = static_cast<int>(std::min(Y.rows(), Y.cols()));
  if (R < 0 || R >= n)
    throw DimensionError("trailing_eigenvalue_sum: need 0 <= R < min(J,T)");
  MatrixXd G;
  if (Y.cols() <= Y.rows())
    G.noalias() = Y.transpose() * Y;
  else
    G.noalias() = Y * Y.transpose();
  if (R == 0) return G.trace();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
  double top = es.eigenvalues().tail(R).sum();
  return std::max(0.0, G.trace() - top);
}

}  // namespace lsmd
