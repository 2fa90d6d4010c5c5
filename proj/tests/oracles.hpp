#pragma once

// Test-only brute-force oracles. These deliberately avoid the library's
// production code paths so both routes can be compared in tests.

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "lsmd/linalg.hpp"
#include "lsmd/optim.hpp"
#include "lsmd/rng.hpp"

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// min over rank-R L of ||Y - L||_F^2 by alternating least squares from
// several random starts.
inline double als_rank_approx(const MatrixXd& Y, int R, int n_starts = 12,
                              int iters = 600, std::uint64_t seed = 99) {
  if (R == 0) return Y.squaredNorm();
  const int J = static_cast<int>(Y.rows());
  const int T = static_cast<int>(Y.cols());
  lsmd::CounterRng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_starts; ++s) {
    MatrixXd lam(J, R), f(T, R);
    for (int j = 0; j < J; ++j)
      for (int r = 0; r < R; ++r) lam(j, r) = rng.next_normal();
    for (int it = 0; it < iters; ++it) {
      // f given lambda, then lambda given f
      f = Y.transpose() * lam * lsmd::pseudo_inverse_sym(lam.transpose() * lam);
      lam = Y * f * lsmd::pseudo_inverse_sym(f.transpose() * f);
    }
    best = std::min(best, (Y - lam * f.transpose()).squaredNorm());
  }
  return best;
}

// max over lambda in R^{J x R} of sum_t xi_t' P_{(lambda, lambda0)} xi_t by
// Nelder-Mead over the free loadings, restarted and re-polished.
inline double max_over_loadings(const MatrixXd& xi, const MatrixXd& lambda0,
                                int R, int n_starts = 30,
                                std::uint64_t seed = 7) {
  const int J = static_cast<int>(xi.rows());
  auto value = [&](const VectorXd& v) {
    MatrixXd both(J, lambda0.cols() + R);
    if (lambda0.cols() > 0) both.leftCols(lambda0.cols()) = lambda0;
    for (int r = 0; r < R; ++r) both.col(lambda0.cols() + r) = v.segment(r * J, J);
    MatrixXd P = lsmd::proj_onto(both);
    return (xi.transpose() * P * xi).trace();
  };
  if (R == 0) {
    return value(VectorXd());
  }
  lsmd::CounterRng rng(seed);
  double best = -std::numeric_limits<double>::infinity();
  VectorXd best_v;
  for (int s = 0; s < n_starts; ++s) {
    VectorXd v(J * R);
    for (int i = 0; i < v.size(); ++i) v(i) = rng.next_normal();
    lsmd::OptimResult r = lsmd::nelder_mead(
        [&](const VectorXd& p) { return -value(p); }, v, 0.7, 1e-14, 1e-12,
        4000 * J * R);
    if (-r.fx > best) {
      best = -r.fx;
      best_v = r.x;
    }
  }
  // re-polish the winner until no further improvement
  for (int rounds = 0; rounds < 6; ++rounds) {
    lsmd::OptimResult r = lsmd::nelder_mead(
        [&](const VectorXd& p) { return -value(p); }, best_v, 0.05, 1e-15,
        1e-13, 4000 * J * R);
    if (-r.fx <= best + 1e-14) break;
    best = -r.fx;
    best_v = r.x;
  }
  return best;
}

// textbook 2SLS of y on endogenous W with instruments Zbar, plus the
// heteroscedasticity-robust sandwich.
struct TwoSlsFit {
  VectorXd coef;
  MatrixXd cov_robust;  // of sqrt(n) (coef - truth): n * Var(coef)
};

inline TwoSlsFit two_sls(const VectorXd& y, const MatrixXd& W,
                         const MatrixXd& Zbar) {
  const double n = static_cast<double>(y.size());
  MatrixXd Pz = Zbar * (Zbar.transpose() * Zbar).ldlt()
                           .solve(Zbar.transpose());
  MatrixXd What = Pz * W;
  TwoSlsFit fit;
  Eigen::LDLT<MatrixXd> WtW((What.transpose() * W).eval());
  fit.coef = WtW.solve(What.transpose() * y);
  VectorXd resid = y - W * fit.coef;
  MatrixXd meat = MatrixXd::Zero(W.cols(), W.cols());
  for (long i = 0; i < y.size(); ++i)
    meat += resid(i) * resid(i) * What.row(i).transpose() * What.row(i);
  MatrixXd bread_inv = WtW.solve(MatrixXd::Identity(W.cols(), W.cols()));
  fit.cov_robust = n * bread_inv * meat * bread_inv.transpose();
  return fit;
}

}  // namespace oracles
