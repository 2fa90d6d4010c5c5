#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace lsmd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Rank-R factor component. Only the product lambda * f' is identified;
// any invertible R x R rotation of (lambda, f) is observationally
// equivalent.
struct FactorEstimate {
  MatrixXd lambda;  // J x R
  MatrixXd f;       // T x R

  int R() const { return static_cast<int>(lambda.cols()); }
  MatrixXd common() const { return lambda * f.transpose(); }
};

// min over rank-R matrices L of ||Y - L||_F^2, i.e. the sum of the
// eigenvalues of Y'Y beyond the R largest.
double profiled_objective(const MatrixXd& Y, int R);

// Principal-components extraction: lambda = sqrt(J) times the top-R
// eigenvectors of YY'/(JT), f = Y' lambda (lambda'lambda)^{-1}. The
// product lambda f' is the best rank-R approximation of Y.
FactorEstimate principal_components(const MatrixXd& Y, int R);

struct InnerOpts {
  int n_starts = 5;           // 1 = OLS start, rest are perturbations of it
  double grad_tol = 1e-8;     // scaled by 1 + |objective|
  int max_iter = 300;
  double fd_step = 1e-7;
  std::uint64_t perturb_seed = 0x1f2e3d4c;
  double collinearity_tol = 1e-12;  // on min eigenvalue of the design Gram
};

struct StartRecord {
  int start = 0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool used_nelder_mead = false;
};

// Step-one fit at fixed taste parameters: coefficients on the regressors
// and the auxiliary instrument coefficients, with the factors profiled out.
struct StepOneFit {
  VectorXd beta;   // K
  VectorXd gamma;  // M
  FactorEstimate factors;
  double objective = 0.0;
  std::vector<StartRecord> optimizer_trace;
};

// Minimizes the profiled objective of delta - beta.X - gamma.Z over
// (beta, gamma) by multi-start BFGS (Nelder-Mead fallback for stalled
// starts), then recovers the factors by principal components. R = 0
// reduces to closed-form least squares. warm_start, when given, replaces
// the perturbation starts with a single warm start alongside the OLS one.
StepOneFit inner_ls(const MatrixXd& delta, const std::vector<MatrixXd>& X,
                    const std::vector<MatrixXd>& Z, int R,
                    const InnerOpts& opts = {},
                    const VectorXd* warm_start = nullptr);

}  // namespace lsmd
