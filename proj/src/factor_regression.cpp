#include "lsmd/factor_regression.hpp"

#include <cmath>

#include "lsmd/errors.hpp"
#include "lsmd/linalg.hpp"
#include "lsmd/optim.hpp"
#include "lsmd/rng.hpp"

namespace lsmd {

double profiled_objective(const MatrixXd& Y, int R) {
  return trailing_eigenvalue_sum(Y, R);
}

FactorEstimate principal_components(const MatrixXd& Y, int R) {
  const int J = static_cast<int>(Y.rows());
  const int T = static_cast<int>(Y.cols());
  if (R < 0 || R >= std::min(J, T))
    throw DimensionError("principal_components: need 0 <= R < min(J,T)");
  FactorEstimate fe;
  if (R == 0) {
    fe.lambda.resize(J, 0);
    fe.f.resize(T, 0);
    return fe;
  }
  // Work on the smaller Gram side; eigenvectors of YY' follow from those
  // of Y'Y via u = Y v / sqrt(mu).
  MatrixXd U(J, R);
  if (J <= T) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Y * Y.transpose());
    U = es.eigenvectors().rightCols(R).rowwise().reverse();
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(Y.transpose() * Y);
    MatrixXd V = es.eigenvectors().rightCols(R).rowwise().reverse();
    for (int r = 0; r < R; ++r) {
      U.col(r) = Y * V.col(r);
      double norm = U.col(r).norm();
      if (norm > 0) U.col(r) /= norm;
    }
  }
  fe.lambda = std::sqrt(static_cast<double>(J)) * U;
  // lambda'lambda = J * I by construction
  fe.f = Y.transpose() * fe.lambda / static_cast<double>(J);
  return fe;
}

namespace {

// Linear least squares of vec(delta) on the stacked design; returns the
// coefficients and (optionally) their conventional standard errors.
struct OlsFit {
  VectorXd theta;
  VectorXd se;
  double rss = 0.0;
};

OlsFit ols_fit(const VectorXd& y, const MatrixXd& W, double collinearity_tol) {
  const long n = W.rows();
  const int p = static_cast<int>(W.cols());
  MatrixXd G = W.transpose() * W / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  double max_ev = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() <= collinearity_tol * std::max(1.0, max_ev))
    throw CollinearDesign("inner_ls: regressor/instrument design is collinear");
  OlsFit fit;
  Eigen::LDLT<MatrixXd> ldlt(W.transpose() * W);
  fit.theta = ldlt.solve(W.transpose() * y);
  VectorXd resid = y - W * fit.theta;
  fit.rss = resid.squaredNorm();
  double dof = std::max<double>(1.0, static_cast<double>(n - p));
  double sigma2 = fit.rss / dof;
  MatrixXd cov = sigma2 * ldlt.solve(MatrixXd::Identity(p, p));
  fit.se = cov.diagonal().cwiseSqrt();
  return fit;
}

}  // namespace

StepOneFit inner_ls(const MatrixXd& delta, const std::vector<MatrixXd>& X,
                    const std::vector<MatrixXd>& Z, int R, const InnerOpts& opts,
                    const VectorXd* warm_start) {
  const int J = static_cast<int>(delta.rows());
  const int T = static_cast<int>(delta.cols());
  const int K = static_cast<int>(X.size());
  const int M = static_cast<int>(Z.size());
  const int P = K + M;
  if (R < 0 || R >= std::min(J, T))
    throw DimensionError("inner_ls: need 0 <= R < min(J,T)");

  const long n = static_cast<long>(J) * T;
  MatrixXd W(n, P);
  for (int k = 0; k < K; ++k)
    W.col(k) = Eigen::Map<const VectorXd>(X[k].data(), n);
  for (int m = 0; m < M; ++m)
    W.col(K + m) = Eigen::Map<const VectorXd>(Z[m].data(), n);
  VectorXd y = Eigen::Map<const VectorXd>(delta.data(), n);

  StepOneFit out;
  if (P == 0) {
    out.beta.resize(0);
    out.gamma.resize(0);
    out.factors = principal_components(delta, R);
    out.objective = profiled_objective(delta, R);
    return out;
  }

  OlsFit ols = ols_fit(y, W, opts.collinearity_tol);

  auto residual_matrix = [&](const VectorXd& theta) {
    MatrixXd Ymat = delta;
    for (int k = 0; k < K; ++k) Ymat -= theta(k) * X[k];
    for (int m = 0; m < M; ++m) Ymat -= theta(K + m) * Z[m];
    return Ymat;
  };
  auto objective = [&](const VectorXd& theta) {
    return trailing_eigenvalue_sum(residual_matrix(theta), R);
  };

  if (R == 0) {
    // no factors: the profiled objective is the least-squares criterion
    out.beta = ols.theta.head(K);
    out.gamma = ols.theta.tail(M);
    out.factors = principal_components(MatrixXd::Zero(J, T), 0);
    out.objective = objective(ols.theta);
    return out;
  }

  std::vector<VectorXd> starts;
  starts.push_back(ols.theta);
  if (warm_start && warm_start->size() == P) {
    starts.push_back(*warm_start);
  } else {
    CounterRng rng(opts.perturb_seed);
    for (int s = 1; s < opts.n_starts; ++s) {
      VectorXd p = ols.theta;
      for (int i = 0; i < P; ++i) p(i) += ols.se(i) * rng.next_normal();
      starts.push_back(p);
    }
  }

  VectorXd best_x;
  double best_f = std::numeric_limits<double>::infinity();
  bool any_converged = false;
  for (int s = 0; s < static_cast<int>(starts.size()); ++s) {
    OptimResult r = bfgs_minimize(objective, starts[s], opts.grad_tol,
                                  opts.max_iter, opts.fd_step);
    StartRecord rec{s, r.fx, r.iterations, r.converged, false};
    if (!r.converged) {
      // stalled line search, typically near an eigenvalue crossing
      OptimResult nm = nelder_mead(objective, r.x, 0.1, 1e-13, 1e-11,
                                   2000 * P);
      if (nm.fx <= r.fx) {
        r = nm;
        rec.used_nelder_mead = true;
        rec.objective = r.fx;
        rec.iterations += nm.iterations;
        rec.converged = nm.converged;
      }
    }
    out.optimizer_trace.push_back(rec);
    any_converged = any_converged || rec.converged;
    if (r.fx < best_f) {
      best_f = r.fx;
      best_x = r.x;
    }
  }
  if (!any_converged)
    throw NonConvergence("inner_ls: no start converged");

  out.beta = best_x.head(K);
  out.gamma = best_x.tail(M);
  out.factors = principal_components(residual_matrix(best_x), R);
  out.objective = best_f;
  return out;
}

}  // namespace lsmd
