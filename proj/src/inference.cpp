#include "lsmd/inference.hpp"

#include <algorithm>
#include <cmath>

#include "lsmd/errors.hpp"
#include "lsmd/linalg.hpp"

namespace lsmd {

MatrixXd gradient_delta(const VectorXd& alpha_hat, const PanelData& panel,
                        const RandomCoeffSpec& spec, double fd_step) {
  const int L = spec.L();
  if (alpha_hat.size() != L)
    throw DimensionError("gradient_delta: alpha length does not match spec");
  const long n = static_cast<long>(panel.J) * panel.T;
  MatrixXd g(n, L);
  ShareInversionOpts opts;
  for (int l = 0; l < L; ++l) {
    double h = fd_step * (1.0 + std::fabs(alpha_hat(l)));
    VectorXd ap = alpha_hat, am = alpha_hat;
    ap(l) += h;
    am(l) -= h;
    MatrixXd dp = invert_shares_all(panel, ap, spec, opts);
    MatrixXd dm = invert_shares_all(panel, am, spec, opts);
    MatrixXd grad = (dp - dm) / (2.0 * h);
    g.col(l) = -Eigen::Map<const VectorXd>(grad.data(), n);
  }
  return g;
}

namespace {

MatrixXd stack_columns(const std::vector<MatrixXd>& mats, long n) {
  MatrixXd out(n, static_cast<long>(mats.size()));
  for (size_t i = 0; i < mats.size(); ++i)
    out.col(static_cast<long>(i)) =
        Eigen::Map<const VectorXd>(mats[i].data(), n);
  return out;
}

// banded cross-moment (1/J) sum_j A_{jt} e_{j tau}, kept for 0 < t - tau <= h
MatrixXd banded_cross(const MatrixXd& A, const MatrixXd& e, int h) {
  const int T = static_cast<int>(A.cols());
  const double J = static_cast<double>(A.rows());
  MatrixXd out = MatrixXd::Zero(T, T);
  for (int t = 0; t < T; ++t)
    for (int tau = std::max(0, t - h); tau < t; ++tau)
      out(t, tau) = A.col(t).dot(e.col(tau)) / J;
  return out;
}

}  // namespace

InferenceReport bias_variance_core(const MatrixXd& e_hat,
                                   const FactorEstimate& factors,
                                   const std::vector<MatrixXd>& X1,
                                   const std::vector<MatrixXd>& Z,
                                   const MatrixXd& g_hat,
                                   const VectorXd& outer_raw,
                                   const VectorXd& beta1, const MatrixXd& W_JT,
                                   int bandwidth) {
  const int J = static_cast<int>(e_hat.rows());
  const int T = static_cast<int>(e_hat.cols());
  const long n = static_cast<long>(J) * T;
  const int K1 = static_cast<int>(X1.size());
  const int M = static_cast<int>(Z.size());
  const int Lout = static_cast<int>(outer_raw.size());
  const int P = Lout + K1;
  if (bandwidth < 0 || bandwidth >= T)
    throw DimensionError("bias_variance: need 0 <= h < T");
  if (g_hat.rows() != n || g_hat.cols() != Lout)
    throw DimensionError("bias_variance: gradient block has wrong shape");

  const MatrixXd& lam = factors.lambda;
  const MatrixXd& f = factors.f;
  MatrixXd Ml = proj_orth(lam);
  MatrixXd Mf = proj_orth(f);
  MatrixXd Pf = proj_onto(f);
  MatrixXd lam_gram_inv = pseudo_inverse_sym(lam.transpose() * lam);
  MatrixXd f_gram_inv = pseudo_inverse_sym(f.transpose() * f);

  std::vector<MatrixXd> X1_lf(K1), Z_lf(M);
  for (int k = 0; k < K1; ++k) X1_lf[k] = Ml * X1[k] * Mf;
  for (int m = 0; m < M; ++m) Z_lf[m] = Ml * Z[m] * Mf;
  MatrixXd xlf = stack_columns(X1_lf, n);
  MatrixXd zlf = stack_columns(Z_lf, n);
  MatrixXd C(n, K1 + M);
  C << xlf, zlf;

  InferenceReport rep;
  rep.J = J;
  rep.T = T;
  rep.bandwidth = bandwidth;

  rep.G.resize(P, K1 + M);
  rep.G.topRows(Lout) = g_hat.transpose() * C / static_cast<double>(n);
  rep.G.bottomRows(K1) = xlf.transpose() * C / static_cast<double>(n);

  VectorXd e2 = Eigen::Map<const VectorXd>(e_hat.data(), n).array().square();
  rep.Omega = C.transpose() * e2.asDiagonal() * C / static_cast<double>(n);

  // partitioned weight: step-one normal equations folded with W_JT
  MatrixXd Sxx_inv = pseudo_inverse_sym(xlf.transpose() * xlf);
  MatrixXd zMxz = zlf.transpose() * zlf;
  if (K1 > 0) {
    MatrixXd xz = xlf.transpose() * zlf;
    zMxz -= xz.transpose() * Sxx_inv * xz;
  }
  MatrixXd zMxz_inv_n = pseudo_inverse_sym(zMxz / static_cast<double>(n));
  MatrixXd CC(K1 + M, M);
  if (K1 > 0) CC.topRows(K1) = -Sxx_inv * (xlf.transpose() * zlf);
  CC.bottomRows(M) = MatrixXd::Identity(M, M);
  rep.Wcal = MatrixXd::Zero(K1 + M, K1 + M);
  rep.Wcal.topLeftCorner(K1, K1) =
      pseudo_inverse_sym(xlf.transpose() * xlf / static_cast<double>(n));
  rep.Wcal += CC * zMxz_inv_n * W_JT * zMxz_inv_n * CC.transpose();

  // variance profiles and banded covariances of the residuals
  MatrixXd e2m = e_hat.array().square();
  VectorXd sig1 = e2m.rowwise().mean();  // J
  VectorXd sig2 = e2m.colwise().mean();  // T

  auto bias_triple = [&](const MatrixXd& A) {
    Eigen::Vector3d b;
    b(0) = (Pf * banded_cross(A, e_hat, bandwidth)).trace();
    MatrixXd U1 = Ml * A * f * f_gram_inv * lam_gram_inv;  // J x R
    double b1 = 0.0;
    for (int j = 0; j < J; ++j) b1 += sig1(j) * U1.row(j).dot(lam.row(j));
    b(1) = b1;
    MatrixXd U2 = Mf * A.transpose() * lam * lam_gram_inv * f_gram_inv;  // T x R
    double b2 = 0.0;
    for (int t = 0; t < T; ++t) b2 += sig2(t) * U2.row(t).dot(f.row(t));
    b(2) = b2;
    return b;
  };

  rep.b_x.resize(K1, 3);
  for (int k = 0; k < K1; ++k) rep.b_x.row(k) = bias_triple(X1[k]).transpose();
  rep.b_z.resize(M, 3);
  for (int m = 0; m < M; ++m) rep.b_z.row(m) = bias_triple(Z[m]).transpose();

  MatrixXd GW = rep.G * rep.Wcal;
  MatrixXd GWG = GW * rep.G.transpose();
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(GWG, Eigen::EigenvaluesOnly);
    double emin = es.eigenvalues().minCoeff();
    double emax = es.eigenvalues().maxCoeff();
    rep.cond_GWG = (emin > 0.0) ? emax / emin
                                : std::numeric_limits<double>::infinity();
    if (!(rep.cond_GWG < 1e12))
      throw SingularG("bias_variance: G W G' is ill-conditioned");
  }
  Eigen::LDLT<MatrixXd> gwg(GWG);

  MatrixXd B_theory(P, 3);
  for (int i = 0; i < 3; ++i) {
    VectorXd b(K1 + M);
    b << rep.b_x.col(i), rep.b_z.col(i);
    B_theory.col(i) = -gwg.solve(GW * b);
  }
  MatrixXd cov_theory =
      gwg.solve(GW * rep.Omega * GW.transpose()).transpose();
  cov_theory = gwg.solve(cov_theory);
  cov_theory = 0.5 * (cov_theory + cov_theory.transpose());

  VectorXd raw_theory(P);
  raw_theory << outer_raw, beta1;
  VectorXd corr_theory = raw_theory - B_theory.col(0) / T -
                         B_theory.col(1) / J - B_theory.col(2) / T;

  // theory order is (alpha, beta_end, beta1); reports keep that order, the
  // caller permutes into panel order if needed
  rep.raw = raw_theory;
  rep.corrected = corr_theory;
  rep.B = B_theory;
  rep.covariance = cov_theory;
  rep.se = (cov_theory.diagonal() / static_cast<double>(n)).cwiseSqrt();
  rep.t_stats = rep.corrected.cwiseQuotient(rep.se);
  return rep;
}

ProjectedDesign projected_design(const LsmdEstimate& fit,
                                 const PanelData& panel,
                                 const RandomCoeffSpec& spec, double fd_step) {
  const long n = static_cast<long>(panel.J) * panel.T;
  const int L = spec.L();
  const int K2 = static_cast<int>(fit.endogenous.size());
  MatrixXd Ml = proj_orth(fit.factors.lambda);
  MatrixXd Mf = proj_orth(fit.factors.f);

  ProjectedDesign pd;
  std::vector<int> exog;
  for (int k = 0; k < panel.K(); ++k)
    if (std::find(fit.endogenous.begin(), fit.endogenous.end(), k) ==
        fit.endogenous.end())
      exog.push_back(k);
  pd.x_lf.resize(n, static_cast<long>(exog.size()));
  for (size_t i = 0; i < exog.size(); ++i) {
    MatrixXd proj = Ml * panel.X[exog[i]] * Mf;
    pd.x_lf.col(static_cast<long>(i)) =
        Eigen::Map<const VectorXd>(proj.data(), n);
  }
  pd.z_lf.resize(n, panel.M());
  for (int m = 0; m < panel.M(); ++m) {
    MatrixXd proj = Ml * panel.Z[m] * Mf;
    pd.z_lf.col(m) = Eigen::Map<const VectorXd>(proj.data(), n);
  }
  pd.g_hat.resize(n, L + K2);
  pd.g_hat.leftCols(L) = gradient_delta(fit.alpha, panel, spec, fd_step);
  for (int k = 0; k < K2; ++k)
    pd.g_hat.col(L + k) =
        Eigen::Map<const VectorXd>(panel.X[fit.endogenous[k]].data(), n);
  return pd;
}

InferenceReport bias_variance(const LsmdEstimate& fit, const PanelData& panel,
                              const RandomCoeffSpec& spec,
                              const WeightMatrix& W_used,
                              const InferenceOpts& opts) {
  const long n = static_cast<long>(panel.J) * panel.T;
  const int L = spec.L();
  const int K2 = static_cast<int>(fit.endogenous.size());

  std::vector<int> exog;
  for (int k = 0; k < panel.K(); ++k)
    if (std::find(fit.endogenous.begin(), fit.endogenous.end(), k) ==
        fit.endogenous.end())
      exog.push_back(k);

  MatrixXd g(n, L + K2);
  g.leftCols(L) = gradient_delta(fit.alpha, panel, spec, opts.fd_step);
  // coefficients moved to the outer step contribute their regressor columns
  for (int k = 0; k < K2; ++k)
    g.col(L + k) =
        Eigen::Map<const VectorXd>(panel.X[fit.endogenous[k]].data(), n);

  std::vector<MatrixXd> X1;
  VectorXd beta1(exog.size());
  for (size_t i = 0; i < exog.size(); ++i) {
    X1.push_back(panel.X[exog[i]]);
    beta1(static_cast<long>(i)) = fit.beta(exog[i]);
  }
  VectorXd outer_raw(L + K2);
  outer_raw.head(L) = fit.alpha;
  for (int k = 0; k < K2; ++k) outer_raw(L + k) = fit.beta(fit.endogenous[k]);

  InferenceReport rep =
      bias_variance_core(fit.residuals, fit.factors, X1, panel.Z, g, outer_raw,
                         beta1, W_used.W, opts.bandwidth);

  // permute (alpha, beta_end, beta_exog) -> (alpha, beta in panel order)
  const int P = L + panel.K();
  Eigen::VectorXi perm(P);  // perm(target) = theory index
  for (int l = 0; l < L; ++l) perm(l) = l;
  for (int k2 = 0; k2 < K2; ++k2) perm(L + fit.endogenous[k2]) = L + k2;
  for (size_t i = 0; i < exog.size(); ++i)
    perm(L + exog[i]) = L + K2 + static_cast<int>(i);

  auto pvec = [&](const VectorXd& v) {
    VectorXd out(P);
    for (int i = 0; i < P; ++i) out(i) = v(perm(i));
    return out;
  };
  MatrixXd cov(P, P), B(P, 3);
  for (int i = 0; i < P; ++i) {
    B.row(i) = rep.B.row(perm(i));
    for (int j = 0; j < P; ++j) cov(i, j) = rep.covariance(perm(i), perm(j));
  }
  rep.raw = pvec(rep.raw);
  rep.corrected = pvec(rep.corrected);
  rep.se = pvec(rep.se);
  rep.t_stats = pvec(rep.t_stats);
  rep.covariance = cov;
  rep.B = B;

  rep.names.clear();
  for (int l = 0; l < L; ++l)
    rep.names.push_back(L == 1 ? "alpha" : "alpha_" + std::to_string(l + 1));
  for (int k = 0; k < panel.K(); ++k)
    rep.names.push_back(k < static_cast<int>(panel.x_names.size())
                            ? panel.x_names[k]
                            : "x_" + std::to_string(k + 1));
  return rep;
}

}  // namespace lsmd
