#include <doctest.h>

#include <cmath>

#include "lsmd/errors.hpp"
#include "lsmd/estimator.hpp"
#include "lsmd/linalg.hpp"
#include "lsmd/montecarlo.hpp"
#include "lsmd/rng.hpp"
#include "oracles.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lsmd::AffineDeltaMap;
using lsmd::LsmdEstimate;
using lsmd::OuterProblem;
using lsmd::WeightMatrix;

namespace {

MatrixXd random_matrix(int J, int T, lsmd::CounterRng& rng) {
  MatrixXd m(J, T);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < J; ++j) m(j, t) = rng.next_normal();
  return m;
}

// noiseless one-factor price panel: the estimator must recover the truth
std::pair<lsmd::PanelData, lsmd::RandomCoeffSpec> noiseless_panel(
    int J, int T, double alpha0, double beta0, std::uint64_t seed) {
  lsmd::McConfig cfg;
  cfg.J = J;
  cfg.T = T;
  cfg.alpha0 = alpha0;
  cfg.beta0 = beta0;
  auto [panel, truth] = lsmd::generate_dgp(cfg, seed);
  lsmd::RandomCoeffSpec spec = lsmd::dgp_spec(cfg);
  MatrixXd delta0 = truth.delta0 - truth.e;  // drop the idiosyncratic error
  lsmd::QuadratureRule rule = spec.rule();
  VectorXd a0 = VectorXd::Constant(1, alpha0);
  for (int t = 0; t < T; ++t) {
    lsmd::MarketShareMap map(panel.x_slice(t), a0, spec, rule);
    panel.shares.col(t) = map.shares(delta0.col(t));
  }
  return {panel, spec};
}

}  // namespace

TEST_CASE("outer minimization on a linear map reproduces two-stage least squares") {
  lsmd::CounterRng rng(404);
  const int J = 9, T = 7;
  const long n = J * T;
  // y = alpha0 * Y2 + e, Y2 correlated with z and with e
  MatrixXd z1 = random_matrix(J, T, rng), z2 = random_matrix(J, T, rng);
  MatrixXd e = random_matrix(J, T, rng);
  MatrixXd Y2 = 0.8 * z1 - 0.6 * z2 + 0.5 * e + 0.3 * random_matrix(J, T, rng);
  const double alpha0 = 1.3;
  MatrixXd y = alpha0 * Y2 + e;

  AffineDeltaMap map(y, {Y2});
  MatrixXd zmat(n, 2);
  zmat.col(0) = Eigen::Map<const VectorXd>(z1.data(), n);
  zmat.col(1) = Eigen::Map<const VectorXd>(z2.data(), n);

  OuterProblem prob;
  prob.map = &map;
  prob.Z = {z1, z2};
  prob.R = 0;
  prob.W = {zmat.transpose() * zmat, WeightMatrix::Kind::user};
  prob.lo = VectorXd::Constant(1, -3.0);
  prob.hi = VectorXd::Constant(1, 5.0);
  lsmd::OuterSolution sol = lsmd::minimize_outer(prob, {}, {});

  VectorXd yv = Eigen::Map<const VectorXd>(y.data(), n);
  MatrixXd Wv = Eigen::Map<const VectorXd>(Y2.data(), n);
  oracles::TwoSlsFit tsls = oracles::two_sls(yv, Wv, zmat);
  CHECK(sol.outer(0) == doctest::Approx(tsls.coef(0)).epsilon(1e-6));

  // scaling the weight rescales the objective but not the minimizer
  OuterProblem scaled = prob;
  scaled.W.W *= 7.0;
  lsmd::OuterSolution sol7 = lsmd::minimize_outer(scaled, {}, {});
  CHECK(sol7.outer(0) == doctest::Approx(sol.outer(0)).epsilon(1e-10));
  CHECK(sol7.step2_value == doctest::Approx(7.0 * sol.step2_value).epsilon(1e-9));
}

TEST_CASE("exogenous-regressor variant of the linear map matches 2SLS with included x") {
  lsmd::CounterRng rng(405);
  const int J = 8, T = 8;
  const long n = J * T;
  MatrixXd x = random_matrix(J, T, rng);
  MatrixXd z = random_matrix(J, T, rng);
  MatrixXd e = random_matrix(J, T, rng);
  MatrixXd Y2 = 0.9 * z + 0.4 * x + 0.5 * e + 0.2 * random_matrix(J, T, rng);
  const double alpha0 = -0.7, beta0 = 2.0;
  MatrixXd y = alpha0 * Y2 + beta0 * x + e;

  AffineDeltaMap map(y, {Y2});
  MatrixXd xv = Eigen::Map<const VectorXd>(x.data(), n);
  MatrixXd zv = Eigen::Map<const VectorXd>(z.data(), n);

  OuterProblem prob;
  prob.map = &map;
  prob.X1 = {x};
  prob.Z = {z};
  prob.R = 0;
  MatrixXd W = zv.transpose() * (zv - xv * (xv.transpose() * xv).ldlt().solve(
                                            xv.transpose() * zv));
  prob.W = {W, WeightMatrix::Kind::user};
  prob.lo = VectorXd::Constant(1, -4.0);
  prob.hi = VectorXd::Constant(1, 4.0);
  lsmd::OuterSolution sol = lsmd::minimize_outer(prob, {}, {});

  MatrixXd regs(n, 2);
  regs << Eigen::Map<const VectorXd>(Y2.data(), n), xv;
  MatrixXd instruments(n, 2);
  instruments << zv, xv;
  oracles::TwoSlsFit tsls = oracles::two_sls(
      Eigen::Map<const VectorXd>(y.data(), n), regs, instruments);
  CHECK(sol.outer(0) == doctest::Approx(tsls.coef(0)).epsilon(1e-6));
  CHECK(sol.fit.beta(0) == doctest::Approx(tsls.coef(1)).epsilon(1e-6));
}

TEST_CASE("noiseless factor data is recovered exactly") {
  auto [panel, spec] = noiseless_panel(10, 9, 1.0, -3.0, 31);
  WeightMatrix W = WeightMatrix::identity(1);
  LsmdEstimate fit = lsmd::estimate(panel, spec, 1, W, {});
  CHECK(fit.alpha(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(fit.beta(0) == doctest::Approx(-3.0).epsilon(1e-5));
  CHECK(fit.step2_value < 1e-10);
  CHECK_FALSE(fit.boundary);

  // step-2 value vanishes at the truth and scales with the weight
  lsmd::StepOneFit s1;
  double v1 = lsmd::step2_objective(VectorXd::Constant(1, 1.0), panel, spec, 1,
                                    W, {}, &s1);
  CHECK(v1 < 1e-12);
  CHECK(std::fabs(s1.gamma(0)) < 1e-6);
  WeightMatrix W2 = {2.0 * MatrixXd::Identity(1, 1), WeightMatrix::Kind::user};
  double v2 = lsmd::step2_objective(VectorXd::Constant(1, 1.3), panel, spec, 1,
                                    W, {});
  double v2b = lsmd::step2_objective(VectorXd::Constant(1, 1.3), panel, spec,
                                     1, W2, {});
  CHECK(v2b == doctest::Approx(2.0 * v2).epsilon(1e-9));

  // step-3 coefficient equals the step-1 coefficient when gamma vanishes
  MatrixXd delta = lsmd::invert_shares_all(panel, fit.alpha, spec);
  lsmd::StepOneFit with_z = lsmd::inner_ls(delta, panel.X, panel.Z, 1);
  CHECK(fit.beta(0) == doctest::Approx(with_z.beta(0)).epsilon(1e-6));

  // residual identity: residuals reproduce from the stored components
  MatrixXd rebuilt = fit.delta_hat - fit.beta(0) * panel.X[0] -
                     fit.factors.common();
  CHECK((rebuilt - fit.residuals).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("estimation is deterministic") {
  lsmd::McConfig cfg;
  cfg.J = 8;
  cfg.T = 8;
  auto [panel, truth] = lsmd::generate_dgp(cfg, 5150);
  lsmd::RandomCoeffSpec spec = lsmd::dgp_spec(cfg);
  WeightMatrix W = WeightMatrix::identity(1);
  LsmdEstimate a = lsmd::estimate(panel, spec, 1, W, {});
  LsmdEstimate b = lsmd::estimate(panel, spec, 1, W, {});
  CHECK(a.alpha(0) == b.alpha(0));
  CHECK(a.beta(0) == b.beta(0));
  CHECK(a.step2_value == b.step2_value);
}

TEST_CASE("boundary solutions are flagged, not fatal") {
  auto [panel, spec] = noiseless_panel(8, 8, 1.0, -3.0, 63);
  spec.alpha_hi = VectorXd::Constant(1, 0.2);  // box excludes the truth
  LsmdEstimate fit =
      lsmd::estimate(panel, spec, 1, WeightMatrix::identity(1), {});
  CHECK(fit.boundary);
}

TEST_CASE("under-identified setups are rejected") {
  lsmd::McConfig cfg;
  cfg.J = 6;
  cfg.T = 6;
  auto [panel, truth] = lsmd::generate_dgp(cfg, 8);
  lsmd::RandomCoeffSpec spec = lsmd::dgp_spec(cfg);
  panel.Z.clear();
  panel.z_names.clear();
  CHECK_THROWS_AS(
      lsmd::estimate(panel, spec, 1, WeightMatrix::identity(0), {}),
      lsmd::UnderIdentified);
}

TEST_CASE("endogenous variant reduces to the exogenous one when nothing is flagged") {
  lsmd::McConfig cfg;
  cfg.J = 9;
  cfg.T = 7;
  auto [panel, truth] = lsmd::generate_dgp(cfg, 77);
  lsmd::RandomCoeffSpec spec = lsmd::dgp_spec(cfg);
  WeightMatrix W = WeightMatrix::identity(1);
  LsmdEstimate a = lsmd::estimate(panel, spec, 1, W, {});
  LsmdEstimate b = lsmd::estimate_endogenous(panel, spec, 1, W, VectorXd(),
                                             VectorXd(), {});
  CHECK(a.alpha(0) == b.alpha(0));
  CHECK(a.beta(0) == b.beta(0));
}

TEST_CASE("endogenous no-factor run matches the concentrated moment estimator") {
  // factor-free design with price endogenous through the error
  lsmd::CounterRng rng(280);
  const int J = 10, T = 10;
  const long n = J * T;
  MatrixXd shock = random_matrix(J, T, rng);
  MatrixXd e = 0.5 * random_matrix(J, T, rng);
  MatrixXd price = (1.5 + shock.array() + 0.8 * e.array()).max(0.2).matrix();
  const double alpha0 = 0.8, beta0 = -2.5;
  MatrixXd delta0 = beta0 * price + e;

  lsmd::PanelData panel;
  panel.J = J;
  panel.T = T;
  panel.X = {price};
  panel.Z = {shock, shock.array().square().matrix()};
  panel.exogenous = {false};
  lsmd::RandomCoeffSpec spec;
  spec.rc_index = {0};
  spec.n_nodes = 32;
  spec.alpha_lo = VectorXd::Constant(1, 0.0);
  spec.alpha_hi = VectorXd::Constant(1, 3.0);
  lsmd::QuadratureRule rule = spec.rule();
  VectorXd a0 = VectorXd::Constant(1, alpha0);
  panel.shares.resize(J, T);
  for (int t = 0; t < T; ++t) {
    lsmd::MarketShareMap map(panel.x_slice(t), a0, spec, rule);
    panel.shares.col(t) = map.shares(delta0.col(t));
  }
  for (int j = 0; j < J; ++j) panel.product_labels.push_back("p" + std::to_string(j));
  for (int t = 0; t < T; ++t) panel.market_labels.push_back("m" + std::to_string(t));

  MatrixXd zmat(n, 2);
  zmat.col(0) = Eigen::Map<const VectorXd>(panel.Z[0].data(), n);
  zmat.col(1) = Eigen::Map<const VectorXd>(panel.Z[1].data(), n);
  WeightMatrix W = {zmat.transpose() * zmat / double(n),
                    WeightMatrix::Kind::user};

  lsmd::EstimatorOpts opts;
  LsmdEstimate fit = lsmd::estimate_endogenous(
      panel, spec, 0, W, VectorXd::Constant(1, -6.0),
      VectorXd::Constant(1, 2.0), opts);

  // oracle: nested-moment estimator with the price coefficient concentrated
  MatrixXd Pz = zmat * (zmat.transpose() * zmat)
                           .ldlt()
                           .solve(zmat.transpose());
  VectorXd pvec = Eigen::Map<const VectorXd>(price.data(), n);
  lsmd::ShareInversionOpts inv;
  auto concentrated = [&](double a) {
    MatrixXd d =
        lsmd::invert_shares_all(panel, VectorXd::Constant(1, a), spec, inv);
    VectorXd dv = Eigen::Map<const VectorXd>(d.data(), n);
    double b = (pvec.dot(Pz * pvec)) == 0.0
                   ? 0.0
                   : pvec.dot(Pz * dv) / pvec.dot(Pz * pvec);
    VectorXd resid = dv - b * pvec;
    return std::pair<double, double>(resid.dot(Pz * resid), b);
  };
  lsmd::ScalarMinResult gm = lsmd::minimize_scalar(
      [&](double a) { return concentrated(a).first; }, 0.0, 3.0, 17, 1e-7);

  CHECK(fit.alpha(0) == doctest::Approx(gm.x).epsilon(5e-3));
  CHECK(fit.beta(0) == doctest::Approx(concentrated(gm.x).second).epsilon(5e-3));
  CHECK(fit.alpha(0) == doctest::Approx(alpha0).epsilon(0.25));
  CHECK(fit.beta(0) == doctest::Approx(beta0).epsilon(0.25));
}

TEST_CASE("optimal weight reduces to the residualized instrument gram at R = 0") {
  lsmd::McConfig cfg;
  cfg.J = 10;
  cfg.T = 8;
  auto [panel, truth] = lsmd::generate_dgp(cfg, 15);
  lsmd::RandomCoeffSpec spec = lsmd::dgp_spec(cfg);
  WeightMatrix W = WeightMatrix::identity(1);
  LsmdEstimate fit0 = lsmd::estimate(panel, spec, 0, W, {});
  WeightMatrix opt = lsmd::optimal_weight(panel, 0, fit0);
  WeightMatrix blp = lsmd::blp_empirical_weight(panel);
  CHECK((opt.W - blp.W).cwiseAbs().maxCoeff() < 1e-10);

  // with factors: still symmetric positive definite
  LsmdEstimate fit1 = lsmd::estimate(panel, spec, 1, W, {});
  WeightMatrix opt1 = lsmd::optimal_weight(panel, 1, fit1);
  CHECK((opt1.W - opt1.W.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(opt1.W);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("step-one coefficient is noisier than the final one across replications") {
  lsmd::McConfig cfg;
  cfg.J = 12;
  cfg.T = 12;
  cfg.n_nodes = 32;
  lsmd::RandomCoeffSpec spec = lsmd::dgp_spec(cfg);
  WeightMatrix W = WeightMatrix::identity(1);
  const int reps = 24;
  std::vector<double> beta3(reps), beta1(reps);
  for (int r = 0; r < reps; ++r) {
    auto [panel, truth] = lsmd::generate_dgp(cfg, 9000 + r);
    LsmdEstimate fit = lsmd::estimate(panel, spec, 1, W, {});
    MatrixXd delta = lsmd::invert_shares_all(panel, fit.alpha, spec);
    lsmd::StepOneFit s1 = lsmd::inner_ls(delta, panel.X, panel.Z, 1);
    beta3[r] = fit.beta(0);
    beta1[r] = s1.beta(0);
  }
  auto sd = [&](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / v.size());
  };
  CHECK(sd(beta3) <= sd(beta1) * 1.15);
}
