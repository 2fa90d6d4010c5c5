#include "lsmd/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "lsmd/errors.hpp"
#include "lsmd/linalg.hpp"
#include "lsmd/optim.hpp"

namespace lsmd {

void WeightMatrix::validate() const {
  if (W.rows() != W.cols()) throw DimensionError("weight: not square");
  if (W.rows() == 0) return;
  double scale = W.cwiseAbs().maxCoeff();
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
    throw SingularWeight("weight: not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw SingularWeight("weight: not positive definite");
}

BlpDeltaMap::BlpDeltaMap(const PanelData& panel, const RandomCoeffSpec& spec,
                         ShareInversionOpts opts)
    : panel_(panel), spec_(spec), opts_(opts) {}

int BlpDeltaMap::outer_dim() const { return spec_.L(); }

MatrixXd BlpDeltaMap::eval(const VectorXd& alpha) const {
  const MatrixXd* warm = has_warm_ ? &warm_ : nullptr;
  warm_ = invert_shares_all(panel_, alpha, spec_, opts_, warm);
  has_warm_ = true;
  return warm_;
}

void BlpDeltaMap::reset_warm_start() const { has_warm_ = false; }

ShiftedDeltaMap::ShiftedDeltaMap(const DeltaMap& base,
                                 std::vector<MatrixXd> shifted)
    : base_(base), shifted_(std::move(shifted)) {}

int ShiftedDeltaMap::outer_dim() const {
  return base_.outer_dim() + static_cast<int>(shifted_.size());
}

MatrixXd ShiftedDeltaMap::eval(const VectorXd& outer) const {
  const int L = base_.outer_dim();
  MatrixXd d = base_.eval(outer.head(L));
  for (int k = 0; k < static_cast<int>(shifted_.size()); ++k)
    d -= outer(L + k) * shifted_[k];
  return d;
}

AffineDeltaMap::AffineDeltaMap(MatrixXd y0, std::vector<MatrixXd> d)
    : y0_(std::move(y0)), d_(std::move(d)) {}

int AffineDeltaMap::outer_dim() const { return static_cast<int>(d_.size()); }

MatrixXd AffineDeltaMap::eval(const VectorXd& outer) const {
  MatrixXd out = y0_;
  for (int l = 0; l < static_cast<int>(d_.size()); ++l)
    out -= outer(l) * d_[l];
  return out;
}

namespace {

double quadratic_form(const VectorXd& g, const MatrixXd& W) {
  return g.dot(W * g);
}

}  // namespace

OuterSolution minimize_outer(const OuterProblem& prob, const InnerOpts& inner,
                             const OuterOpts& outer) {
  prob.W.validate();
  const int dim = prob.map->outer_dim();
  if (prob.lo.size() != dim || prob.hi.size() != dim)
    throw DimensionError("outer box does not match outer dimension");

  OuterSolution sol;
  VectorXd warm_theta;
  bool has_warm = false;
  int evals = 0;

  auto objective = [&](const VectorXd& outer_pt) {
    ++evals;
    // candidate points where the shares cannot be evaluated in double
    // precision act as an infinite barrier; only the final solution has
    // to be feasible
    MatrixXd delta;
    try {
      delta = prob.map->eval(outer_pt);
    } catch (const NumericOverflow&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NoConvergence&) {
      return std::numeric_limits<double>::infinity();
    }
    StepOneFit fit = inner_ls(delta, prob.X1, prob.Z, prob.R, inner,
                              has_warm ? &warm_theta : nullptr);
    warm_theta.resize(fit.beta.size() + fit.gamma.size());
    warm_theta << fit.beta, fit.gamma;
    has_warm = true;
    return quadratic_form(fit.gamma, prob.W.W);
  };

  VectorXd opt(dim);
  if (dim == 1) {
    ScalarMinResult r = minimize_scalar(
        [&](double a) { return objective(VectorXd::Constant(1, a)); },
        prob.lo(0), prob.hi(0), outer.coarse_points, outer.xtol);
    opt(0) = r.x;
  } else {
    // box handled by evaluating at the clamped point plus a pull-back term
    auto boxed = [&](const VectorXd& p) {
      VectorXd c = p.cwiseMax(prob.lo).cwiseMin(prob.hi);
      return objective(c) + 1e6 * (p - c).squaredNorm();
    };
    VectorXd start = 0.5 * (prob.lo + prob.hi);
    VectorXd best;
    double best_f = std::numeric_limits<double>::infinity();
    double step = 0.25;
    for (int r = 0; r < outer.nm_restarts; ++r) {
      OptimResult nm = nelder_mead(boxed, start, step, 1e-12, 1e-9,
                                   outer.nm_max_iter * dim);
      if (nm.fx < best_f) {
        best_f = nm.fx;
        best = nm.x;
      }
      start = best.cwiseMax(prob.lo).cwiseMin(prob.hi);
      step *= 0.2;
    }
    opt = best.cwiseMax(prob.lo).cwiseMin(prob.hi);
  }

  // re-evaluate at the optimum to expose the step-one fit
  MatrixXd delta = prob.map->eval(opt);
  StepOneFit fit = inner_ls(delta, prob.X1, prob.Z, prob.R, inner,
                            has_warm ? &warm_theta : nullptr);
  sol.outer = opt;
  sol.fit = std::move(fit);
  sol.step2_value = quadratic_form(sol.fit.gamma, prob.W.W);
  sol.evaluations = evals + 1;
  for (int l = 0; l < dim; ++l) {
    double width = prob.hi(l) - prob.lo(l);
    // the optimizer resolves the location no finer than xtol
    double edge = std::max(outer.boundary_tol * width, 3.0 * outer.xtol);
    if (opt(l) - prob.lo(l) <= edge || prob.hi(l) - opt(l) <= edge)
      sol.boundary = true;
  }
  return sol;
}

double step2_objective(const VectorXd& alpha, const PanelData& panel,
                       const RandomCoeffSpec& spec, int R,
                       const WeightMatrix& W, const EstimatorOpts& opts,
                       StepOneFit* fit_out) {
  panel.validate();
  spec.validate(panel.K());
  W.validate();
  MatrixXd delta = invert_shares_all(panel, alpha, spec, opts.inversion);
  StepOneFit fit = inner_ls(delta, panel.X, panel.Z, R, opts.inner);
  double value = fit.gamma.dot(W.W * fit.gamma);
  if (fit_out) *fit_out = std::move(fit);
  return value;
}

namespace {

LsmdEstimate finish_estimate(const PanelData& panel, const DeltaMap& blp_map,
                             const OuterSolution& sol,
                             const std::vector<int>& endog,
                             const std::vector<int>& exog, int R,
                             const WeightMatrix& W, const InnerOpts& inner) {
  const int L = static_cast<int>(sol.outer.size()) -
                static_cast<int>(endog.size());
  LsmdEstimate est;
  est.alpha = sol.outer.head(L);
  est.outer = sol.outer;
  est.endogenous = endog;
  est.step2_value = sol.step2_value;
  est.weight = W;
  est.boundary = sol.boundary;
  est.outer_evaluations = sol.evaluations;

  // step 3: repeat the least squares at the optimum with gamma = 0
  est.delta_hat = blp_map.eval(est.alpha);
  MatrixXd working = est.delta_hat;
  est.beta.resize(panel.K());
  for (int k = 0; k < static_cast<int>(endog.size()); ++k) {
    est.beta(endog[k]) = sol.outer(L + k);
    working -= sol.outer(L + k) * panel.X[endog[k]];
  }
  std::vector<MatrixXd> X1;
  for (int k : exog) X1.push_back(panel.X[k]);
  VectorXd warm = sol.fit.beta;
  StepOneFit step3 = inner_ls(working, X1, {}, R, inner,
                              warm.size() ? &warm : nullptr);
  for (int i = 0; i < static_cast<int>(exog.size()); ++i)
    est.beta(exog[i]) = step3.beta(i);
  est.factors = step3.factors;

  est.residuals = est.delta_hat - est.factors.common();
  for (int k = 0; k < panel.K(); ++k)
    est.residuals -= est.beta(k) * panel.X[k];
  return est;
}

}  // namespace

LsmdEstimate estimate(const PanelData& panel, const RandomCoeffSpec& spec,
                      int R, const WeightMatrix& W,
                      const EstimatorOpts& opts) {
  panel.validate();
  spec.validate(panel.K());
  for (bool ex : panel.exogenous)
    if (!ex)
      throw Error(
          "estimate: panel flags endogenous regressors; use "
          "estimate_endogenous");
  if (panel.M() < spec.L())
    throw UnderIdentified("estimate: need M >= L instruments");

  BlpDeltaMap map(panel, spec, opts.inversion);
  OuterProblem prob;
  prob.map = &map;
  prob.X1 = panel.X;
  prob.Z = panel.Z;
  prob.R = R;
  prob.W = W;
  prob.lo = spec.alpha_lo;
  prob.hi = spec.alpha_hi;
  OuterSolution sol = minimize_outer(prob, opts.inner, opts.outer);

  std::vector<int> exog(panel.K());
  for (int k = 0; k < panel.K(); ++k) exog[k] = k;
  return finish_estimate(panel, map, sol, {}, exog, R, W, opts.inner);
}

LsmdEstimate estimate_endogenous(const PanelData& panel,
                                 const RandomCoeffSpec& spec, int R,
                                 const WeightMatrix& W,
                                 const VectorXd& beta_end_lo,
                                 const VectorXd& beta_end_hi,
                                 const EstimatorOpts& opts) {
  panel.validate();
  spec.validate(panel.K());
  std::vector<int> endog, exog;
  for (int k = 0; k < panel.K(); ++k)
    (panel.exogenous[k] ? exog : endog).push_back(k);
  const int K2 = static_cast<int>(endog.size());
  if (K2 == 0) return estimate(panel, spec, R, W, opts);
  if (panel.M() < spec.L() + K2)
    throw UnderIdentified("estimate_endogenous: need M >= L + #endogenous");
  if (beta_end_lo.size() != K2 || beta_end_hi.size() != K2)
    throw DimensionError("estimate_endogenous: coefficient box must match K2");

  BlpDeltaMap base(panel, spec, opts.inversion);
  std::vector<MatrixXd> shifted;
  for (int k : endog) shifted.push_back(panel.X[k]);
  ShiftedDeltaMap map(base, std::move(shifted));

  OuterProblem prob;
  prob.map = &map;
  for (int k : exog) prob.X1.push_back(panel.X[k]);
  prob.Z = panel.Z;
  prob.R = R;
  prob.W = W;
  prob.lo.resize(spec.L() + K2);
  prob.hi.resize(spec.L() + K2);
  prob.lo << spec.alpha_lo, beta_end_lo;
  prob.hi << spec.alpha_hi, beta_end_hi;
  OuterSolution sol = minimize_outer(prob, opts.inner, opts.outer);
  return finish_estimate(panel, base, sol, endog, exog, R, W, opts.inner);
}

namespace {

MatrixXd projected_design_x(const PanelData& panel, const LsmdEstimate& fit) {
  // columns vec(M_lambda X_k M_f) over the step-one regressors
  std::vector<int> exog;
  for (int k = 0; k < panel.K(); ++k)
    if (std::find(fit.endogenous.begin(), fit.endogenous.end(), k) ==
        fit.endogenous.end())
      exog.push_back(k);
  MatrixXd Ml = proj_orth(fit.factors.lambda);
  MatrixXd Mf = proj_orth(fit.factors.f);
  MatrixXd out(static_cast<long>(panel.J) * panel.T,
               static_cast<long>(exog.size()));
  for (int i = 0; i < static_cast<int>(exog.size()); ++i) {
    MatrixXd proj = Ml * panel.X[exog[i]] * Mf;
    out.col(i) = Eigen::Map<const VectorXd>(proj.data(), proj.size());
  }
  return out;
}

}  // namespace

namespace {

// z' M_A z without forming the JT x JT projector.
MatrixXd gram_orth(const MatrixXd& z, const MatrixXd& A) {
  MatrixXd W = z.transpose() * z;
  if (A.cols() > 0) {
    MatrixXd Az = A.transpose() * z;
    W -= Az.transpose() * pseudo_inverse_sym(A.transpose() * A) * Az;
  }
  return W;
}

WeightMatrix checked_weight(MatrixXd W, WeightMatrix::Kind kind,
                            const char* what) {
  W = 0.5 * (W + W.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(W, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <
      1e-12 * std::max(0.0, es.eigenvalues().maxCoeff()))
    throw SingularWeight(std::string(what) +
                         ": weight matrix is numerically singular");
  return {std::move(W), kind};
}

}  // namespace

WeightMatrix optimal_weight(const PanelData& panel, int R,
                            const LsmdEstimate& first_stage) {
  if (first_stage.factors.R() != R)
    throw DimensionError("optimal_weight: first stage used a different R");
  MatrixXd xlf = projected_design_x(panel, first_stage);
  const double n = static_cast<double>(panel.J) * panel.T;
  return checked_weight(gram_orth(panel.design_z(), xlf) / n,
                        WeightMatrix::Kind::optimal, "optimal_weight");
}

WeightMatrix blp_empirical_weight(const PanelData& panel) {
  const double n = static_cast<double>(panel.J) * panel.T;
  return checked_weight(gram_orth(panel.design_z(), panel.design_x()) / n,
                        WeightMatrix::Kind::blp_empirical, "weight");
}

}  // namespace lsmd
