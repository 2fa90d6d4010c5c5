#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "lsmd/factor_regression.hpp"
#include "lsmd/panel_data.hpp"
#include "lsmd/share_map.hpp"

namespace lsmd {

struct WeightMatrix {
  enum class Kind { identity, user, optimal, blp_empirical };

  MatrixXd W;  // M x M, symmetric positive definite
  Kind kind = Kind::identity;

  static WeightMatrix identity(int m) {
    return {MatrixXd::Identity(m, m), Kind::identity};
  }
  // Throws SingularWeight / DimensionError on violations.
  void validate() const;
};

// Maps the outer parameter vector to mean utilities. The share-inversion
// map is the production implementation; analytic maps cover linear
// designs and the oracle tests.
class DeltaMap {
 public:
  virtual ~DeltaMap() = default;
  virtual int outer_dim() const = 0;
  virtual MatrixXd eval(const VectorXd& outer) const = 0;
};

// delta(alpha) via market-by-market BLP contraction. Caches the previous
// solution as the warm start for the next call, which makes sequences of
// nearby alphas (the outer search) cheap. Not safe for concurrent eval
// calls on one instance; distinct instances are independent.
class BlpDeltaMap : public DeltaMap {
 public:
  BlpDeltaMap(const PanelData& panel, const RandomCoeffSpec& spec,
              ShareInversionOpts opts = {});
  int outer_dim() const override;
  MatrixXd eval(const VectorXd& alpha) const override;
  void reset_warm_start() const;

 private:
  const PanelData& panel_;
  const RandomCoeffSpec& spec_;
  ShareInversionOpts opts_;
  mutable MatrixXd warm_;
  mutable bool has_warm_ = false;
};

// delta(outer) = base(outer.head(L)) - sum_k outer(L + k) * D_k.
// Moves regressor coefficients into the outer step (endogenous variant).
class ShiftedDeltaMap : public DeltaMap {
 public:
  ShiftedDeltaMap(const DeltaMap& base, std::vector<MatrixXd> shifted);
  int outer_dim() const override;
  MatrixXd eval(const VectorXd& outer) const override;

 private:
  const DeltaMap& base_;
  std::vector<MatrixXd> shifted_;
};

// delta(outer) = Y0 - sum_l outer(l) * D_l (exact linear model).
class AffineDeltaMap : public DeltaMap {
 public:
  AffineDeltaMap(MatrixXd y0, std::vector<MatrixXd> d);
  int outer_dim() const override;
  MatrixXd eval(const VectorXd& outer) const override;

 private:
  MatrixXd y0_;
  std::vector<MatrixXd> d_;
};

struct OuterOpts {
  int coarse_points = 9;     // bracket scan before golden section (1-D outer)
  double xtol = 1e-6;        // golden-section interval tolerance
  int nm_restarts = 3;       // multi-dimensional outer
  int nm_max_iter = 500;
  double boundary_tol = 1e-6;  // fraction of box width
};

struct EstimatorOpts {
  InnerOpts inner;
  OuterOpts outer;
  ShareInversionOpts inversion;
};

struct LsmdEstimate {
  VectorXd alpha;        // taste parameters (L)
  VectorXd beta;         // K coefficients in panel column order
  FactorEstimate factors;
  MatrixXd delta_hat;    // mean utilities at alpha
  MatrixXd residuals;    // delta_hat - beta.X - lambda f'
  double step2_value = 0.0;
  WeightMatrix weight;
  bool boundary = false;          // outer solution on the box boundary
  std::vector<int> endogenous;    // regressor indices moved to the outer step
  VectorXd outer;                 // (alpha, beta_endogenous) as optimized
  int outer_evaluations = 0;
};

// Generic nested solve: outer minimization of gamma' W gamma over the box,
// with the step-one fit warm-started along the outer trajectory.
struct OuterProblem {
  const DeltaMap* map = nullptr;
  std::vector<MatrixXd> X1;  // step-one regressors
  std::vector<MatrixXd> Z;
  int R = 0;
  WeightMatrix W;
  VectorXd lo, hi;  // outer box
};

struct OuterSolution {
  VectorXd outer;
  double step2_value = 0.0;
  StepOneFit fit;  // step-one fit at the optimum (includes gamma)
  bool boundary = false;
  int evaluations = 0;
};

OuterSolution minimize_outer(const OuterProblem& prob, const InnerOpts& inner,
                             const OuterOpts& outer);

// Step-two objective at a candidate alpha (cold start): inverts the share
// map, runs the step-one least squares, returns gamma' W gamma.
double step2_objective(const VectorXd& alpha, const PanelData& panel,
                       const RandomCoeffSpec& spec, int R,
                       const WeightMatrix& W, const EstimatorOpts& opts = {},
                       StepOneFit* fit_out = nullptr);

// Three-step estimator with all regressors exogenous.
LsmdEstimate estimate(const PanelData& panel, const RandomCoeffSpec& spec,
                      int R, const WeightMatrix& W,
                      const EstimatorOpts& opts = {});

// Variant with the regressors flagged endogenous in the panel moved to the
// outer step; requires M >= L + (number endogenous) and a box for their
// coefficients.
LsmdEstimate estimate_endogenous(const PanelData& panel,
                                 const RandomCoeffSpec& spec, int R,
                                 const WeightMatrix& W,
                                 const VectorXd& beta_end_lo,
                                 const VectorXd& beta_end_hi,
                                 const EstimatorOpts& opts = {});

// Homoscedasticity-optimal weight from a first-stage fit:
// (1/JT) z' M_{x^{lf}} z with x^{lf} columns vec(M_lambda X_k M_f) over the
// step-one regressors.
WeightMatrix optimal_weight(const PanelData& panel, int R,
                            const LsmdEstimate& first_stage);

// Weight used in the empirical no-factor-projection convention:
// (1/JT) z' M_x z over all regressors.
WeightMatrix blp_empirical_weight(const PanelData& panel);

}  // namespace lsmd
