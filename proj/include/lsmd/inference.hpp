#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lsmd/estimator.hpp"
#include "lsmd/panel_data.hpp"

namespace lsmd {

// Central finite differences of the inverted mean utilities in each taste
// parameter; returns the JT x L matrix with columns -vec(d delta / d alpha_l).
// Step per component: fd_step * (1 + |alpha_l|).
MatrixXd gradient_delta(const VectorXd& alpha_hat, const PanelData& panel,
                        const RandomCoeffSpec& spec, double fd_step = 1e-4);

// Design blocks entering the asymptotic formulas: columns
// vec(M_lambda X_k M_f), vec(M_lambda Z_m M_f), and the utility gradient.
struct ProjectedDesign {
  MatrixXd x_lf;   // JT x K1 (step-one regressors)
  MatrixXd z_lf;   // JT x M
  MatrixXd g_hat;  // JT x (L + K2)
};

ProjectedDesign projected_design(const LsmdEstimate& fit,
                                 const PanelData& panel,
                                 const RandomCoeffSpec& spec,
                                 double fd_step = 1e-4);

struct InferenceOpts {
  double fd_step = 1e-4;
  int bandwidth = 2;  // truncation lag for the pre-determination bias term
};

inline int auto_bandwidth(int T) {
  return static_cast<int>(std::floor(std::pow(static_cast<double>(T), 0.2)));
}

// Plug-in bias and variance report. Parameters are ordered (alpha, beta in
// panel column order); the theory-order blocks G/Omega/Wcal keep the
// internal ordering (alpha, endogenous betas, step-one betas).
struct InferenceReport {
  std::vector<std::string> names;
  VectorXd raw;          // (alpha, beta) point estimates
  VectorXd corrected;    // raw - B0/T - B1/J - B2/T
  MatrixXd B;            // P x 3, columns B0, B1, B2 (user order)
  MatrixXd covariance;   // P x P (user order)
  VectorXd se;           // sqrt(diag(covariance) / JT)
  VectorXd t_stats;      // corrected / se
  MatrixXd G;            // (L+K2+K1) x (K1+M)
  MatrixXd Omega, Wcal;  // (K1+M) x (K1+M)
  MatrixXd b_x, b_z;     // K1 x 3, M x 3
  int bandwidth = 0;
  double cond_GWG = 0.0;
  int J = 0, T = 0;
};

InferenceReport bias_variance(const LsmdEstimate& fit, const PanelData& panel,
                              const RandomCoeffSpec& spec,
                              const WeightMatrix& W_used,
                              const InferenceOpts& opts = {});

// Formula core on explicit inputs; used by bias_variance and directly by
// tests with analytic gradients. outer_raw holds (alpha, beta_endogenous),
// X1/beta1 the step-one regressors and their coefficients.
InferenceReport bias_variance_core(
    const MatrixXd& e_hat, const FactorEstimate& factors,
    const std::vector<MatrixXd>& X1, const std::vector<MatrixXd>& Z,
    const MatrixXd& g_hat, const VectorXd& outer_raw, const VectorXd& beta1,
    const MatrixXd& W_JT, int bandwidth);

}  // namespace lsmd
