#pragma once

#include <Eigen/Dense>

#include "lsmd/panel_data.hpp"

namespace lsmd {

// Reference parameter point for the residual utility difference: the
// truth in simulations, user-supplied (typically the fit) on data.
struct ReferencePoint {
  VectorXd alpha;
  VectorXd beta;  // K
};

// Explanatory power of regressors + instruments for the residual utility
// difference at (alpha, beta), relative to its total variation. Returns
// NaN when the difference degenerates (the reference point itself).
double rho_iv(const VectorXd& alpha, const VectorXd& beta,
              const PanelData& panel, const RandomCoeffSpec& spec,
              const ReferencePoint& ref);

// Explanatory power of the factor spans: the projection onto lambda0 plus
// the leading R eigenvalues of the loadings-orthogonal part, divided by
// the total variation. lambda0 is the reference loading matrix (J x R0).
double rho_f(const VectorXd& alpha, const VectorXd& beta,
             const PanelData& panel, const RandomCoeffSpec& spec,
             const ReferencePoint& ref, const MatrixXd& lambda0, int R);

// Quadratic-form cores on an explicit residual-difference matrix; the
// panel-level wrappers build xi from inverted utilities.
double rho_iv_from_xi(const MatrixXd& xi, const MatrixXd& xz);
double rho_f_from_xi(const MatrixXd& xi, const MatrixXd& lambda0, int R);

struct RelevanceSurface {
  VectorXd alpha_grid;
  VectorXd beta_grid;
  MatrixXd rho_iv;     // n_alpha x n_beta
  MatrixXd rho_f;
  MatrixXd delta_rho;  // rho_iv - rho_f
  int R_used = 0;
  int beta_index = 0;  // which coefficient the beta axis varies
};

// Evaluates both rho measures over the Cartesian grid. beta_index selects
// the coefficient scanned by beta_grid; the others stay at the reference.
RelevanceSurface relevance_surface(const PanelData& panel,
                                   const RandomCoeffSpec& spec,
                                   const ReferencePoint& ref,
                                   const MatrixXd& lambda0,
                                   const VectorXd& alpha_grid,
                                   const VectorXd& beta_grid, int R,
                                   int beta_index = 0, int threads = 1);

void write_surface_csv(const RelevanceSurface& surf, const std::string& path);

// Profiled least-squares objective of Y - beta * X over a coefficient grid.
VectorXd objective_profile(const MatrixXd& Y, const MatrixXd& X,
                           const VectorXd& beta_grid, int R);

}  // namespace lsmd
