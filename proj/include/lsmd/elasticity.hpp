#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lsmd/estimator.hpp"
#include "lsmd/panel_data.hpp"

namespace lsmd {

struct ElasticityMatrix {
  int market = 0;
  std::string market_label;
  MatrixXd E;  // J x J, E(j,k) = d s_j / d p_k * p_k / s_j
  std::vector<std::string> labels;
};

// Price derivatives of the model shares in one market, by quadrature over
// the taste distribution. Price moves both the mean utility (through its
// coefficient) and the taste shift when it carries a random coefficient.
struct SharePriceDerivatives {
  MatrixXd ds_dp;   // J x J
  VectorXd ds0_dp;  // outside-good row, J
  VectorXd shares;  // J
};

SharePriceDerivatives share_price_derivatives(const VectorXd& delta_t,
                                              const MatrixXd& X_t,
                                              const VectorXd& alpha,
                                              const RandomCoeffSpec& spec,
                                              double beta_price,
                                              int price_index);

ElasticityMatrix elasticity_matrix(const LsmdEstimate& fit,
                                   const PanelData& panel,
                                   const RandomCoeffSpec& spec, int t,
                                   int price_index = 0);

void write_elasticity_csv(const ElasticityMatrix& em, const std::string& path);

}  // namespace lsmd
