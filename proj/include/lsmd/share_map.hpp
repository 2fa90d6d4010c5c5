#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lsmd/panel_data.hpp"
#include "lsmd/quadrature.hpp"

namespace lsmd {

struct ShareInversionOpts {
  double tol = 1e-12;      // max-norm of the contraction update
  int max_iter = 5000;
  bool record_history = false;
};

struct InversionTrace {
  int iterations = 0;
  double final_update = 0.0;
  std::vector<double> update_history;  // filled when record_history is set
};

// Share map for one market at fixed taste parameters. Precomputes the
// per-node utility shifts sum_l alpha_l * node(q,l) * X_{rc_l, j} so
// repeated evaluations during the contraction stay cheap. The outside
// good has utility zero; choice probabilities are stabilized by per-node
// max subtraction.
class MarketShareMap {
 public:
  // X_t is the K x J regressor slice of the market.
  MarketShareMap(const Eigen::MatrixXd& X_t, const Eigen::VectorXd& alpha,
                 const RandomCoeffSpec& spec, const QuadratureRule& rule);

  // Aggregated shares; throws NumericOverflow when a share underflows to
  // zero (pathological mean utilities).
  Eigen::VectorXd shares(const Eigen::VectorXd& delta) const;

  double outside_share(const Eigen::VectorXd& delta) const;

  // J x Q matrix of per-node choice probabilities (column q sums with the
  // outside probability to one).
  Eigen::MatrixXd node_probs(const Eigen::VectorXd& delta) const;

  const Eigen::VectorXd& weights() const { return w_; }

  // Per-node taste coefficient on regressor k: sum over random coefficients
  // attached to k of alpha_l * node(q,l). Zero vector when k carries none.
  Eigen::VectorXd taste_coefficient(int k) const;

  // BLP contraction: delta <- delta + log s_obs - log s(delta), started
  // from delta0 (zeros when empty).
  Eigen::VectorXd invert(const Eigen::VectorXd& s_obs,
                         const ShareInversionOpts& opts,
                         const Eigen::VectorXd& delta0 = Eigen::VectorXd(),
                         InversionTrace* trace = nullptr) const;

 private:
  Eigen::MatrixXd shift_;  // J x Q
  Eigen::VectorXd w_;      // Q
  Eigen::MatrixXd nodes_;  // Q x L
  Eigen::VectorXd alpha_;
  std::vector<int> rc_index_;
  Eigen::MatrixXd x_rc_;  // J x L, regressor values carrying random coefficients
};

// One-market share evaluation (constructs the map internally).
Eigen::VectorXd compute_shares(const Eigen::VectorXd& delta_t,
                               const Eigen::MatrixXd& X_t,
                               const Eigen::VectorXd& alpha,
                               const RandomCoeffSpec& spec);

// One-market inversion.
Eigen::VectorXd invert_shares(const Eigen::VectorXd& s_t,
                              const Eigen::MatrixXd& X_t,
                              const Eigen::VectorXd& alpha,
                              const RandomCoeffSpec& spec,
                              const ShareInversionOpts& opts = {},
                              InversionTrace* trace = nullptr);

// Market-by-market inversion of the whole panel. Markets are independent;
// warm_start (J x T) seeds the contraction when provided. Failures carry
// the market index.
Eigen::MatrixXd invert_shares_all(const PanelData& panel,
                                  const Eigen::VectorXd& alpha,
                                  const RandomCoeffSpec& spec,
                                  const ShareInversionOpts& opts = {},
                                  const Eigen::MatrixXd* warm_start = nullptr);

}  // namespace lsmd
