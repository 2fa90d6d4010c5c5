#include "lsmd/share_map.hpp"

#include <cmath>

#include "lsmd/errors.hpp"

namespace lsmd {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MarketShareMap::MarketShareMap(const MatrixXd& X_t, const VectorXd& alpha,
                               const RandomCoeffSpec& spec,
                               const QuadratureRule& rule)
    : w_(rule.weights),
      nodes_(rule.nodes),
      alpha_(alpha),
      rc_index_(spec.rc_index) {
  const int J = static_cast<int>(X_t.cols());
  const int L = spec.L();
  if (alpha.size() != L)
    throw DimensionError("share map: alpha length does not match spec");
  if (rule.dim() != L)
    throw DimensionError("share map: quadrature dimension does not match spec");
  x_rc_.resize(J, L);
  for (int l = 0; l < L; ++l)
    x_rc_.col(l) = X_t.row(rc_index_[l]).transpose();
  // shift(j,q) = sum_l alpha_l nu_{q,l} x_{rc_l, j}
  shift_.noalias() = x_rc_ * alpha.asDiagonal() * nodes_.transpose();
}

MatrixXd MarketShareMap::node_probs(const VectorXd& delta) const {
  if (!delta.allFinite())
    throw NumericOverflow("share map: non-finite mean utility");
  // stabilized in one pass over the J x Q utility block; the outside
  // utility is 0, so the per-node max is clamped below at zero
  Eigen::ArrayXXd u = shift_.array().colwise() + delta.array();
  Eigen::Array<double, 1, Eigen::Dynamic> m =
      u.colwise().maxCoeff().max(0.0);
  u.rowwise() -= m;
  // past -708 the true probability underflows double range entirely
  if (u.minCoeff() < -708.0)
    throw NumericOverflow(
        "share map: stabilized exp argument out of range "
        "(pathological mean utility)");
  u = u.exp();
  Eigen::Array<double, 1, Eigen::Dynamic> denom =
      u.colwise().sum() + (-m).exp();
  u.rowwise() /= denom;
  return u.matrix();
}

VectorXd MarketShareMap::shares(const VectorXd& delta) const {
  VectorXd s = node_probs(delta) * w_;
  if (s.minCoeff() <= 0.0)
    throw NumericOverflow(
        "share map: share underflowed to zero (pathological mean utility)");
  return s;
}

double MarketShareMap::outside_share(const VectorXd& delta) const {
  const int Q = static_cast<int>(shift_.cols());
  double s0 = 0.0;
  for (int q = 0; q < Q; ++q) {
    ArrayXd u = delta.array() + shift_.col(q).array();
    double m = std::max(0.0, u.maxCoeff());
    s0 += w_(q) * std::exp(-m) / (std::exp(-m) + (u - m).exp().sum());
  }
  return s0;
}

VectorXd MarketShareMap::taste_coefficient(int k) const {
  VectorXd c = VectorXd::Zero(nodes_.rows());
  for (int l = 0; l < static_cast<int>(rc_index_.size()); ++l)
    if (rc_index_[l] == k) c += alpha_(l) * nodes_.col(l);
  return c;
}

VectorXd MarketShareMap::invert(const VectorXd& s_obs,
                                const ShareInversionOpts& opts,
                                const VectorXd& delta0,
                                InversionTrace* trace) const {
  const int J = static_cast<int>(shift_.rows());
  if (s_obs.size() != J) throw DimensionError("invert: share length mismatch");
  double sum = 0.0;
  for (int j = 0; j < J; ++j) {
    if (!(s_obs(j) > 0.0 && s_obs(j) < 1.0))
      throw InvalidShare("invert: observed share out of (0,1)");
    sum += s_obs(j);
  }
  if (!(sum < 1.0)) throw InvalidShare("invert: inside shares sum to >= 1");
  if (!(opts.tol > 0.0)) throw Error("invert: tol must be positive");

  VectorXd log_s_obs = s_obs.array().log();
  VectorXd delta = delta0.size() == J ? delta0 : VectorXd::Zero(J);
  double update = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iter; ++it) {
    VectorXd step = log_s_obs - shares(delta).array().log().matrix();
    delta += step;
    update = step.cwiseAbs().maxCoeff();
    if (trace && opts.record_history) trace->update_history.push_back(update);
    if (update <= opts.tol) {
      if (trace) {
        trace->iterations = it + 1;
        trace->final_update = update;
      }
      return delta;
    }
  }
  throw NoConvergence("invert: contraction did not reach tolerance " +
                          std::to_string(opts.tol) + " in " +
                          std::to_string(opts.max_iter) + " iterations",
                      update);
}

VectorXd compute_shares(const VectorXd& delta_t, const MatrixXd& X_t,
                        const VectorXd& alpha, const RandomCoeffSpec& spec) {
  return MarketShareMap(X_t, alpha, spec, spec.rule()).shares(delta_t);
}

VectorXd invert_shares(const VectorXd& s_t, const MatrixXd& X_t,
                       const VectorXd& alpha, const RandomCoeffSpec& spec,
                       const ShareInversionOpts& opts, InversionTrace* trace) {
  return MarketShareMap(X_t, alpha, spec, spec.rule())
      .invert(s_t, opts, VectorXd(), trace);
}

MatrixXd invert_shares_all(const PanelData& panel, const VectorXd& alpha,
                           const RandomCoeffSpec& spec,
                           const ShareInversionOpts& opts,
                           const MatrixXd* warm_start) {
  QuadratureRule rule = spec.rule();
  MatrixXd delta(panel.J, panel.T);
  for (int t = 0; t < panel.T; ++t) {
    MarketShareMap map(panel.x_slice(t), alpha, spec, rule);
    VectorXd d0 = warm_start ? warm_start->col(t).eval() : VectorXd();
    try {
      delta.col(t) = map.invert(panel.shares.col(t), opts, d0);
    } catch (const NoConvergence& e) {
      throw NoConvergence("market " + std::to_string(t) + ": " + e.what(),
                          e.residual);
    } catch (const NumericOverflow& e) {
      throw NumericOverflow("market " + std::to_string(t) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("market " + std::to_string(t) + ": " + e.what());
    }
  }
  return delta;
}

}  // namespace lsmd
