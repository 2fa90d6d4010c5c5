#include "lsmd/elasticity.hpp"

#include <cstdio>
#include <fstream>

#include "lsmd/errors.hpp"
#include "lsmd/share_map.hpp"

namespace lsmd {

SharePriceDerivatives share_price_derivatives(const VectorXd& delta_t,
                                              const MatrixXd& X_t,
                                              const VectorXd& alpha,
                                              const RandomCoeffSpec& spec,
                                              double beta_price,
                                              int price_index) {
  const int J = static_cast<int>(delta_t.size());
  MarketShareMap map(X_t, alpha, spec, spec.rule());
  MatrixXd probs = map.node_probs(delta_t);  // J x Q
  const VectorXd& w = map.weights();
  // per-node utility response to price: coefficient plus taste draw
  VectorXd c = VectorXd::Constant(w.size(), beta_price) +
               map.taste_coefficient(price_index);

  SharePriceDerivatives out;
  out.shares = probs * w;
  out.ds_dp = MatrixXd::Zero(J, J);
  out.ds0_dp = VectorXd::Zero(J);
  for (int q = 0; q < w.size(); ++q) {
    const VectorXd pi = probs.col(q);
    const double wc = w(q) * c(q);
    // d pi_j / d p_k = c (1{j=k} pi_j - pi_j pi_k)
    out.ds_dp += wc * (MatrixXd(pi.asDiagonal()) - pi * pi.transpose());
    out.ds0_dp -= wc * (1.0 - pi.sum()) * pi;
  }
  return out;
}

ElasticityMatrix elasticity_matrix(const LsmdEstimate& fit,
                                   const PanelData& panel,
                                   const RandomCoeffSpec& spec, int t,
                                   int price_index) {
  if (t < 0 || t >= panel.T)
    throw InvalidMarket("elasticity: market index out of range");
  if (price_index < 0 || price_index >= panel.K())
    throw DimensionError("elasticity: price regressor index out of range");

  SharePriceDerivatives d = share_price_derivatives(
      fit.delta_hat.col(t), panel.x_slice(t), fit.alpha, spec,
      fit.beta(price_index), price_index);

  ElasticityMatrix em;
  em.market = t;
  em.market_label = panel.market_labels.empty() ? std::to_string(t)
                                                : panel.market_labels[t];
  em.labels = panel.product_labels;
  const VectorXd price = panel.X[price_index].col(t);
  em.E = (d.ds_dp.array() * price.transpose().replicate(panel.J, 1).array() /
          d.shares.replicate(1, panel.J).array())
             .matrix();
  return em;
}

void write_elasticity_csv(const ElasticityMatrix& em, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "product";
  for (const auto& l : em.labels) out << ',' << l;
  out << '\n';
  char buf[32];
  for (int j = 0; j < em.E.rows(); ++j) {
    out << em.labels[j];
    for (int k = 0; k < em.E.cols(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.6g", em.E(j, k));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace lsmd
