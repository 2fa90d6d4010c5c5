#include "lsmd/diagnostics.hpp"

#include <cstdio>
#include <fstream>
#include <limits>

#include "lsmd/errors.hpp"
#include "lsmd/linalg.hpp"
#include "lsmd/parallel.hpp"
#include "lsmd/share_map.hpp"

namespace lsmd {

namespace {

constexpr double kDegenerate = 1e-10;

// residual utility difference as a J x T matrix:
// delta(alpha) - delta(alpha_ref) - sum_k (beta_k - beta_ref_k) X_k
MatrixXd xi_matrix(const MatrixXd& d_alpha, const MatrixXd& d_ref,
                   const VectorXd& beta, const VectorXd& beta_ref,
                   const std::vector<MatrixXd>& X) {
  MatrixXd xi = d_alpha - d_ref;
  for (size_t k = 0; k < X.size(); ++k)
    xi -= (beta(static_cast<long>(k)) - beta_ref(static_cast<long>(k))) *
          X[k];
  return xi;
}

double rho_iv_core(const MatrixXd& xi, const MatrixXd& xz,
                   const Eigen::LDLT<MatrixXd>& gram) {
  const long n = xi.size();
  Eigen::Map<const VectorXd> v(xi.data(), n);
  double total = v.squaredNorm();
  if (total < kDegenerate * kDegenerate)
    return std::numeric_limits<double>::quiet_NaN();
  VectorXd q = xz.transpose() * v;
  return q.dot(gram.solve(q)) / total;
}

double rho_f_core(const MatrixXd& xi, const MatrixXd& P0, const MatrixXd& M0,
                  int R) {
  double total = xi.squaredNorm();
  if (total < kDegenerate * kDegenerate)
    return std::numeric_limits<double>::quiet_NaN();
  double num = (xi.transpose() * P0 * xi).trace();
  if (R > 0) {
    MatrixXd proj = M0 * xi;
    VectorXd mu = gram_eigenvalues(proj);
    num += mu.head(std::min<int>(R, static_cast<int>(mu.size()))).sum();
  }
  return num / total;
}

}  // namespace

double rho_iv_from_xi(const MatrixXd& xi, const MatrixXd& xz) {
  Eigen::LDLT<MatrixXd> gram(xz.transpose() * xz);
  return rho_iv_core(xi, xz, gram);
}

double rho_f_from_xi(const MatrixXd& xi, const MatrixXd& lambda0, int R) {
  MatrixXd P0 = proj_onto(lambda0);
  MatrixXd M0 = MatrixXd::Identity(xi.rows(), xi.rows()) - P0;
  return rho_f_core(xi, P0, M0, R);
}

double rho_iv(const VectorXd& alpha, const VectorXd& beta,
              const PanelData& panel, const RandomCoeffSpec& spec,
              const ReferencePoint& ref) {
  ShareInversionOpts opts;
  MatrixXd d_ref = invert_shares_all(panel, ref.alpha, spec, opts);
  MatrixXd d_a = invert_shares_all(panel, alpha, spec, opts, &d_ref);
  MatrixXd xz(static_cast<long>(panel.J) * panel.T, panel.K() + panel.M());
  xz << panel.design_x(), panel.design_z();
  Eigen::LDLT<MatrixXd> gram(xz.transpose() * xz);
  return rho_iv_core(xi_matrix(d_a, d_ref, beta, ref.beta, panel.X), xz, gram);
}

double rho_f(const VectorXd& alpha, const VectorXd& beta,
             const PanelData& panel, const RandomCoeffSpec& spec,
             const ReferencePoint& ref, const MatrixXd& lambda0, int R) {
  ShareInversionOpts opts;
  MatrixXd d_ref = invert_shares_all(panel, ref.alpha, spec, opts);
  MatrixXd d_a = invert_shares_all(panel, alpha, spec, opts, &d_ref);
  MatrixXd P0 = proj_onto(lambda0);
  MatrixXd M0 = MatrixXd::Identity(panel.J, panel.J) - P0;
  return rho_f_core(xi_matrix(d_a, d_ref, beta, ref.beta, panel.X), P0, M0, R);
}

RelevanceSurface relevance_surface(const PanelData& panel,
                                   const RandomCoeffSpec& spec,
                                   const ReferencePoint& ref,
                                   const MatrixXd& lambda0,
                                   const VectorXd& alpha_grid,
                                   const VectorXd& beta_grid, int R,
                                   int beta_index, int threads) {
  if (beta_index < 0 || beta_index >= panel.K())
    throw DimensionError("relevance_surface: beta_index out of range");
  const int na = static_cast<int>(alpha_grid.size());
  const int nb = static_cast<int>(beta_grid.size());
  RelevanceSurface surf;
  surf.alpha_grid = alpha_grid;
  surf.beta_grid = beta_grid;
  surf.R_used = R;
  surf.beta_index = beta_index;
  surf.rho_iv.resize(na, nb);
  surf.rho_f.resize(na, nb);

  ShareInversionOpts opts;
  MatrixXd d_ref = invert_shares_all(panel, ref.alpha, spec, opts);
  MatrixXd xz(static_cast<long>(panel.J) * panel.T, panel.K() + panel.M());
  xz << panel.design_x(), panel.design_z();
  Eigen::LDLT<MatrixXd> gram(xz.transpose() * xz);
  MatrixXd P0 = proj_onto(lambda0);
  MatrixXd M0 = MatrixXd::Identity(panel.J, panel.J) - P0;

  parallel_for(na, threads, [&](int ia) {
    VectorXd alpha = ref.alpha;  // alpha axis varies the first component
    alpha(0) = alpha_grid(ia);
    MatrixXd d_a = invert_shares_all(panel, alpha, spec, opts, &d_ref);
    VectorXd beta = ref.beta;
    for (int ib = 0; ib < nb; ++ib) {
      beta(beta_index) = beta_grid(ib);
      MatrixXd xi = xi_matrix(d_a, d_ref, beta, ref.beta, panel.X);
      surf.rho_iv(ia, ib) = rho_iv_core(xi, xz, gram);
      surf.rho_f(ia, ib) = rho_f_core(xi, P0, M0, R);
    }
  });
  surf.delta_rho = surf.rho_iv - surf.rho_f;
  return surf;
}

void write_surface_csv(const RelevanceSurface& surf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "alpha,beta,rho_iv,rho_f,delta_rho\n";
  char buf[128];
  for (int ia = 0; ia < surf.alpha_grid.size(); ++ia)
    for (int ib = 0; ib < surf.beta_grid.size(); ++ib) {
      std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g\n",
                    surf.alpha_grid(ia), surf.beta_grid(ib),
                    surf.rho_iv(ia, ib), surf.rho_f(ia, ib),
                    surf.delta_rho(ia, ib));
      out << buf;
    }
}

VectorXd objective_profile(const MatrixXd& Y, const MatrixXd& X,
                           const VectorXd& beta_grid, int R) {
  VectorXd out(beta_grid.size());
  for (int i = 0; i < beta_grid.size(); ++i)
    out(i) = trailing_eigenvalue_sum(Y - beta_grid(i) * X, R);
  return out;
}

}  // namespace lsmd
