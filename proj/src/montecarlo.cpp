#include "lsmd/montecarlo.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "lsmd/errors.hpp"
#include "lsmd/parallel.hpp"
#include "lsmd/rng.hpp"
#include "lsmd/share_map.hpp"

namespace lsmd {

RandomCoeffSpec dgp_spec(const McConfig& config) {
  RandomCoeffSpec spec;
  spec.rc_index = {0};
  spec.n_nodes = config.n_nodes;
  spec.alpha_lo = VectorXd::Constant(1, config.alpha_lo);
  spec.alpha_hi = VectorXd::Constant(1, config.alpha_hi);
  return spec;
}

namespace {

std::string padded_label(const char* prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i + 1);
  return buf;
}

}  // namespace

std::pair<PanelData, DgpTruth> generate_dgp(const McConfig& config,
                                            std::uint64_t rep_seed) {
  const int J = config.J, T = config.T, R = config.R_true;
  CounterRng rng(rep_seed);
  DgpTruth truth;
  truth.alpha0 = config.alpha0;
  truth.beta0 = config.beta0;
  // draw order is fixed: loadings, factors, errors, price shocks
  truth.lambda0.resize(J, R);
  for (int r = 0; r < R; ++r)
    for (int j = 0; j < J; ++j) truth.lambda0(j, r) = rng.next_normal();
  truth.f0.resize(T, R);
  for (int r = 0; r < R; ++r)
    for (int t = 0; t < T; ++t) truth.f0(t, r) = rng.next_normal();
  truth.e.resize(J, T);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < J; ++j) truth.e(j, t) = rng.next_normal();
  MatrixXd price_shock(J, T);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < J; ++j) price_shock(j, t) = rng.next_normal();

  MatrixXd common = truth.lambda0 * truth.f0.transpose();
  MatrixXd price = (1.0 + price_shock.array() + common.array())
                       .max(config.price_floor)
                       .matrix();
  truth.delta0 = config.beta0 * price + common + truth.e;

  PanelData panel;
  panel.J = J;
  panel.T = T;
  panel.X = {price};
  panel.Z = {price.array().square().matrix()};
  panel.exogenous = {true};
  panel.x_names = {"price"};
  panel.z_names = {"price_sq"};
  int wj = static_cast<int>(std::to_string(J).size());
  int wt = static_cast<int>(std::to_string(T).size());
  for (int j = 0; j < J; ++j)
    panel.product_labels.push_back(padded_label("p", j, wj));
  for (int t = 0; t < T; ++t)
    panel.market_labels.push_back(padded_label("m", t, wt));

  RandomCoeffSpec spec = dgp_spec(config);
  QuadratureRule rule = spec.rule();
  VectorXd alpha0 = VectorXd::Constant(1, config.alpha0);
  panel.shares.resize(J, T);
  for (int t = 0; t < T; ++t) {
    MarketShareMap map(price.col(t).transpose(), alpha0, spec, rule);
    panel.shares.col(t) = map.shares(truth.delta0.col(t));
  }
  return {std::move(panel), std::move(truth)};
}

McReport run_study(const McConfig& config) {
  if (config.reps < 1) throw DimensionError("run_study: need reps >= 1");
  if (config.R_est >= std::min(config.J, config.T))
    throw DimensionError("run_study: need R_est < min(J,T)");

  RandomCoeffSpec spec = dgp_spec(config);
  std::vector<RepResult> results(config.reps);

  parallel_for(config.reps, config.threads, [&](int rep) {
    RepResult& out = results[rep];
    out.rep = rep;
    try {
      auto [panel, truth] = generate_dgp(config, config.base_seed ^
                                                     static_cast<std::uint64_t>(rep));
      WeightMatrix W = WeightMatrix::identity(panel.M());
      LsmdEstimate fit = estimate(panel, spec, config.R_est, W, config.est);
      out.alpha = fit.alpha(0);
      out.beta = fit.beta(0);
      out.boundary = fit.boundary;
      if (config.bias_correction) {
        InferenceOpts iopts;
        iopts.bandwidth = config.bandwidth;
        InferenceReport inf = bias_variance(fit, panel, spec, W, iopts);
        out.alpha_c = inf.corrected(0);
        out.beta_c = inf.corrected(1);
        out.se_alpha = inf.se(0);
        out.se_beta = inf.se(1);
      } else {
        out.alpha_c = out.alpha;
        out.beta_c = out.beta;
        out.se_alpha = out.se_beta = 0.0;
      }
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  });

  McReport report;
  report.rep_log = results;
  const double crit = 1.959963984540054;  // two-sided 5% normal critical value
  Eigen::Vector2d truth(config.alpha0, config.beta0);
  Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sum_c = Eigen::Vector2d::Zero();
  Eigen::Vector2d sq = Eigen::Vector2d::Zero(), sq_c = Eigen::Vector2d::Zero();
  Eigen::Vector2d se_sum = Eigen::Vector2d::Zero(),
                  rejections = Eigen::Vector2d::Zero();
  int done = 0;
  for (const RepResult& r : results) {
    if (!r.ok) continue;
    ++done;
    Eigen::Vector2d est(r.alpha, r.beta), est_c(r.alpha_c, r.beta_c);
    sum += est;
    sum_c += est_c;
    sq += (est - truth).cwiseAbs2();
    sq_c += (est_c - truth).cwiseAbs2();
    if (config.bias_correction) {
      se_sum += Eigen::Vector2d(r.se_alpha, r.se_beta);
      if (std::fabs((r.alpha_c - truth(0)) / r.se_alpha) > crit)
        rejections(0) += 1.0;
      if (std::fabs((r.beta_c - truth(1)) / r.se_beta) > crit)
        rejections(1) += 1.0;
    }
  }
  report.reps_done = done;
  report.reps_failed = config.reps - done;
  if (report.reps_failed > config.max_fail_frac * config.reps)
    throw Error("run_study: " + std::to_string(report.reps_failed) + " of " +
                std::to_string(config.reps) + " replications failed");
  const double n = static_cast<double>(done);
  report.bias = sum / n - truth;
  report.bias_c = sum_c / n - truth;
  report.rmse = (sq / n).cwiseSqrt();
  report.rmse_c = (sq_c / n).cwiseSqrt();
  // population std so that rmse^2 = bias^2 + std^2 holds exactly
  report.std_dev = (sq / n - report.bias.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  report.std_dev_c =
      (sq_c / n - report.bias_c.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  report.mean_se = se_sum / n;
  report.emp_size = rejections / n;
  return report;
}

void write_report_csv(const McReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  char buf[256];
  out << "statistic,alpha,beta\n";
  auto row = [&](const char* name, const Eigen::Vector2d& v) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", name, v(0), v(1));
    out << buf;
  };
  row("bias", report.bias);
  row("std", report.std_dev);
  row("rmse", report.rmse);
  row("bias_bc", report.bias_c);
  row("std_bc", report.std_dev_c);
  row("rmse_bc", report.rmse_c);
  row("mean_se", report.mean_se);
  row("emp_size", report.emp_size);
  out << "reps_done," << report.reps_done << "," << report.reps_done << "\n";
  out << "reps_failed," << report.reps_failed << "," << report.reps_failed
      << "\n";
}

void write_rep_log_json(const McConfig& config, const McReport& report,
                        const std::string& path) {
  nlohmann::json j;
  j["config"] = {{"J", config.J},
                 {"T", config.T},
                 {"R_true", config.R_true},
                 {"R_est", config.R_est},
                 {"reps", config.reps},
                 {"base_seed", config.base_seed},
                 {"alpha0", config.alpha0},
                 {"beta0", config.beta0},
                 {"price_floor", config.price_floor},
                 {"n_nodes", config.n_nodes},
                 {"alpha_bounds", {config.alpha_lo, config.alpha_hi}},
                 {"bias_correction", config.bias_correction},
                 {"bandwidth", config.bandwidth}};
  j["summary"] = {{"bias", {report.bias(0), report.bias(1)}},
                  {"std", {report.std_dev(0), report.std_dev(1)}},
                  {"rmse", {report.rmse(0), report.rmse(1)}},
                  {"bias_bc", {report.bias_c(0), report.bias_c(1)}},
                  {"std_bc", {report.std_dev_c(0), report.std_dev_c(1)}},
                  {"rmse_bc", {report.rmse_c(0), report.rmse_c(1)}},
                  {"mean_se", {report.mean_se(0), report.mean_se(1)}},
                  {"emp_size", {report.emp_size(0), report.emp_size(1)}},
                  {"reps_done", report.reps_done},
                  {"reps_failed", report.reps_failed}};
  nlohmann::json reps = nlohmann::json::array();
  for (const RepResult& r : report.rep_log) {
    nlohmann::json e = {{"rep", r.rep}, {"ok", r.ok}};
    if (r.ok) {
      e["alpha"] = r.alpha;
      e["beta"] = r.beta;
      e["alpha_bc"] = r.alpha_c;
      e["beta_bc"] = r.beta_c;
      e["se_alpha"] = r.se_alpha;
      e["se_beta"] = r.se_beta;
      e["boundary"] = r.boundary;
    } else {
      e["error"] = r.error;
    }
    reps.push_back(std::move(e));
  }
  j["replications"] = std::move(reps);
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace lsmd
