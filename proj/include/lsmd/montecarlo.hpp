#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lsmd/estimator.hpp"
#include "lsmd/inference.hpp"
#include "lsmd/panel_data.hpp"

namespace lsmd {

// One-factor price design: a single regressor (price) and its square as
// the instrument, interactive effects entering both utility and price.
struct McConfig {
  int J = 20;
  int T = 20;
  int R_true = 1;
  int R_est = 1;
  int reps = 1000;
  std::uint64_t base_seed = 1;
  double alpha0 = 1.0;
  double beta0 = -3.0;
  double price_floor = 0.2;
  int n_nodes = 64;
  double alpha_lo = 0.0, alpha_hi = 5.0;
  bool bias_correction = true;
  int bandwidth = 2;
  EstimatorOpts est;
  int threads = 0;             // 0: resolve from env/hardware
  double max_fail_frac = 0.01;
};

struct DgpTruth {
  MatrixXd lambda0;  // J x R_true
  MatrixXd f0;       // T x R_true
  MatrixXd e;        // J x T
  MatrixXd delta0;   // J x T
  double alpha0 = 0.0;
  double beta0 = 0.0;
};

// Draws one synthetic panel. The stream of normal deviates is keyed by
// rep_seed alone, so panels are reproducible and independent across reps.
std::pair<PanelData, DgpTruth> generate_dgp(const McConfig& config,
                                            std::uint64_t rep_seed);

RandomCoeffSpec dgp_spec(const McConfig& config);

struct RepResult {
  int rep = 0;
  bool ok = false;
  std::string error;
  double alpha = 0.0, beta = 0.0;          // raw estimates
  double alpha_c = 0.0, beta_c = 0.0;      // bias-corrected
  double se_alpha = 0.0, se_beta = 0.0;
  bool boundary = false;
};

struct McReport {
  // index 0: alpha, index 1: beta
  Eigen::Vector2d bias, std_dev, rmse;          // raw estimator
  Eigen::Vector2d bias_c, std_dev_c, rmse_c;    // bias-corrected
  Eigen::Vector2d mean_se, emp_size;            // nominal-5% t-test vs truth
  int reps_done = 0;
  int reps_failed = 0;
  std::vector<RepResult> rep_log;
};

// Runs the full study: per-rep seed = base_seed XOR rep, replications in
// parallel, aggregation is a deterministic fold over the rep index (the
// report does not depend on the thread count). Throws when more than
// max_fail_frac of the replications fail.
McReport run_study(const McConfig& config);

void write_report_csv(const McReport& report, const std::string& path);
void write_rep_log_json(const McConfig& config, const McReport& report,
                        const std::string& path);

}  // namespace lsmd
