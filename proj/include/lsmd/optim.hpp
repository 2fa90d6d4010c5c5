#pragma once

#include <Eigen/Dense>
#include <functional>

namespace lsmd {

using ObjectiveFn = std::function<double(const Eigen::VectorXd&)>;
using ScalarFn = std::function<double(double)>;

struct OptimResult {
  Eigen::VectorXd x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Quasi-Newton minimizer with central finite-difference gradients and a
// backtracking line search. Convergence: max-norm of the gradient below
// grad_tol * (1 + |f|).
OptimResult bfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0,
                          double grad_tol = 1e-8, int max_iter = 300,
                          double fd_step = 1e-7);

// Downhill simplex. Converges when the simplex f-spread and size fall
// below ftol/xtol scales.
OptimResult nelder_mead(const ObjectiveFn& f, Eigen::VectorXd x0,
                        double init_step = 0.5, double ftol = 1e-12,
                        double xtol = 1e-10, int max_iter = 2000);

struct ScalarMinResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
};

// Minimizes on [lo, hi]: coarse scan to bracket the best point, golden
// section inside the bracket, then one parabolic polish step on the
// final triple. Evaluation sequence is deterministic.
ScalarMinResult minimize_scalar(const ScalarFn& f, double lo, double hi,
                                int coarse_points = 9, double xtol = 1e-6);

}  // namespace lsmd
