#include "lsmd/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lsmd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd fd_gradient(const ObjectiveFn& f, const VectorXd& x, double fd_step) {
  const int n = static_cast<int>(x.size());
  VectorXd g(n), xp = x;
  for (int i = 0; i < n; ++i) {
    double h = fd_step * (1.0 + std::fabs(x(i)));
    xp(i) = x(i) + h;
    double fp = f(xp);
    xp(i) = x(i) - h;
    double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace

OptimResult bfgs_minimize(const ObjectiveFn& f, VectorXd x0, double grad_tol,
                          int max_iter, double fd_step) {
  const int n = static_cast<int>(x0.size());
  OptimResult res;
  res.x = x0;
  res.fx = f(x0);
  if (n == 0) {
    res.converged = true;
    return res;
  }
  MatrixXd H = MatrixXd::Identity(n, n);  // inverse Hessian approximation
  VectorXd g = fd_gradient(f, res.x, fd_step);
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it;
    if (g.cwiseAbs().maxCoeff() <= grad_tol * (1.0 + std::fabs(res.fx))) {
      res.converged = true;
      return res;
    }
    VectorXd dir = -(H * g);
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {  // lost descent direction, reset
      H.setIdentity();
      dir = -g;
      slope = g.dot(dir);
      if (!(slope < 0.0)) return res;
    }
    // backtracking Armijo search
    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = res.x + step * dir;
      f_new = f(x_new);
      if (f_new <= res.fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return res;  // stalled; caller may fall back
    VectorXd g_new = fd_gradient(f, x_new, fd_step);
    VectorXd s = x_new - res.x;
    VectorXd y = g_new - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      // BFGS inverse update
      double rho = 1.0 / sy;
      MatrixXd I = MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    res.x = x_new;
    res.fx = f_new;
    g = g_new;
  }
  g = fd_gradient(f, res.x, fd_step);
  res.converged = g.cwiseAbs().maxCoeff() <= grad_tol * (1.0 + std::fabs(res.fx));
  return res;
}

OptimResult nelder_mead(const ObjectiveFn& f, VectorXd x0, double init_step,
                        double ftol, double xtol, int max_iter) {
  const int n = static_cast<int>(x0.size());
  OptimResult res;
  if (n == 0) {
    res.x = x0;
    res.fx = f(x0);
    res.converged = true;
    return res;
  }
  std::vector<VectorXd> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (int i = 1; i <= n; ++i)
    pts[i](i - 1) += init_step * (1.0 + std::fabs(x0(i - 1)));
  for (int i = 0; i <= n; ++i) fv[i] = f(pts[i]);

  auto order = [&] {
    for (int i = 1; i <= n; ++i) {
      VectorXd p = pts[i];
      double v = fv[i];
      int j = i - 1;
      while (j >= 0 && fv[j] > v) {
        pts[j + 1] = pts[j];
        fv[j + 1] = fv[j];
        --j;
      }
      pts[j + 1] = p;
      fv[j + 1] = v;
    }
  };
  order();

  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it;
    double fspread = std::fabs(fv[n] - fv[0]);
    double xspread = 0.0;
    for (int i = 1; i <= n; ++i)
      xspread = std::max(xspread, (pts[i] - pts[0]).cwiseAbs().maxCoeff());
    if (fspread <= ftol * (1.0 + std::fabs(fv[0])) &&
        xspread <= xtol * (1.0 + pts[0].cwiseAbs().maxCoeff())) {
      res.converged = true;
      break;
    }
    VectorXd centroid = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= n;

    VectorXd xr = centroid + (centroid - pts[n]);  // reflection
    double fr = f(xr);
    if (fr < fv[0]) {
      VectorXd xe = centroid + 2.0 * (centroid - pts[n]);  // expansion
      double fe = f(xe);
      if (fe < fr) {
        pts[n] = xe;
        fv[n] = fe;
      } else {
        pts[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr;
      fv[n] = fr;
    } else {
      VectorXd xc = centroid + 0.5 * (pts[n] - centroid);  // contraction
      double fc = f(xc);
      if (fc < fv[n]) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {  // shrink
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          fv[i] = f(pts[i]);
        }
      }
    }
    order();
  }
  res.x = pts[0];
  res.fx = fv[0];
  return res;
}

ScalarMinResult minimize_scalar(const ScalarFn& f, double lo, double hi,
                                int coarse_points, double xtol) {
  ScalarMinResult res;
  auto eval = [&](double x) {
    ++res.evaluations;
    return f(x);
  };
  coarse_points = std::max(coarse_points, 3);
  std::vector<double> xs(coarse_points), fs(coarse_points);
  for (int i = 0; i < coarse_points; ++i) {
    xs[i] = lo + (hi - lo) * i / (coarse_points - 1);
    fs[i] = eval(xs[i]);
  }
  int best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  double a = xs[std::max(0, best - 1)];
  double b = xs[std::min(coarse_points - 1, best + 1)];

  // golden section on [a, b]
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = eval(x1), f2 = eval(x2);
  while (b - a > xtol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = eval(x2);
    }
  }
  double xm = (f1 <= f2) ? x1 : x2;
  double fm = std::min(f1, f2);

  // parabolic polish through (a, xm, b)
  double fa = eval(a), fb = eval(b);
  double d1 = (xm - a) * (fm - fb);
  double d2 = (xm - b) * (fm - fa);
  double denom = 2.0 * (d2 - d1);
  if (std::fabs(denom) > 0.0) {
    double xq = xm - ((xm - b) * d2 - (xm - a) * d1) / denom;
    if (xq > a && xq < b && std::isfinite(xq)) {
      double fq = eval(xq);
      if (fq < fm) {
        xm = xq;
        fm = fq;
      }
    }
  }
  res.x = xm;
  res.fx = fm;
  return res;
}

}  // namespace lsmd
