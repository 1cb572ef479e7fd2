#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lapfield/error.hpp"
#include "lapfield/linalg.hpp"

namespace lapfield {

struct NelderMeadOptions {
  int max_evals = 2000;
  /// Converged when the spread of simplex values falls below
  /// f_tol * (|f_best| + f_tol) and the simplex diameter below x_tol.
  double f_tol = 1e-9;
  double x_tol = 1e-6;
  /// Extra runs restarted from the best point with a fresh simplex.
  int restarts = 3;
};

struct OptimResult {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  int restarts_used = 0;
  bool converged = false;
  std::vector<double> trace;  ///< best value after each run
};

namespace detail {

inline OptimResult nelder_mead_once(const std::function<double(const Vector&)>& f, const Vector& x0,
                                    const Vector& step, const NelderMeadOptions& opt, int budget) {
  const int n = static_cast<int>(x0.size());
  // Adaptive coefficients for higher dimensions (Gao & Han).
  const double alpha = 1.0, beta = 1.0 + 2.0 / std::max(n, 2), gam = 0.75 - 0.5 / std::max(n, 2),
               delta = 1.0 - 1.0 / std::max(n, 2);
  std::vector<Vector> p(n + 1, x0);
  std::vector<double> fv(n + 1);
  int evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  fv[0] = eval(x0);
  for (int i = 0; i < n; ++i) {
    p[i + 1][i] += step[i];
    fv[i + 1] = eval(p[i + 1]);
  }
  std::vector<int> ord(n + 1);
  bool converged = false;
  while (evals < budget) {
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int best = ord[0], worst = ord[n], second = ord[n - 1];
    double diam = 0.0;
    for (int i = 1; i <= n; ++i) diam = std::max(diam, (p[ord[i]] - p[best]).cwiseAbs().maxCoeff());
    const double spread = fv[worst] - fv[best];
    if (std::isfinite(fv[best]) && spread <= opt.f_tol * (std::fabs(fv[best]) + opt.f_tol) && diam <= opt.x_tol) {
      converged = true;
      break;
    }
    if (n == 0) {
      converged = true;
      break;
    }
    Vector c = Vector::Zero(n);
    for (int i = 0; i < n; ++i) c += p[ord[i]];
    c /= n;
    const Vector xr = c + alpha * (c - p[worst]);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const Vector xe = c + beta * (xr - c);
      const double fe = eval(xe);
      if (fe < fr) {
        p[worst] = xe;
        fv[worst] = fe;
      } else {
        p[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      p[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const Vector xc = outside ? Vector(c + gam * (xr - c)) : Vector(c - gam * (c - p[worst]));
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[worst])) {
      p[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (int i = 1; i <= n; ++i) {
      const int k = ord[i];
      p[k] = p[best] + delta * (p[k] - p[best]);
      fv[k] = eval(p[k]);
    }
  }
  const int best = static_cast<int>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  OptimResult r;
  r.x = p[best];
  r.value = fv[best];
  r.evaluations = evals;
  r.converged = converged;
  return r;
}

}  // namespace detail

/// Derivative-free minimization. After the first run the search restarts
/// from the incumbent with the initial step sizes; the result is converged
/// when the last run converges without improving the incumbent materially.
inline OptimResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0, const Vector& step,
                               const NelderMeadOptions& opt = {}) {
  if (step.size() != x0.size()) throw domain_error("nelder_mead: step and start differ in size");
  OptimResult best = detail::nelder_mead_once(f, x0, step, opt, opt.max_evals);
  best.trace.push_back(best.value);
  int total = best.evaluations;
  for (int r = 0; r < opt.restarts && total < opt.max_evals; ++r) {
    auto run = detail::nelder_mead_once(f, best.x, step, opt, opt.max_evals - total);
    total += run.evaluations;
    ++best.restarts_used;
    const double gain = best.value - run.value;
    if (run.value < best.value) {
      best.x = run.x;
      best.value = run.value;
    }
    best.trace.push_back(best.value);
    best.converged = run.converged;
    if (run.converged && gain <= 10 * opt.f_tol * (std::fabs(best.value) + opt.f_tol)) break;
  }
  best.evaluations = total;
  if (!std::isfinite(best.value)) best.converged = false;
  return best;
}

}  // namespace lapfield
