#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lapfield/error.hpp"

namespace lapfield {

/// Gauss–Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline GaussLegendreRule compute_gauss_legendre(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? x : p1;
      const double pn1 = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pn1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace detail

/// Cached n-point rule; safe to call concurrently.
inline const GaussLegendreRule& gauss_legendre(int n) {
  if (n < 1) throw domain_error("gauss_legendre: need at least one node");
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// Nodes and weights of an n-point rule mapped to [a, b], split into `panels`
/// equal panels.
inline void gauss_legendre_nodes(double a, double b, int n, int panels, std::vector<double>& x,
                                 std::vector<double>& w) {
  const auto& rule = gauss_legendre(n);
  x.clear();
  w.clear();
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const double half = 0.5 * width, mid = lo + half;
    for (int i = 0; i < n; ++i) {
      x.push_back(mid + half * rule.nodes[i]);
      w.push_back(half * rule.weights[i]);
    }
  }
}

template <class F>
double gauss_legendre_integrate(F&& f, double a, double b, int n, int panels = 1) {
  std::vector<double> x, w;
  gauss_legendre_nodes(a, b, n, panels, x, w);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * f(x[i]);
  return sum;
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss–Kronrod (15/31) on a possibly infinite interval. Throws if
/// the error estimate stays above `rel_tol` * |value| + `abs_tol`.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 0.0,
                                    unsigned max_depth = 25) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, max_depth, rel_tol, &err);
  if (!std::isfinite(v)) throw numeric_error("quadrature: non-finite result");
  if (err > rel_tol * std::fabs(v) * 100.0 + abs_tol && err > 1e-300)
    throw numeric_error("quadrature did not converge (error estimate " + std::to_string(err) + ")");
  return {v, err};
}

}  // namespace lapfield
