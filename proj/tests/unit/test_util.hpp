#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace lapfield::testing {

// One-sample Kolmogorov–Smirnov statistic.
template <class Cdf>
double ks_one_sample(std::vector<double> xs, Cdf&& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  return d;
}

// Critical values: c(alpha) * sqrt(1/n) or sqrt((n+m)/(n m)).
inline constexpr double kKs1 = 1.628;   // 1% level
inline constexpr double kKs5 = 1.358;   // 5% level

inline double ks_crit_one(double n, double c = kKs1) { return c / std::sqrt(n); }
inline double ks_crit_two(double n, double m, double c = kKs1) { return c * std::sqrt((n + m) / (n * m)); }

}  // namespace lapfield::testing
