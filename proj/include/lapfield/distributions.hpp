#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "lapfield/error.hpp"
#include "lapfield/random.hpp"
#include "lapfield/special.hpp"

namespace lapfield {

enum class Which { pdf, cdf, survival, quantile };

namespace detail {
inline void check_probability(double p, const char* who) {
  if (!(p > 0.0 && p < 1.0)) throw domain_error(std::string(who) + ": probability must lie in (0,1)");
}
}  // namespace detail

/// Standard Laplace law, density 0.5 exp(-|x|).
struct StdLaplace {
  static double pdf(double x) { return 0.5 * std::exp(-std::fabs(x)); }
  static double log_pdf(double x) { return -std::numbers::ln2 - std::fabs(x); }
  static double cdf(double x) { return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x); }
  static double survival(double x) { return x >= 0.0 ? 0.5 * std::exp(-x) : 1.0 - 0.5 * std::exp(x); }
  static double quantile(double p) {
    detail::check_probability(p, "StdLaplace::quantile");
    return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
  }
  /// x with survival(x) = s; accurate for tiny s.
  static double quantile_survival(double s) {
    detail::check_probability(s, "StdLaplace::quantile_survival");
    return s < 0.5 ? -std::log(2.0 * s) : std::log(2.0 * (1.0 - s));
  }
};

inline double std_laplace(Which which, double x) {
  switch (which) {
    case Which::pdf: return StdLaplace::pdf(x);
    case Which::cdf: return StdLaplace::cdf(x);
    case Which::survival: return StdLaplace::survival(x);
    case Which::quantile: return StdLaplace::quantile(x);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct StdNormal {
  static double pdf(double x) { return normal_pdf(x); }
  static double log_pdf(double x) { return normal_logpdf(x); }
  static double cdf(double x) { return normal_cdf(x); }
  static double survival(double x) { return normal_sf(x); }
  static double quantile(double p) {
    detail::check_probability(p, "StdNormal::quantile");
    return normal_quantile(p);
  }
  static double quantile_survival(double s) {
    detail::check_probability(s, "StdNormal::quantile_survival");
    return -normal_quantile(s);
  }
};

/// Weibull tail with covariate-driven scale delta(c) = exp(delta0 + delta1 c).
/// Units: speeds in m/s, covariate in km.
struct WeibullTail {
  double gamma = 1.0;
  double delta0 = 0.0;
  double delta1 = 0.0;
  double threshold_u = 0.0;

  double scale(double covariate) const { return std::exp(delta0 + delta1 * covariate); }

  double log_survival(double x, double covariate) const {
    if (x < 0.0) throw domain_error("WeibullTail: x must be nonnegative");
    return -std::pow(x / scale(covariate), gamma);
  }
  double survival(double x, double covariate) const { return std::exp(log_survival(x, covariate)); }
  double cdf(double x, double covariate) const { return -std::expm1(log_survival(x, covariate)); }

  double log_pdf(double x, double covariate) const {
    if (x < 0.0) throw domain_error("WeibullTail: x must be nonnegative");
    const double d = scale(covariate);
    const double z = x / d;
    return std::log(gamma) - std::log(d) + (gamma - 1.0) * std::log(z) - std::pow(z, gamma);
  }
  double pdf(double x, double covariate) const {
    if (x == 0.0) return gamma == 1.0 ? 1.0 / scale(covariate) : (gamma < 1.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return std::exp(log_pdf(x, covariate));
  }

  double quantile(double p, double covariate) const {
    detail::check_probability(p, "WeibullTail::quantile");
    return scale(covariate) * std::pow(-std::log1p(-p), 1.0 / gamma);
  }
  /// Level with exceedance probability s; accurate for tiny s.
  double quantile_survival(double s, double covariate) const {
    detail::check_probability(s, "WeibullTail::quantile_survival");
    return scale(covariate) * std::pow(-std::log(s), 1.0 / gamma);
  }
};

inline double weibull_tail_eval(const WeibullTail& model, double covariate, Which which, double x) {
  switch (which) {
    case Which::pdf: return model.pdf(x, covariate);
    case Which::cdf: return model.cdf(x, covariate);
    case Which::survival: return model.survival(x, covariate);
    case Which::quantile: return model.quantile(x, covariate);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Generalized Pareto law of exceedances over u.
struct GpdTail {
  double xi = 0.0;
  double sigma_u = 1.0;
  double u = 0.0;

  static constexpr double kExponentialBranch = 1e-8;

  double survival(double x) const {
    if (x < u) throw domain_error("gpd: x below threshold");
    if (!(sigma_u > 0.0)) throw domain_error("gpd: scale must be positive");
    const double z = (x - u) / sigma_u;
    if (std::fabs(xi) < kExponentialBranch) return std::exp(-z);
    const double base = 1.0 + xi * z;
    if (base <= 0.0) return 0.0;  // beyond the upper endpoint (xi < 0)
    return std::exp(-std::log(base) / xi);
  }
  double cdf(double x) const { return 1.0 - survival(x); }
};

inline double gpd_cdf(const GpdTail& tail, double x) { return tail.cdf(x); }

/// Target law of exp(L), L standard Laplace: uniform(0,1) w.p. 0.5 mixed with
/// standard Pareto on [1, inf).
struct LogLaplaceTarget {
  static double pdf(double x) {
    if (x < 0.0) return 0.0;
    if (x < 1.0) return 0.5;
    return 0.5 / (x * x);
  }
  static double cdf(double x) {
    if (x <= 0.0) return 0.0;
    if (x < 1.0) return 0.5 * x;
    return 1.0 - 0.5 / x;
  }
  static double survival(double x) { return 1.0 - cdf(x); }
};

inline double log_laplace_target(Which which, double x) {
  switch (which) {
    case Which::pdf: return LogLaplaceTarget::pdf(x);
    case Which::cdf: return LogLaplaceTarget::cdf(x);
    case Which::survival: return LogLaplaceTarget::survival(x);
    case Which::quantile: break;
  }
  throw domain_error("log_laplace_target: unsupported evaluation");
}

/// Rayleigh(1) mixing variable Y: density y exp(-y^2/2), Y^2 ~ Exp(scale 2).
struct Rayleigh {
  static double pdf(double y) { return y <= 0.0 ? 0.0 : y * std::exp(-0.5 * y * y); }
  static double cdf(double y) { return y <= 0.0 ? 0.0 : -std::expm1(-0.5 * y * y); }
  static double quantile(double p) {
    detail::check_probability(p, "Rayleigh::quantile");
    return std::sqrt(-2.0 * std::log1p(-p));
  }
  static double draw(Rng& rng) { return std::sqrt(2.0 * rng.exponential()); }
};

inline std::vector<double> rayleigh_sample(Rng& rng, std::size_t n) {
  if (n == 0) throw domain_error("rayleigh_sample: n must be at least 1");
  std::vector<double> out(n);
  for (auto& y : out) y = Rayleigh::draw(rng);
  return out;
}

}  // namespace lapfield
