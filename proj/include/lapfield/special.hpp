#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "lapfield/error.hpp"

namespace lapfield {

// ---------------------------------------------------------------------------
// Standard normal
// ---------------------------------------------------------------------------

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_logpdf(double x) {
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Inverse standard normal cdf (Wichura, AS 241 PPND16), relative accuracy
/// about 1e-16 over (0,1). Returns -inf/+inf at the endpoints.
inline double normal_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw domain_error("normal_quantile: probability outside [0,1]");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

// ---------------------------------------------------------------------------
// Modified Bessel function of the second kind K_nu (a.k.a. third kind)
// ---------------------------------------------------------------------------

namespace detail {

// 1/Gamma(1+z) = sum_k c[k] z^k, |z| <= 1/2 (Abramowitz & Stegun 6.1.34,
// shifted by one).
inline constexpr std::array<double, 26> kRecipGammaSeries = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

// Temme's auxiliary gamma quantities for |mu| <= 1/2:
//   gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),  gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
// evaluated from the even/odd parts of the series (no cancellation at mu=0).
struct TemmeGammas {
  double gam1, gam2, gampl, gammi;
};

inline TemmeGammas temme_gammas(double mu) {
  double even = 0.0, odd = 0.0, pw = 1.0;
  for (std::size_t k = 0; k < kRecipGammaSeries.size(); ++k) {
    if (k % 2 == 0)
      even += kRecipGammaSeries[k] * pw;
    else
      odd += kRecipGammaSeries[k] * pw;
    if (k % 2 == 1) pw *= mu * mu;
  }
  // 1/G(1+mu) = even + mu*odd,  1/G(1-mu) = even - mu*odd.
  return {-odd, even, even + mu * odd, even - mu * odd};
}

// Exponentially scaled pair e^x K_mu(x), e^x K_{mu+1}(x), |mu| <= 1/2.
struct ScaledPair {
  double k_mu, k_mu1;
};

inline ScaledPair bessel_k_temme_series(double mu, double x) {
  constexpr double eps = 1e-17;
  const double x2 = 0.5 * x;
  const double pimu = std::numbers::pi * mu;
  const double fact = std::fabs(pimu) < 1e-15 ? 1.0 : pimu / std::sin(pimu);
  const double d = -std::log(x2);
  const double e = mu * d;
  const double fact2 = std::fabs(e) < 1e-15 ? 1.0 : std::sinh(e) / e;
  const auto g = temme_gammas(mu);
  double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
  double sum = ff;
  const double ee = std::exp(e);
  double p = 0.5 * ee / g.gampl;
  double q = 0.5 / (ee * g.gammi);
  double c = 1.0;
  const double dd = x2 * x2;
  double sum1 = p;
  for (int i = 1; i < 500; ++i) {
    ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu * mu);
    c *= dd / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - i * ff);
    if (std::fabs(del) < std::fabs(sum) * eps) break;
  }
  const double scale = std::exp(x);
  return {sum * scale, sum1 * (2.0 / x) * scale};
}

// Steed's continued fraction (Temme's CF2 form), already scaled by e^x.
inline ScaledPair bessel_k_continued_fraction(double mu, double x) {
  constexpr double eps = 1e-17;
  const double mu2 = mu * mu;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25 - mu2;
  double q = a1, c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  int i = 2;
  for (; i < 100000; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::fabs(dels / s) < eps) break;
  }
  if (i == 100000) throw numeric_error("bessel_k: continued fraction did not converge");
  h *= a1;
  const double kmu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
  return {kmu, kmu * (mu + x + 0.5 - h) / x};
}

// Hankel expansion of e^x K_order(x) for large x and |order| <= 3/2.
inline double bessel_k_scaled_asymptotic(double order, double x) {
  const double m = 4.0 * order * order;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * (m - odd * odd) / (k * 8.0 * x);
    if (std::fabs(next) >= std::fabs(term)) break;  // past the smallest term
    term = next;
    sum += term;
    if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
  }
  return std::sqrt(std::numbers::pi / (2.0 * x)) * sum;
}

inline ScaledPair bessel_k_base_pair(double mu, double x) {
  if (x < 2.0) return bessel_k_temme_series(mu, x);
  if (x <= 30.0) return bessel_k_continued_fraction(mu, x);
  return {bessel_k_scaled_asymptotic(mu, x), bessel_k_scaled_asymptotic(mu + 1.0, x)};
}

}  // namespace detail

/// log K_nu(x) for real nu and x > 0, safe against overflow and underflow.
inline double log_bessel_k(double nu, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw domain_error("bessel_k: argument must be positive and finite");
  if (!std::isfinite(nu)) throw domain_error("bessel_k: order must be finite");
  nu = std::fabs(nu);
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  auto [k_mu, k_mu1] = detail::bessel_k_base_pair(mu, x);
  double log_scale = 0.0;
  // Forward recurrence K_{m+1} = (2m/x) K_m + K_{m-1}, rescaling on growth.
  constexpr double big = 1e250;
  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * (2.0 / x) * k_mu1 + k_mu;
    k_mu = k_mu1;
    k_mu1 = next;
    if (k_mu1 > big) {
      k_mu /= big;
      k_mu1 /= big;
      log_scale += std::log(big);
    }
  }
  return std::log(k_mu) + log_scale - x;
}

/// K_nu(x). Underflows to 0 / overflows to inf where the log form does not.
inline double bessel_k(double nu, double x) { return std::exp(log_bessel_k(nu, x)); }

}  // namespace lapfield
