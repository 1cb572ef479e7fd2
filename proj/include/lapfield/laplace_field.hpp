#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lapfield/covariance.hpp"
#include "lapfield/distributions.hpp"
#include "lapfield/error.hpp"
#include "lapfield/linalg.hpp"
#include "lapfield/mvn.hpp"
#include "lapfield/parallel.hpp"
#include "lapfield/quadrature.hpp"
#include "lapfield/random.hpp"
#include "lapfield/special.hpp"

namespace lapfield {

/// Dependence type: Laplace field (Y W) or the Gaussian field W with the same
/// correlation, used as a copula comparator.
enum class DepType { laplace, gaussian };

inline std::string to_string(DepType t) { return t == DepType::laplace ? "laplace" : "gaussian"; }

inline DepType parse_dep_type(const std::string& s) {
  if (s == "laplace" || s == "L") return DepType::laplace;
  if (s == "gaussian" || s == "G") return DepType::gaussian;
  throw schema_error("unknown dependence type '" + s + "'");
}

struct LaplaceFieldModel {
  CorrelationSpec spec;
  SiteSet sites;
  DepType dep_type = DepType::laplace;
  Matrix sigma_star;
  CholeskyFactor factor;

  static LaplaceFieldModel build(SiteSet sites, const CorrelationSpec& spec, DepType dep = DepType::laplace) {
    LaplaceFieldModel m;
    m.spec = spec;
    m.sites = std::move(sites);
    m.dep_type = dep;
    m.sigma_star = build_corr_matrix(m.sites, spec);
    m.factor = cholesky(m.sigma_star);
    return m;
  }

  /// Model on an explicit correlation matrix (no geometry).
  static LaplaceFieldModel from_matrix(const Matrix& corr, DepType dep = DepType::laplace) {
    LaplaceFieldModel m;
    m.dep_type = dep;
    m.sigma_star = corr;
    m.factor = cholesky(corr);
    for (Eigen::Index i = 0; i < corr.rows(); ++i) m.sites.push_back("site_" + std::to_string(i + 1), {0.0, 0.0}, 0.0);
    return m;
  }

  int dim() const { return static_cast<int>(sigma_star.rows()); }
  /// Bessel order of the D-dimensional density.
  double nu() const { return 0.5 * (2.0 - dim()); }
};

namespace detail {

// log[(q/4)^{nu/2} K_nu(sqrt q)], continuous at q = 0 when nu > 0.
inline double log_scaled_bessel_term(double nu, double q) {
  if (q <= 0.0) {
    if (nu > 0.0) return std::lgamma(nu) - std::numbers::ln2;
    throw singularity_error("Laplace density is singular at the origin for D > 1");
  }
  return 0.5 * nu * std::log(0.25 * q) + log_bessel_k(nu, std::sqrt(q));
}

inline void check_vector(const CholeskyFactor& f, const Vector& x, const char* who) {
  if (x.size() != f.dim()) throw domain_error(std::string(who) + ": dimension mismatch");
  if (!x.allFinite()) throw domain_error(std::string(who) + ": non-finite input");
}

}  // namespace detail

/// log density of the D-dimensional Laplace law with dispersion Sigma
/// (covariance 2 Sigma):
///   f(x) = 2^{1-D/2} (2 pi)^{-D/2} |Sigma|^{-1/2} (q/4)^{nu/2} K_nu(sqrt q),
/// q = x' Sigma^{-1} x, nu = 1 - D/2. For D = 1, Sigma = [1] this is 0.5 e^{-|x|}.
inline double mv_laplace_logpdf(const CholeskyFactor& factor, const Vector& x) {
  detail::check_vector(factor, x, "mv_laplace_logpdf");
  const double d = static_cast<double>(factor.dim());
  const double nu = 1.0 - 0.5 * d;
  const double q = factor.quad_form(x);
  if (d > 1 && q <= 1e-300) throw singularity_error("mv_laplace_logpdf: quadratic form vanishes (x at the origin)");
  return (1.0 - 0.5 * d) * std::numbers::ln2 - 0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * factor.log_det() +
         detail::log_scaled_bessel_term(nu, q);
}

inline double mv_laplace_logpdf(const Matrix& sigma, const Vector& x) { return mv_laplace_logpdf(cholesky(sigma), x); }

/// Gaussian N(0, Sigma) log density, the comparator used by the G-type model.
inline double mv_gauss_logpdf(const CholeskyFactor& factor, const Vector& x) {
  detail::check_vector(factor, x, "mv_gauss_logpdf");
  const double d = static_cast<double>(factor.dim());
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * factor.log_det() - 0.5 * factor.quad_form(x);
}

/// Density of R = sqrt(X' Sigma^{-1} X):
///   f_R(r) = 2^{1-D/2} / Gamma(D/2) r^{D/2} K_{D/2-1}(r).
inline double radial_logpdf(int dim, double r) {
  if (dim < 1) throw domain_error("radial_pdf: dimension must be positive");
  if (!(r > 0.0)) throw domain_error("radial_pdf: r must be positive");
  const double h = 0.5 * dim;
  return (1.0 - h) * std::numbers::ln2 - std::lgamma(h) + h * std::log(r) + log_bessel_k(h - 1.0, r);
}

inline double radial_pdf(int dim, double r) { return std::exp(radial_logpdf(dim, r)); }

/// n replicates (rows) of the field: Y W for Laplace type, W for Gaussian type.
/// Block c of 1024 replicates draws from substream c of a base seed taken
/// from `rng`, so the result does not depend on the thread count.
inline Matrix simulate(const LaplaceFieldModel& model, Rng& rng, std::size_t n) {
  const int d = model.dim();
  const std::uint64_t base = rng.bits();
  Matrix out(static_cast<Eigen::Index>(n), d);
  const Matrix& l = model.factor.lower;
  parallel_for((n + 1023) / 1024, [&](std::size_t chunk) {
    Vector z(d);
    const std::size_t hi = std::min(n, (chunk + 1) * 1024);
    Rng r(stream_seed(base, chunk));
    for (std::size_t i = chunk * 1024; i < hi; ++i) {
      for (int j = 0; j < d; ++j) z[j] = r.normal();
      const double y = model.dep_type == DepType::laplace ? Rayleigh::draw(r) : 1.0;
      out.row(static_cast<Eigen::Index>(i)) = (y * (l * z)).transpose();
    }
  });
  return out;
}

/// Law of the mixing variable Y given X = x for a D-dimensional Laplace vector:
///   f(y) proportional to y^{-(D-1)} exp(-(y^2 + q/y^2)/2),  q = x' Sigma^{-1} x.
struct YGivenX {
  int dim = 1;
  double q = 0.0;
  double log_norm = 0.0;  ///< log of the integral of the unnormalized density

  double log_unnormalized(double y) const {
    if (!(y > 0.0)) return -std::numeric_limits<double>::infinity();
    const double inner = q > 0.0 ? q / (y * y) : 0.0;
    return -(dim - 1.0) * std::log(y) - 0.5 * (y * y + inner);
  }
  double logpdf(double y) const { return log_unnormalized(y) - log_norm; }
  double pdf(double y) const { return std::exp(logpdf(y)); }

  double mode() const {
    const double a = dim - 1.0;
    return std::sqrt(0.5 * (-a + std::sqrt(a * a + 4.0 * q)));
  }

  /// Closed form of the normalizer: q^{nu/2} K_nu(sqrt q) with nu = 1 - D/2
  /// (D = 1 and q = 0 gives sqrt(pi/2)).
  double log_norm_closed_form() const {
    const double nu = 1.0 - 0.5 * dim;
    if (q <= 0.0) {
      if (dim == 1) return 0.5 * std::log(0.5 * std::numbers::pi);
      throw domain_error("Y|X: density not integrable at q = 0 for D > 1");
    }
    return 0.5 * nu * std::log(q) + log_bessel_k(nu, std::sqrt(q));
  }
};

inline YGivenX make_y_given_x(int dim, double q) {
  if (dim < 1) throw domain_error("Y|X: dimension must be positive");
  if (!(q >= 0.0) || !std::isfinite(q)) throw domain_error("Y|X: quadratic form must be finite and nonnegative");
  if (q == 0.0 && dim > 1) throw domain_error("Y|X: density not integrable at q = 0 for D > 1");
  YGivenX out{dim, q, 0.0};
  // Normalize by quadrature in t = log y, centred at the mode.
  const double t0 = std::log(out.mode() > 0.0 ? out.mode() : 1.0);
  const double peak = out.log_unnormalized(std::exp(t0)) + t0;
  auto integrand = [&](double t) {
    if (!std::isfinite(t)) return 0.0;
    const double y = std::exp(t0 + t);
    if (!(y > 0.0) || !std::isfinite(y)) return 0.0;
    return std::exp(out.log_unnormalized(y) + t0 + t - peak);
  };
  const auto res = integrate_adaptive(integrand, -std::numeric_limits<double>::infinity(),
                                      std::numeric_limits<double>::infinity(), 1e-12);
  out.log_norm = std::log(res.value) + peak;
  return out;
}

inline YGivenX make_y_given_x(const CholeskyFactor& factor, const Vector& x) {
  detail::check_vector(factor, x, "y_given_x");
  return make_y_given_x(static_cast<int>(factor.dim()), factor.quad_form(x));
}

/// Normalized log density of Y at y given X = x.
inline double y_given_x_logpdf(const Matrix& sigma, const Vector& x, double y) {
  if (!(y > 0.0)) throw domain_error("y_given_x_logpdf: y must be positive");
  return make_y_given_x(cholesky(sigma), x).logpdf(y);
}

/// Tabulated inverse cdf of Y | X1 = x1 on a log-spaced grid.
class YGivenXSampler {
 public:
  static constexpr int kGridSize = 2048;

  YGivenXSampler(int dim, double q) : law_{dim, q, 0.0} {
    if (dim < 1) throw domain_error("Y|X sampler: dimension must be positive");
    if (q == 0.0 && dim > 1) throw domain_error("Y|X sampler: conditioning vector at the origin (D > 1)");
    const double pivot = q > 0.0 ? std::pow(q, 0.25) : 1.0;
    double lo = std::log(pivot / 50.0), hi = std::log(pivot * 50.0);
    for (int attempt = 0; attempt < 12; ++attempt) {
      tabulate(lo, hi);
      const double peak = *std::max_element(logdens_.begin(), logdens_.end());
      const bool left_ok = logdens_.front() - peak < std::log(1e-12);
      const bool right_ok = logdens_.back() - peak < std::log(1e-12);
      if (left_ok && right_ok) return;
      if (!left_ok) lo -= (hi - lo);
      if (!right_ok) hi += (hi - lo);
    }
    throw numeric_error("Y|X sampler: density mass outside tabulation grid [" + std::to_string(std::exp(lo)) + ", " +
                        std::to_string(std::exp(hi)) + "] for q=" + std::to_string(q));
  }

  double draw(Rng& rng) const { return quantile(rng.uniform()); }

  double quantile(double u) const {
    const double target = u * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), 1, cdf_.size() - 1);
    const double c0 = cdf_[k - 1], c1 = cdf_[k];
    const double frac = c1 > c0 ? (target - c0) / (c1 - c0) : 0.5;
    return std::exp(t_[k - 1] + frac * (t_[k] - t_[k - 1]));
  }

  double grid_lo() const { return std::exp(t_.front()); }
  double grid_hi() const { return std::exp(t_.back()); }

 private:
  void tabulate(double lo, double hi) {
    t_.resize(kGridSize);
    logdens_.resize(kGridSize);
    cdf_.assign(kGridSize, 0.0);
    const double step = (hi - lo) / (kGridSize - 1);
    for (int i = 0; i < kGridSize; ++i) {
      t_[i] = lo + i * step;
      logdens_[i] = law_.log_unnormalized(std::exp(t_[i])) + t_[i];
    }
    const double peak = *std::max_element(logdens_.begin(), logdens_.end());
    for (int i = 1; i < kGridSize; ++i)
      cdf_[i] = cdf_[i - 1] + 0.5 * step * (std::exp(logdens_[i - 1] - peak) + std::exp(logdens_[i] - peak));
  }

  YGivenX law_;
  std::vector<double> t_, logdens_, cdf_;
};

/// Draws of X2 | X1 = x1 (rows ordered as the complement of cond_idx).
/// Laplace type: y ~ Y | X1 = x1, then X2 = mu + y L z with mu = S21 S11^{-1} x1
/// and L L' = S22 - S21 S11^{-1} S12. Gaussian type: mu + L z.
inline Matrix simulate_conditional(const LaplaceFieldModel& model, const std::vector<int>& cond_idx, const Vector& x1,
                                   Rng& rng, std::size_t n) {
  const auto gc = gauss_conditional(model.sigma_star, cond_idx, x1);
  const CholeskyFactor cf = cholesky(gc.cov);
  const int k = static_cast<int>(gc.free_idx.size());
  std::optional<YGivenXSampler> sampler;
  if (model.dep_type == DepType::laplace) {
    const Matrix s11 = submatrix(model.sigma_star, cond_idx, cond_idx);
    const double q1 = x1.dot(Eigen::LLT<Matrix>(s11).solve(x1));
    sampler.emplace(static_cast<int>(cond_idx.size()), std::max(0.0, q1));
  }
  const std::uint64_t base = rng.bits();
  Matrix out(static_cast<Eigen::Index>(n), k);
  parallel_for((n + 1023) / 1024, [&](std::size_t chunk) {
    Vector z(k);
    const std::size_t hi = std::min(n, (chunk + 1) * 1024);
    Rng r(stream_seed(base, chunk));
    for (std::size_t i = chunk * 1024; i < hi; ++i) {
      const double y = sampler ? sampler->draw(r) : 1.0;
      for (int j = 0; j < k; ++j) z[j] = r.normal();
      out.row(static_cast<Eigen::Index>(i)) = (gc.mean + y * (cf.lower * z)).transpose();
    }
  });
  return out;
}

/// Conditional law of X2 | X1 = x1 for a Laplace vector: elliptical with
/// location mu, dispersion S~ and density |S~|^{-1/2} g(r^2 + c1) / c0, where
/// g(s) = s^{nu/2} K_nu(sqrt s) (constants cancel), r^2 = (x2-mu)' S~^{-1} (x2-mu),
/// c1 = x1' S11^{-1} x1 and c0 = s_k int_0^inf g(r^2 + c1) r^{k-1} dr with
/// s_k = 2 pi^{k/2} / Gamma(k/2) the surface area of the unit sphere in R^k.
class ConditionalLaplace {
 public:
  ConditionalLaplace(const Matrix& sigma, const std::vector<int>& cond_idx, const Vector& x1)
      : gc_(gauss_conditional(sigma, cond_idx, x1)), factor_(cholesky(gc_.cov)) {
    const int total = static_cast<int>(sigma.rows());
    d_ = static_cast<int>(cond_idx.size());
    k_ = total - d_;
    nu_ = 1.0 - 0.5 * total;
    const Matrix s11 = submatrix(sigma, cond_idx, cond_idx);
    c1_ = std::max(0.0, x1.dot(Eigen::LLT<Matrix>(s11).solve(x1)));
    if (c1_ == 0.0 && d_ > 1) throw domain_error("conditional law undefined at x1 = 0 for more than one conditioning site");
    ref_ = log_g(c1_ + 1.0);
    const double log_sk = std::numbers::ln2 + 0.5 * k_ * std::log(std::numbers::pi) - std::lgamma(0.5 * k_);
    auto integrand = [&](double r) {
      if (r <= 0.0) return k_ == 1 ? std::exp(log_g(c1_) - ref_) : 0.0;
      return std::exp(log_g(r * r + c1_) - ref_ + (k_ - 1.0) * std::log(r));
    };
    const auto res = integrate_adaptive(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-12);
    log_c0_ = log_sk + std::log(res.value) + ref_;
  }

  int free_dim() const { return k_; }
  const Vector& location() const { return gc_.mean; }
  const Matrix& dispersion() const { return gc_.cov; }
  double c1() const { return c1_; }
  double log_c0() const { return log_c0_; }

  double logpdf(const Vector& x2) const {
    if (x2.size() != k_) throw domain_error("conditional_logpdf: dimension mismatch");
    const double r2 = factor_.quad_form(x2 - gc_.mean);
    return -0.5 * factor_.log_det() + log_g(r2 + c1_) - log_c0_;
  }

  /// Density of the radius r = sqrt((x2-mu)' S~^{-1} (x2-mu)).
  double radial_logpdf(double r) const {
    if (!(r > 0.0)) throw domain_error("conditional radial density: r must be positive");
    const double log_sk = std::numbers::ln2 + 0.5 * k_ * std::log(std::numbers::pi) - std::lgamma(0.5 * k_);
    return log_sk - log_c0_ + (k_ - 1.0) * std::log(r) + log_g(r * r + c1_);
  }

 private:
  double log_g(double s) const {
    if (s <= 0.0) {
      if (nu_ > 0.0) return std::lgamma(nu_) + (nu_ - 1.0) * std::numbers::ln2;
      throw singularity_error("conditional density: singular point");
    }
    return 0.5 * nu_ * std::log(s) + log_bessel_k(nu_, std::sqrt(s));
  }

  GaussConditional gc_;
  CholeskyFactor factor_;
  int d_ = 0, k_ = 0;
  double nu_ = 0.0, c1_ = 0.0, ref_ = 0.0, log_c0_ = 0.0;
};

inline double conditional_logpdf(const Matrix& sigma, const std::vector<int>& cond_idx, const Vector& x1,
                                 const Vector& x2) {
  return ConditionalLaplace(sigma, cond_idx, x1).logpdf(x2);
}

}  // namespace lapfield
