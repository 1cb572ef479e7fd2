#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "lapfield/distributions.hpp"
#include "lapfield/error.hpp"
#include "lapfield/exceedance.hpp"
#include "lapfield/laplace_field.hpp"
#include "lapfield/linalg.hpp"
#include "lapfield/mvn.hpp"

namespace lapfield {

// ---------------------------------------------------------------------------
// Model coefficients
// ---------------------------------------------------------------------------

/// Residual coefficient of a bivariate Laplace vector: sqrt((1 + rho_lin)/2).
inline double residual_coef_biv(double rho_lin) {
  if (!(rho_lin > -1.0 && rho_lin <= 1.0)) throw domain_error("residual_coef_biv: correlation must lie in (-1, 1]");
  return std::sqrt(0.5 * (1.0 + rho_lin));
}

/// Residual coefficient of the bivariate Gaussian with the same correlation.
inline double residual_coef_biv_gauss(double rho_lin) {
  if (!(rho_lin > -1.0 && rho_lin <= 1.0)) throw domain_error("residual_coef_biv_gauss: correlation must lie in (-1, 1]");
  return 0.5 * (1.0 + rho_lin);
}

/// rho = 1 / sqrt(e' Sigma*^{-1} e).
inline double residual_coef_mv(const Matrix& corr) {
  Eigen::LLT<Matrix> llt(corr);
  if (llt.info() != Eigen::Success) throw numeric_error("residual_coef_mv: correlation matrix is singular");
  const Vector e = Vector::Ones(corr.rows());
  return 1.0 / std::sqrt(e.dot(llt.solve(e)));
}

/// sigma = (sum_{ij} sigma*_ij)^{1/2}, between 0 and D.
inline double sum_dependence_coef(const Matrix& corr) {
  const double s = corr.sum();
  if (s < -1e-12) throw domain_error("sum_dependence_coef: not a valid correlation matrix");
  return std::sqrt(std::max(0.0, s));
}

struct ExtrapolationFactor {
  double factor = 1.0;
  bool exact = false;
};

/// pr(X in A(u + t)) / pr(X in A(u)): exact for sum and marginal sets,
/// the large-u limit for max and min sets.
inline ExtrapolationFactor extrapolation_factor(const Matrix& sigma, const ExceedanceSpec& spec, double t) {
  if (!(t >= 0.0)) throw domain_error("extrapolation_factor: shift must be nonnegative");
  const int d = static_cast<int>(sigma.rows());
  switch (spec.kind) {
    case ExceedanceKind::sum: return {std::exp(-d * t / std::sqrt(sigma.sum())), true};
    case ExceedanceKind::marginal: return {std::exp(-t / std::sqrt(sigma(spec.component, spec.component))), true};
    case ExceedanceKind::max: return {std::exp(-t / std::sqrt(sigma.diagonal().maxCoeff())), d == 1};
    case ExceedanceKind::min: {
      for (int j = 0; j < d; ++j)
        if (std::fabs(sigma(j, j) - 1.0) > 1e-12) throw domain_error("extrapolation_factor: min kind needs a correlation matrix");
      return {std::exp(-t / residual_coef_mv(sigma)), d == 1};
    }
  }
  throw domain_error("extrapolation_factor: unknown kind");
}

/// pr(e'X > u) = 0.5 exp(-u / sqrt(e' Sigma e)).
inline double sum_exceedance_prob(const Matrix& sigma, double u) {
  if (!(u > 0.0)) throw domain_error("sum_exceedance_prob: threshold must be positive");
  return 0.5 * std::exp(-u / std::sqrt(sigma.sum()));
}

/// Large-level limit (x y)^{1/(2 rho)} of the joint survival ratio at
/// marginal levels x/v and y/v.
inline double joint_tail_limit_biv(double rho_lin, double x, double y) {
  if (!(x > 0.0 && x <= 1.0 && y > 0.0 && y <= 1.0)) throw domain_error("joint_tail_limit_biv: x, y must lie in (0,1]");
  return std::pow(x * y, 1.0 / (2.0 * residual_coef_biv(rho_lin)));
}

/// lambda_u = pr(U2 > u | U1 > u) under the model, by central symmetry
/// pr(X1 > q, X2 > q) = pr(X <= -q e).
inline double model_lambda_u(const Matrix& corr2, double u, DepType dep, const OrthantIntegralOptions& opt = {}) {
  if (corr2.rows() != 2 || corr2.cols() != 2) throw domain_error("model_lambda_u: needs a 2x2 correlation matrix");
  if (!(u > 0.0 && u < 1.0)) throw domain_error("model_lambda_u: u must lie in (0,1)");
  const double r = corr2(0, 1) / std::sqrt(corr2(0, 0) * corr2(1, 1));
  if (r >= 1.0 - 1e-15) return 1.0;
  double joint;
  if (dep == DepType::laplace) {
    const double q = StdLaplace::quantile(u);
    joint = laplace_orthant(corr2, Vector::Constant(2, -q), false, opt).value;
  } else {
    const double q = normal_quantile(u);
    joint = detail::bvn_cdf(-q, -q, r);
  }
  return std::clamp(joint / (1.0 - u), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Rank-based estimators
// ---------------------------------------------------------------------------

/// Average ranks (1-based); ties share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * (i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// ranks / (n + 1), strictly inside (0,1).
inline std::vector<double> rank_pit(const std::vector<double>& x) {
  auto r = average_ranks(x);
  const double n1 = static_cast<double>(x.size()) + 1.0;
  for (auto& v : r) v /= n1;
  return r;
}

struct LambdaEstimate {
  double value = 0.0;
  std::size_t joint = 0;       ///< pairs with both components above level
  std::size_t exceedances = 0; ///< average marginal exceedance count
  bool flagged = false;        ///< fewer than 5 expected exceedances
};

/// Symmetrized empirical tail correlation
/// #{both above their u-quantile} / #{one above}, averaged over directions.
inline LambdaEstimate empirical_lambda(const std::vector<double>& x, const std::vector<double>& y, double u) {
  if (x.size() != y.size()) throw domain_error("empirical_lambda: samples differ in length");
  if (!(u > 0.0 && u < 1.0)) throw domain_error("empirical_lambda: u must lie in (0,1)");
  LambdaEstimate est;
  const std::size_t n = x.size();
  est.flagged = static_cast<double>(n) * (1.0 - u) < 5.0;
  if (n == 0) {
    est.flagged = true;
    return est;
  }
  const auto px = rank_pit(x), py = rank_pit(y);
  std::size_t nx = 0, ny = 0, both = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool ax = px[i] > u, ay = py[i] > u;
    nx += ax;
    ny += ay;
    both += ax && ay;
  }
  est.joint = both;
  est.exceedances = (nx + ny) / 2;
  if (nx == 0 || ny == 0) {
    est.flagged = true;
    return est;
  }
  est.value = 0.5 * (static_cast<double>(both) / nx + static_cast<double>(both) / ny);
  return est;
}

/// Hill estimate of the residual coefficient from the k largest values of
/// T = min(X*_1, X*_2), X* = 1 / (2 (1 - rank/(n+1))).
inline double hill_rho(const std::vector<double>& x, const std::vector<double>& y, int k = 40) {
  if (x.size() != y.size()) throw domain_error("hill_rho: samples differ in length");
  if (k < 10) throw domain_error("hill_rho: k must be at least 10");
  const std::size_t n = x.size();
  if (n <= static_cast<std::size_t>(k)) throw domain_error("hill_rho: need more than k observations");
  const auto px = rank_pit(x), py = rank_pit(y);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = std::min(0.5 / (1.0 - px[i]), 0.5 / (1.0 - py[i]));
  // Rank-based T ties in pairs by construction (one value per rank and
  // margin), so only a sample with fewer than k+1 distinct values is rejected.
  if (std::set<double>(t.begin(), t.end()).size() <= static_cast<std::size_t>(k))
    throw numeric_error("hill_rho: ties leave fewer than k distinct order statistics");
  std::partial_sort(t.begin(), t.begin() + k + 1, t.end(), std::greater<>());
  const double ref = std::log(t[k]);
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += std::log(t[i]) - ref;
  return s / k;
}

// ---------------------------------------------------------------------------
// Sum-transform QQ diagnostic
// ---------------------------------------------------------------------------

/// Per-observation standard-Laplace quantile of the standardized sum.
/// Gaussian type: F_L^{-1}(Phi(sum_j Phi^{-1}(u_ij) / sqrt(e' S e))).
/// Laplace type: sum_j F_L^{-1}(u_ij) / sqrt(e' S e), standard Laplace under the model.
inline std::vector<double> qq_sum_transform(const Matrix& uniforms, const Matrix& sigma, DepType dep) {
  if (uniforms.cols() != sigma.rows()) throw domain_error("qq_sum_transform: dimension mismatch");
  const double scale = std::sqrt(sigma.sum());
  std::vector<double> out(uniforms.rows());
  for (Eigen::Index i = 0; i < uniforms.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < uniforms.cols(); ++j) {
      const double p = uniforms(i, j);
      if (!(p > 0.0 && p < 1.0)) throw domain_error("qq_sum_transform: data must lie in (0,1)");
      s += dep == DepType::gaussian ? normal_quantile(p) : StdLaplace::quantile(p);
    }
    s /= scale;
    if (dep == DepType::gaussian) {
      // Work on the side of the sum that keeps precision.
      s = s > 0.0 ? StdLaplace::quantile_survival(std::max(normal_sf(s), 1e-300))
                  : StdLaplace::quantile(std::max(normal_cdf(s), 1e-300));
    }
    out[i] = s;
  }
  return out;
}

struct QQPoint {
  double theoretical;
  double empirical;
};

/// Sorted sample against standard-Laplace plotting positions i/(n+1), kept
/// where the plotting position is at least `min_prob`.
inline std::vector<QQPoint> qq_points(std::vector<double> sample, double min_prob = 0.0) {
  std::sort(sample.begin(), sample.end());
  std::vector<QQPoint> out;
  const double n1 = static_cast<double>(sample.size()) + 1.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double p = (i + 1) / n1;
    if (p >= min_prob) out.push_back({StdLaplace::quantile(p), sample[i]});
  }
  return out;
}

}  // namespace lapfield
