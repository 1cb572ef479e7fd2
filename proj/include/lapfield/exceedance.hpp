#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "lapfield/distributions.hpp"
#include "lapfield/error.hpp"
#include "lapfield/laplace_field.hpp"
#include "lapfield/linalg.hpp"
#include "lapfield/mvn.hpp"
#include "lapfield/quadrature.hpp"
#include "lapfield/random.hpp"

namespace lapfield {

enum class ExceedanceKind { marginal, sum, max, min };

inline std::string to_string(ExceedanceKind k) {
  switch (k) {
    case ExceedanceKind::marginal: return "marginal";
    case ExceedanceKind::sum: return "sum";
    case ExceedanceKind::max: return "max";
    case ExceedanceKind::min: return "min";
  }
  return "?";
}

inline ExceedanceKind parse_exceedance_kind(const std::string& s) {
  if (s == "marginal") return ExceedanceKind::marginal;
  if (s == "sum") return ExceedanceKind::sum;
  if (s == "max") return ExceedanceKind::max;
  if (s == "min") return ExceedanceKind::min;
  throw schema_error("unknown exceedance kind '" + s + "'");
}

/// Exceedance set on the standard-margin scale:
///   marginal {x_c > u}, sum {sum x > u}, max {max x > u}, min {min x > u}.
struct ExceedanceSpec {
  ExceedanceKind kind = ExceedanceKind::max;
  double u = 1.0;
  int component = 0;

  void validate(int dim) const {
    if (!(u > 0.0) || !std::isfinite(u)) throw domain_error("ExceedanceSpec: threshold must be positive");
    if (kind == ExceedanceKind::marginal && (component < 0 || component >= dim))
      throw domain_error("ExceedanceSpec: component out of range");
  }

  bool contains(const Vector& x) const {
    switch (kind) {
      case ExceedanceKind::marginal: return x[component] > u;
      case ExceedanceKind::sum: return x.sum() > u;
      case ExceedanceKind::max: return x.maxCoeff() > u;
      case ExceedanceKind::min: return x.minCoeff() > u;
    }
    return false;
  }
};

/// Controls for int_0^inf Phi_Sigma(b/y) f_Y(y) dy and its complement.
/// Per-node Gaussian estimator: the randomized lattice for Phi_Sigma, or
/// conditional Monte Carlo for the union complement (large D, rare events).
enum class GaussianEngine { lattice, union_mc };

struct OrthantIntegralOptions {
  int nodes = 64;
  /// Double the number of Gauss–Legendre panels until successive estimates
  /// agree to rel_tol (or max_panels is reached).
  bool adaptive = true;
  int max_panels = 16;
  double rel_tol = 1e-5;
  /// Mass discarded at each end of the mixing range, relative to a scale of
  /// the answer.
  double truncation = 1e-12;
  /// Options for the pilot run that fixes the lattice size; every node then
  /// reuses the same point set so the integrand is smooth in y.
  MvnOptions mvn{};
  /// If nonzero, skip the pilot and use exactly this many lattice points.
  std::size_t fixed_points = 0;
  GaussianEngine engine = GaussianEngine::lattice;
  /// union_mc: number of conditioned draws and their seed.
  std::size_t union_draws = 16384;
  std::uint64_t union_seed = 0x5eed'1a91ULL;
};

struct OrthantIntegral {
  double value = 0.0;        ///< P(X <= b)
  double complement = 1.0;   ///< P(X not<= b)
  double quad_error = 0.0;   ///< difference between the last two panel refinements
  double mvn_error = 0.0;    ///< weighted sum of per-node lattice error estimates
  int evaluations = 0;
  std::size_t points = 0;    ///< lattice points per node
};

namespace detail {

// Which of the two integrands is accumulated.
enum class OrthantTarget { value, complement };

inline MvnResult gauss_orthant(const Matrix& corr, const Vector& b, const MvnOptions& opt) { return mvn_cdf(corr, b, opt); }

}  // namespace detail

/// Laplace-vector orthant probability through the Gaussian mixture
/// representation X = Y W with E = Y^2/2 standard exponential:
///   P(X <= b) = int_0^inf Phi_Sigma(b / sqrt(2E)) e^{-E} dE.
/// The chosen integrand (value or complement, so tiny probabilities keep
/// relative precision) is integrated in t = log E over a range truncated with
/// union/Frechet bounds.
inline OrthantIntegral laplace_orthant(const Matrix& corr, const Vector& b, bool want_complement,
                                       const OrthantIntegralOptions& opt = {}) {
  const int d = static_cast<int>(corr.rows());
  if (d < 1 || corr.cols() != d || b.size() != d) throw domain_error("laplace_orthant: dimension mismatch");
  if (opt.nodes < 2) throw domain_error("laplace_orthant: need at least two nodes");
  Vector sd(d);
  for (int j = 0; j < d; ++j) {
    if (!(corr(j, j) > 0.0)) throw domain_error("laplace_orthant: non-positive variance");
    if (std::isnan(b[j])) throw domain_error("laplace_orthant: NaN bound");
    sd[j] = std::sqrt(corr(j, j));
  }
  const Vector z = b.cwiseQuotient(sd);

  if (d == 1) {
    const double v = StdLaplace::cdf(z[0]), c = StdLaplace::survival(z[0]);
    return {v, c, 0.0, 0.0, 0, 0};
  }

  // Scale of the answer and a monotone bound B(E) of the integrand.
  double scale;
  if (want_complement) {
    scale = 0.0;
    for (int j = 0; j < d; ++j) scale = std::max(scale, StdLaplace::survival(z[j]));
  } else {
    scale = 1.0;
    for (int j = 0; j < d; ++j) scale = std::min(scale, StdLaplace::cdf(z[j]));
  }
  if (scale == 0.0) return want_complement ? OrthantIntegral{1.0, 0.0, 0.0, 0.0, 0, 0} : OrthantIntegral{0.0, 1.0, 0.0, 0.0, 0, 0};
  auto bound = [&](double e) {
    const double y = std::sqrt(2.0 * e);
    if (want_complement) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += z[j] > 0.0 ? normal_sf(z[j] / y) : 1.0;
      return std::min(1.0, s);
    }
    double m = 1.0;
    for (int j = 0; j < d; ++j)
      if (z[j] < 0.0) m = std::min(m, normal_cdf(z[j] / y));
    return m;
  };
  const double target = opt.truncation * scale;
  const double e_hi = std::max(1.0, -std::log(target));
  double e_lo = target;
  if (e_lo * bound(e_lo) < target) {
    double lo = std::log(target), hi = std::log(e_hi);
    for (int it = 0; it < 200 && hi - lo > 1e-6; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double e = std::exp(mid);
      (e * bound(e) <= target ? lo : hi) = mid;
    }
    e_lo = std::exp(lo);
  }
  const double t_lo = std::log(e_lo), t_hi = std::log(e_hi);

  const bool use_union = opt.engine == GaussianEngine::union_mc;
  if (use_union && !want_complement) throw domain_error("laplace_orthant: union engine only computes complements");
  std::unique_ptr<GaussUnionSampler> sampler;
  if (use_union) {
    const Matrix unit = sd.cwiseInverse().asDiagonal() * corr * sd.cwiseInverse().asDiagonal();
    sampler = std::make_unique<GaussUnionSampler>(unit, opt.union_draws, opt.union_seed);
  }

  // Pilot: size the lattice at the node carrying the largest bound mass.
  MvnOptions mopt = opt.mvn;
  std::size_t points = use_union ? sampler->draws() : opt.fixed_points;
  if (points == 0) {
    double best = -1.0, t_best = 0.5 * (t_lo + t_hi);
    for (int i = 0; i <= 200; ++i) {
      const double t = t_lo + (t_hi - t_lo) * i / 200.0;
      const double e = std::exp(t);
      const double m = bound(e) * std::exp(-e) * e;
      if (m > best) {
        best = m;
        t_best = t;
      }
    }
    const Vector bb = z / std::sqrt(2.0 * std::exp(t_best));
    points = std::max<std::size_t>(detail::gauss_orthant(corr, bb, mopt).points, mopt.shifts * 64);
  }
  mopt.min_points = points;
  mopt.max_points = points;
  mopt.abs_tol = std::numeric_limits<double>::infinity();

  OrthantIntegral out;
  out.points = points;
  auto run = [&](int panels, double& mvn_err) {
    std::vector<double> x, w;
    gauss_legendre_nodes(t_lo, t_hi, opt.nodes, panels, x, w);
    double sum = 0.0;
    mvn_err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = std::exp(x[i]);
      const double jac = std::exp(-e) * e;
      if (jac == 0.0) continue;
      if (bound(e) * jac * (t_hi - t_lo) < 1e-3 * target) continue;  // negligible node
      const Vector bb = z / std::sqrt(2.0 * e);
      const auto r = use_union ? (*sampler)(bb) : detail::gauss_orthant(corr, bb, mopt);
      ++out.evaluations;
      sum += w[i] * jac * (want_complement ? r.complement : r.value);
      mvn_err += w[i] * jac * r.error;
    }
    return sum;
  };

  double err_prev = 0.0;
  double prev = run(1, err_prev);
  double cur = prev, err_cur = err_prev;
  int panels = 1;
  out.quad_error = std::numeric_limits<double>::infinity();
  if (opt.adaptive) {
    while (panels < opt.max_panels) {
      panels *= 2;
      cur = run(panels, err_cur);
      out.quad_error = std::fabs(cur - prev);
      if (out.quad_error <= opt.rel_tol * std::fabs(cur)) break;
      prev = cur;
    }
  } else {
    out.quad_error = 0.0;  // not estimated for a single fixed rule
  }
  // Discarded tails.
  out.quad_error += 2.0 * target;
  out.mvn_error = err_cur;
  const double p = std::clamp(cur, 0.0, 1.0);
  if (want_complement) {
    out.complement = p;
    out.value = 1.0 - p;
  } else {
    out.value = p;
    out.complement = 1.0 - p;
  }
  return out;
}

/// P(X not<= b) for the Laplace field with correlation corr.
inline OrthantIntegral laplace_exceed_prob(const Matrix& corr, const Vector& b, const OrthantIntegralOptions& opt = {}) {
  return laplace_orthant(corr, b, true, opt);
}

struct ExceedanceProb {
  double p = 0.0;
  double quad_error = 0.0;
  double mvn_error = 0.0;
  bool exact = false;
  std::string method;
};

/// p_A = P(X in A) for a correlation matrix and dependence type.
inline ExceedanceProb exceedance_prob(const Matrix& corr, DepType dep, const ExceedanceSpec& spec,
                                      const OrthantIntegralOptions& opt = {}) {
  const int d = static_cast<int>(corr.rows());
  spec.validate(d);
  const bool lap = dep == DepType::laplace;
  switch (spec.kind) {
    case ExceedanceKind::marginal: {
      const double s = spec.u / std::sqrt(corr(spec.component, spec.component));
      return {lap ? StdLaplace::survival(s) : normal_sf(s), 0.0, 0.0, true, "closed-form"};
    }
    case ExceedanceKind::sum: {
      const double s = spec.u / std::sqrt(corr.sum());
      return {lap ? StdLaplace::survival(s) : normal_sf(s), 0.0, 0.0, true, "closed-form"};
    }
    case ExceedanceKind::max: {
      const Vector b = Vector::Constant(d, spec.u);
      if (!lap) {
        const auto r = mvn_cdf(corr, b, opt.mvn);
        return {r.complement, 0.0, r.error, d <= 2, "mvn"};
      }
      const auto r = laplace_orthant(corr, b, true, opt);
      return {r.complement, r.quad_error, r.mvn_error, d == 1, "mixture-quadrature"};
    }
    case ExceedanceKind::min: {
      // Central symmetry: P(min X > u) = P(X <= -u e).
      const Vector b = Vector::Constant(d, -spec.u);
      if (!lap) {
        const auto r = mvn_cdf(corr, b, opt.mvn);
        return {r.value, 0.0, r.error, d <= 2, "mvn"};
      }
      const auto r = laplace_orthant(corr, b, false, opt);
      return {r.value, r.quad_error, r.mvn_error, d == 1, "mixture-quadrature"};
    }
  }
  throw domain_error("exceedance_prob: unknown kind");
}

struct MonteCarloEstimate {
  double p = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Plain Monte Carlo estimate of P(X in A) from n >= 10000 field draws.
inline MonteCarloEstimate exceedance_prob_mc(const LaplaceFieldModel& model, const ExceedanceSpec& spec, Rng& rng,
                                             std::size_t n) {
  if (n < 10000) throw domain_error("exceedance_prob_mc: use at least 10000 draws");
  spec.validate(model.dim());
  std::size_t hits = 0;
  const std::size_t chunk = 100000;
  for (std::size_t done = 0; done < n; done += chunk) {
    const Matrix x = simulate(model, rng, std::min(chunk, n - done));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (spec.contains(x.row(i).transpose())) ++hits;
  }
  const double p = static_cast<double>(hits) / n;
  return {p, std::sqrt(std::max(p * (1 - p), 1.0 / n) / n), n};
}

}  // namespace lapfield
