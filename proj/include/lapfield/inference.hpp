#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lapfield/covariance.hpp"
#include "lapfield/distributions.hpp"
#include "lapfield/error.hpp"
#include "lapfield/exceedance.hpp"
#include "lapfield/laplace_field.hpp"
#include "lapfield/linalg.hpp"
#include "lapfield/optim.hpp"
#include "lapfield/parallel.hpp"
#include "lapfield/random.hpp"
#include "lapfield/tail.hpp"

namespace lapfield {

/// Optimizer gave up; carries the best point seen.
class fit_error : public numeric_error {
 public:
  fit_error(const std::string& what, Vector best, double best_value, std::vector<double> trace)
      : numeric_error(what), best_(std::move(best)), best_value_(best_value), trace_(std::move(trace)) {}
  const Vector& best() const { return best_; }
  double best_value() const { return best_value_; }
  const std::vector<double>& trace() const { return trace_; }

 private:
  Vector best_;
  double best_value_;
  std::vector<double> trace_;
};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// Observation matrix, one row per time and one column per site. Rows with a
/// missing (NaN) component are dropped on construction.
struct Dataset {
  std::vector<std::string> site_ids;
  std::vector<std::string> time_ids;
  Matrix obs;
  std::size_t dropped_rows = 0;

  std::size_t rows() const { return static_cast<std::size_t>(obs.rows()); }
  std::size_t sites() const { return static_cast<std::size_t>(obs.cols()); }

  static Dataset from_rows(std::vector<std::string> site_ids, const std::vector<std::string>& time_ids,
                           const std::vector<std::vector<double>>& rows) {
    if (time_ids.size() != rows.size()) throw domain_error("Dataset: time ids and rows differ in length");
    Dataset d;
    d.site_ids = std::move(site_ids);
    const std::size_t s = d.site_ids.size();
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != s) throw schema_error("Dataset: row " + std::to_string(i) + " has wrong width");
      if (std::any_of(rows[i].begin(), rows[i].end(), [](double v) { return std::isnan(v); }))
        ++d.dropped_rows;
      else
        keep.push_back(i);
    }
    d.obs.resize(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(s));
    for (std::size_t r = 0; r < keep.size(); ++r) {
      d.time_ids.push_back(time_ids[keep[r]]);
      for (std::size_t j = 0; j < s; ++j) d.obs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[keep[r]][j];
    }
    return d;
  }
};

/// Per-column ranks / (n + 1) with average ranks for ties.
inline Matrix empirical_pit(const Matrix& obs) {
  if (obs.rows() < 2) throw domain_error("empirical_pit: need at least two rows");
  Matrix out(obs.rows(), obs.cols());
  for (Eigen::Index j = 0; j < obs.cols(); ++j) {
    const std::vector<double> col(obs.col(j).data(), obs.col(j).data() + obs.rows());
    const auto r = rank_pit(col);
    for (Eigen::Index i = 0; i < obs.rows(); ++i) out(i, j) = r[static_cast<std::size_t>(i)];
  }
  return out;
}

/// Standard-margin scale of the dependence type: F^{-1} applied entrywise.
inline Matrix to_margin(const Matrix& uniforms, DepType target) {
  Matrix out(uniforms.rows(), uniforms.cols());
  for (Eigen::Index i = 0; i < uniforms.rows(); ++i)
    for (Eigen::Index j = 0; j < uniforms.cols(); ++j) {
      const double p = uniforms(i, j);
      if (!(p > 0.0 && p < 1.0)) throw domain_error("to_margin: entries must lie in (0,1)");
      out(i, j) = target == DepType::laplace ? StdLaplace::quantile(p) : normal_quantile(p);
    }
  return out;
}

inline double margin_logpdf(double x, DepType target) {
  return target == DepType::laplace ? -std::fabs(x) - std::numbers::ln2
                                    : -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double margin_quantile(double p, DepType target) {
  return target == DepType::laplace ? StdLaplace::quantile(p) : normal_quantile(p);
}

// ---------------------------------------------------------------------------
// Weibull margins
// ---------------------------------------------------------------------------

struct WeibullFitOptions {
  bool fit_delta1 = true;
  NelderMeadOptions nm{4000, 1e-12, 1e-8, 2};
};

struct WeibullFit {
  WeibullTail tail;
  double loglik = 0.0;
  std::size_t exceedances = 0;
  std::size_t censored = 0;
  int evaluations = 0;
};

namespace detail {

// Data reduced to what the censored Weibull likelihood needs.
struct WeibullSuffStats {
  std::vector<double> covariate;          // per site
  std::vector<std::size_t> censored;      // per site
  std::vector<std::vector<double>> logx;  // per site, exceedances
  std::vector<double> sum_logx;           // per site
  std::size_t exceedances = 0;
  double u = 0.0;
};

inline WeibullSuffStats weibull_stats(const Matrix& obs, const std::vector<double>& covariate, double u) {
  if (static_cast<std::size_t>(obs.cols()) != covariate.size()) throw domain_error("fit_weibull_margins: covariate count != sites");
  if (!(u > 0.0)) throw domain_error("fit_weibull_margins: threshold must be positive");
  WeibullSuffStats s;
  s.u = u;
  s.covariate = covariate;
  const auto ns = covariate.size();
  s.censored.assign(ns, 0);
  s.logx.resize(ns);
  s.sum_logx.assign(ns, 0.0);
  for (std::size_t j = 0; j < ns; ++j)
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
      const double x = obs(i, static_cast<Eigen::Index>(j));
      if (!(x >= 0.0)) throw domain_error("fit_weibull_margins: observations must be nonnegative");
      if (x > u) {
        s.logx[j].push_back(std::log(x));
        s.sum_logx[j] += std::log(x);
        ++s.exceedances;
      } else {
        ++s.censored[j];
      }
    }
  return s;
}

// Sum over sites and days of the censored contribution: log F(u) below the
// threshold, log f(x) above.
inline double weibull_loglik(const WeibullSuffStats& s, double gamma, double delta0, double delta1) {
  if (!(gamma > 0.0)) return -std::numeric_limits<double>::infinity();
  double ll = 0.0;
  const double lg = std::log(gamma);
  for (std::size_t j = 0; j < s.covariate.size(); ++j) {
    const double ld = delta0 + delta1 * s.covariate[j];
    if (s.censored[j] > 0) {
      const double z = std::exp(gamma * (std::log(s.u) - ld));
      ll += s.censored[j] * std::log(-std::expm1(-z));
    }
    const auto& lx = s.logx[j];
    if (lx.empty()) continue;
    double pw = 0.0;
    for (double v : lx) pw += std::exp(gamma * (v - ld));
    ll += lx.size() * (lg - gamma * ld) + (gamma - 1.0) * s.sum_logx[j] - pw;
  }
  return ll;
}

}  // namespace detail

/// Censored independence log-likelihood of a Weibull tail with
/// delta = exp(delta0 + delta1 * covariate), summed over sites and days.
inline double weibull_censored_loglik(const WeibullTail& w, const Matrix& obs, const std::vector<double>& covariate, double u) {
  return detail::weibull_loglik(detail::weibull_stats(obs, covariate, u), w.gamma, w.delta0, w.delta1);
}

/// Maximum likelihood for (gamma, delta0, delta1) from observations above u,
/// censoring the rest at u.
inline WeibullFit fit_weibull_margins(const Matrix& obs, const std::vector<double>& covariate, double u,
                                      const WeibullFitOptions& opt = {}) {
  const auto s = detail::weibull_stats(obs, covariate, u);
  if (s.exceedances < 30) throw domain_error("fit_weibull_margins: fewer than 30 exceedances");

  // Start: least squares on the pooled Weibull plot of the exceedances.
  std::vector<double> pooled;
  for (const auto& v : s.logx) pooled.insert(pooled.end(), v.begin(), v.end());
  std::sort(pooled.begin(), pooled.end(), std::greater<>());
  const double total = static_cast<double>(obs.size()) + 1.0;
  double mx = 0, my = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const double y = std::log(-std::log((i + 1) / total));
    mx += pooled[i];
    my += y;
  }
  mx /= m;
  my /= m;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const double y = std::log(-std::log((i + 1) / total));
    sxx += (pooled[i] - mx) * (pooled[i] - mx);
    sxy += (pooled[i] - mx) * (y - my);
  }
  double g0 = sxx > 0.0 ? sxy / sxx : 2.0;
  if (!(g0 > 0.05 && g0 < 50.0)) g0 = 2.0;
  const double d0 = mx - my / g0;

  double cscale = 0.0;
  for (double c : covariate) cscale = std::max(cscale, std::fabs(c));
  if (cscale == 0.0) cscale = 1.0;
  const bool with_d1 = opt.fit_delta1;

  auto unpack = [&](const Vector& p) {
    return std::array<double, 3>{std::exp(p[0]), p[1], with_d1 ? p[2] / cscale : 0.0};
  };
  auto objective = [&](const Vector& p) {
    const auto [g, a, b] = unpack(p);
    const double ll = detail::weibull_loglik(s, g, a, b);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };
  Vector x0(with_d1 ? 3 : 2), step(with_d1 ? 3 : 2);
  x0[0] = std::log(g0);
  x0[1] = d0;
  step[0] = 0.1;
  step[1] = 0.1;
  if (with_d1) {
    x0[2] = 0.0;
    step[2] = 0.1;
  }
  const auto r = nelder_mead(objective, x0, step, opt.nm);
  if (!r.converged || !std::isfinite(r.value))
    throw fit_error("fit_weibull_margins: optimizer did not converge", r.x, -r.value, r.trace);
  const auto [g, a, b] = unpack(r.x);
  WeibullFit out;
  out.tail = {g, a, b, u};
  out.loglik = -r.value;
  out.exceedances = s.exceedances;
  out.censored = static_cast<std::size_t>(obs.size()) - s.exceedances;
  out.evaluations = r.evaluations;
  return out;
}

// ---------------------------------------------------------------------------
// Censored dependence likelihood
// ---------------------------------------------------------------------------

/// Deterministic exceedance-probability settings for use inside an
/// optimizer: fixed Gauss–Legendre rule, fixed lattice size and seed, no
/// variable reordering, so the objective is a smooth function of Sigma*.
inline OrthantIntegralOptions inference_orthant_options(std::size_t points = 3072, int nodes = 32) {
  OrthantIntegralOptions o;
  o.nodes = nodes;
  o.adaptive = false;
  o.fixed_points = points;
  o.mvn.reorder = false;
  o.mvn.min_points = points;
  o.mvn.max_points = points;
  o.mvn.abs_tol = std::numeric_limits<double>::infinity();
  return o;
}

struct CensoredLikOptions {
  /// Add -sum_j log f(x_ij) on exceedance rows so values computed on the
  /// Laplace and Gaussian scales of the same uniform data are comparable.
  bool jacobian = true;
  OrthantIntegralOptions orthant = inference_orthant_options();
};

struct CensoredLoglik {
  double value = 0.0;
  double p_exceed = 0.0;
  std::size_t exceedances = 0;
  std::size_t censored = 0;
};

/// p_A for a fitted model: deterministic quadrature or closed form; falls
/// back to simulation (n >= 10000) when the quadrature fails and an Rng is
/// supplied.
inline ExceedanceProb exceedance_prob_pA(const LaplaceFieldModel& model, const ExceedanceSpec& spec,
                                         const OrthantIntegralOptions& opt = {}, Rng* fallback = nullptr,
                                         std::size_t mc_draws = 100000) {
  try {
    return exceedance_prob(model.sigma_star, model.dep_type, spec, opt);
  } catch (const numeric_error&) {
    if (!fallback) throw;
  }
  const auto mc = exceedance_prob_mc(model, spec, *fallback, std::max<std::size_t>(mc_draws, 10000));
  return {mc.p, 0.0, mc.se, false, "monte-carlo"};
}

/// Censored log-likelihood of standard-margin data x (rows = observations):
/// log(1 - p_A) for rows outside A, the joint log-density inside A.
inline CensoredLoglik censored_loglik(const LaplaceFieldModel& model, const Matrix& x, const ExceedanceSpec& spec,
                                      const CensoredLikOptions& opt = {}) {
  const int d = model.dim();
  if (x.cols() != d) throw domain_error("censored_loglik: data width differs from model dimension");
  spec.validate(d);
  const double p = exceedance_prob(model.sigma_star, model.dep_type, spec, opt.orthant).p;
  if (!(p > 0.0 && p < 1.0)) throw numeric_error("censored_loglik: exceedance probability is degenerate");
  const double log_cens = std::log1p(-p);

  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t block = 256, nb = (n + block - 1) / block;
  std::vector<double> part(nb, 0.0);
  std::vector<std::size_t> hits(nb, 0);
  parallel_for(nb, [&](std::size_t b) {
    const std::size_t hi = std::min(n, (b + 1) * block);
    for (std::size_t i = b * block; i < hi; ++i) {
      const Vector xi = x.row(static_cast<Eigen::Index>(i)).transpose();
      if (!spec.contains(xi)) {
        part[b] += log_cens;
        continue;
      }
      ++hits[b];
      part[b] += model.dep_type == DepType::laplace ? mv_laplace_logpdf(model.factor, xi) : mv_gauss_logpdf(model.factor, xi);
      if (opt.jacobian)
        for (int j = 0; j < d; ++j) part[b] -= margin_logpdf(xi[j], model.dep_type);
    }
  });
  CensoredLoglik out;
  out.p_exceed = p;
  for (std::size_t b = 0; b < nb; ++b) {
    out.value += part[b];
    out.exceedances += hits[b];
  }
  out.censored = n - out.exceedances;
  return out;
}

// ---------------------------------------------------------------------------
// Dependence fit
// ---------------------------------------------------------------------------

struct DependenceFitOptions {
  ExceedanceKind kind = ExceedanceKind::max;
  /// Uniform-margin probability mapped through the target quantile.
  double threshold_prob = 0.975;
  bool anisotropic = false;
  /// Matern smoothness values profiled over; empty means the default grid.
  std::vector<double> nu_grid;
  /// Optimizer runs from jittered starts; the best is kept.
  int starts = 3;
  std::uint64_t seed = 20240601;
  CensoredLikOptions lik{};
  NelderMeadOptions nm{600, 1e-8, 1e-5, 1};
};

struct FitResult {
  CorrelationSpec spec;
  DepType dep = DepType::laplace;
  std::vector<std::pair<std::string, double>> params;
  std::map<std::string, double> se;
  double loglik = 0.0;
  double aic = 0.0;
  int dim = 0;
  double threshold_prob = 0.0;
  double threshold_u = 0.0;
  std::size_t exceedances = 0;
  std::size_t n_obs = 0;
  double p_exceed = 0.0;
  std::optional<double> nu;
  int evaluations = 0;

  double param(const std::string& name) const {
    for (const auto& [k, v] : params)
      if (k == name) return v;
    throw domain_error("FitResult: no parameter '" + name + "'");
  }
};

/// AIC in the convention 2 loglik - 2 dim (larger is better).
inline double aic_value(double loglik, int dim) { return 2.0 * loglik - 2.0 * dim; }

namespace detail {

// Unconstrained coordinates: log scale, logit(shape/2) for the stable
// exponent, theta (wrapped into [0, pi)), log(b - 1).
struct DependenceParametrization {
  CorrelationFamily family;
  bool anisotropic;
  double nu = 1.0;

  int dim() const { return 1 + (family == CorrelationFamily::stable) + (anisotropic ? 2 : 0); }

  CorrelationSpec decode(const Vector& p) const {
    CorrelationSpec s;
    s.family = family;
    s.anisotropic = anisotropic;
    int k = 0;
    s.scale = std::exp(p[k++]);
    if (family == CorrelationFamily::stable) s.shape = 2.0 / (1.0 + std::exp(-p[k++]));
    else if (family == CorrelationFamily::matern) s.shape = nu;
    if (anisotropic) {
      s.theta = std::fmod(p[k++], std::numbers::pi);
      if (s.theta < 0.0) s.theta += std::numbers::pi;
      s.b = 1.0 + std::exp(p[k++]);
    }
    return s;
  }

  Vector encode(const CorrelationSpec& s) const {
    Vector p(dim());
    int k = 0;
    p[k++] = std::log(s.scale);
    if (family == CorrelationFamily::stable) {
      const double a = std::clamp(s.shape / 2.0, 1e-6, 1.0 - 1e-6);
      p[k++] = std::log(a / (1.0 - a));
    }
    if (anisotropic) {
      p[k++] = s.theta;
      p[k++] = std::log(std::max(s.b - 1.0, 1e-8));
    }
    return p;
  }

  Vector steps() const {
    Vector st(dim());
    int k = 0;
    st[k++] = 0.5;
    if (family == CorrelationFamily::stable) st[k++] = 0.5;
    if (anisotropic) {
      st[k++] = 0.5;
      st[k++] = 1.0;
    }
    return st;
  }
};

}  // namespace detail

/// Censored maximum likelihood for the correlation parameters from
/// uniform-margin data. Matern smoothness is profiled over a grid and not
/// counted in the model dimension.
inline FitResult fit_dependence(const Matrix& uniforms, const SiteSet& sites, CorrelationFamily family, DepType dep,
                                const DependenceFitOptions& opt = {}) {
  sites.validate();
  if (static_cast<std::size_t>(uniforms.cols()) != sites.size()) throw domain_error("fit_dependence: data width != site count");
  if (!(opt.threshold_prob > 0.0 && opt.threshold_prob < 1.0)) throw domain_error("fit_dependence: threshold probability must lie in (0,1)");
  if (opt.starts < 1) throw domain_error("fit_dependence: need at least one start");
  const Matrix x = to_margin(uniforms, dep);
  ExceedanceSpec spec{opt.kind, margin_quantile(opt.threshold_prob, dep), 0};

  std::vector<double> nus{1.0};
  if (family == CorrelationFamily::matern) nus = opt.nu_grid.empty() ? default_matern_nu_grid() : opt.nu_grid;

  double med = median_intersite_distance(sites);
  if (!(med > 0.0)) med = 1.0;

  FitResult best;
  best.loglik = -std::numeric_limits<double>::infinity();
  int total_evals = 0;
  std::optional<fit_error> last_failure;
  for (double nu : nus) {
    const detail::DependenceParametrization par{family, opt.anisotropic, nu};
    CorrelationSpec start;
    start.family = family;
    start.scale = med;
    start.shape = family == CorrelationFamily::matern ? nu : 1.0;
    start.anisotropic = opt.anisotropic;
    start.theta = 0.0;
    start.b = 1.0 + 1e-3;
    const Vector x0 = par.encode(start);
    const Vector step = par.steps();
    auto objective = [&](const Vector& p) {
      try {
        const auto model = LaplaceFieldModel::build(sites, par.decode(p), dep);
        const double v = censored_loglik(model, x, spec, opt.lik).value;
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
      } catch (const numeric_error&) {
        return std::numeric_limits<double>::infinity();
      } catch (const domain_error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    Rng jitter(opt.seed);
    OptimResult run_best;
    for (int s = 0; s < opt.starts; ++s) {
      Vector xs = x0;
      if (s > 0)
        for (Eigen::Index k = 0; k < xs.size(); ++k) xs[k] += step[k] * (2.0 * jitter.uniform() - 1.0);
      auto r = nelder_mead(objective, xs, step, opt.nm);
      total_evals += r.evaluations;
      if (r.value < run_best.value) run_best = std::move(r);
    }
    if (!std::isfinite(run_best.value)) {
      last_failure.emplace("fit_dependence: no finite likelihood value", x0, -run_best.value, run_best.trace);
      continue;
    }
    if (!run_best.converged) {
      last_failure.emplace("fit_dependence: optimizer did not converge", run_best.x, -run_best.value, run_best.trace);
      continue;
    }
    if (-run_best.value > best.loglik) {
      best.spec = par.decode(run_best.x);
      best.loglik = -run_best.value;
      best.dim = par.dim();
      if (family == CorrelationFamily::matern) best.nu = nu;
    }
  }
  if (!std::isfinite(best.loglik)) {
    if (last_failure) throw *last_failure;
    throw numeric_error("fit_dependence: no candidate fitted");
  }

  const auto model = LaplaceFieldModel::build(sites, best.spec, dep);
  const auto ll = censored_loglik(model, x, spec, opt.lik);
  best.dep = dep;
  best.loglik = ll.value;
  best.aic = aic_value(ll.value, best.dim);
  best.threshold_prob = opt.threshold_prob;
  best.threshold_u = spec.u;
  best.exceedances = ll.exceedances;
  best.n_obs = static_cast<std::size_t>(x.rows());
  best.p_exceed = ll.p_exceed;
  best.evaluations = total_evals;
  best.params.emplace_back("scale", best.spec.scale);
  if (family == CorrelationFamily::stable) best.params.emplace_back("shape", best.spec.shape);
  if (family == CorrelationFamily::matern) best.params.emplace_back("nu", best.spec.shape);
  if (opt.anisotropic) {
    best.params.emplace_back("theta", best.spec.theta);
    best.params.emplace_back("b", best.spec.b);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Block bootstrap
// ---------------------------------------------------------------------------

struct BootstrapResult {
  Matrix estimates;  ///< successful replicates x parameters
  Vector se;
  Vector lower, upper;  ///< percentile interval
  int failures = 0;
};

/// Row indices of a moving-block resample of length n.
inline std::vector<std::size_t> block_resample_indices(std::size_t n, std::size_t block, Rng& rng) {
  if (block < 1 || block > n) throw domain_error("block_resample_indices: need 1 <= block <= n");
  std::vector<std::size_t> idx;
  idx.reserve(n + block);
  const std::size_t starts = n - block + 1;
  while (idx.size() < n) {
    const std::size_t s = static_cast<std::size_t>(rng.uniform() * starts);
    for (std::size_t k = 0; k < block && idx.size() < n; ++k) idx.push_back(std::min(s, starts - 1) + k);
  }
  return idx;
}

/// Moving-block bootstrap of a fit: resample contiguous blocks of rows with
/// replacement, refit, and summarize. Replicate r uses substream r, so
/// results do not depend on the thread count. Failed refits are counted and
/// excluded.
template <class Fit>
BootstrapResult block_bootstrap(const Matrix& data, Fit&& fit, std::size_t block, int reps, std::uint64_t seed,
                                double level = 0.95) {
  if (reps < 2) throw domain_error("block_bootstrap: need at least two replicates");
  const std::size_t n = static_cast<std::size_t>(data.rows());
  if (block < 1 || block > n) throw domain_error("block_bootstrap: need 1 <= block <= rows");
  std::vector<std::optional<Vector>> est(static_cast<std::size_t>(reps));
  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
    Rng rng(stream_seed(seed, r));
    const auto idx = block_resample_indices(n, block, rng);
    Matrix sample(data.rows(), data.cols());
    for (std::size_t i = 0; i < n; ++i) sample.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(idx[i]));
    try {
      est[r] = fit(sample);
    } catch (const std::exception&) {
      est[r].reset();
    }
  });
  BootstrapResult out;
  std::vector<Vector> ok;
  for (auto& e : est) {
    if (e && e->allFinite()) ok.push_back(*e);
    else ++out.failures;
  }
  if (ok.size() < 2) throw numeric_error("block_bootstrap: fewer than two successful replicates");
  const Eigen::Index p = ok.front().size();
  out.estimates.resize(static_cast<Eigen::Index>(ok.size()), p);
  for (std::size_t i = 0; i < ok.size(); ++i) out.estimates.row(static_cast<Eigen::Index>(i)) = ok[i].transpose();
  out.se.resize(p);
  out.lower.resize(p);
  out.upper.resize(p);
  const double a = 0.5 * (1.0 - level);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> col(out.estimates.col(j).data(), out.estimates.col(j).data() + out.estimates.rows());
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    out.se[j] = std::sqrt(ss / (col.size() - 1));
    std::sort(col.begin(), col.end());
    auto q = [&](double prob) {
      const double h = prob * (col.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const auto hi = std::min(lo + 1, col.size() - 1);
      return col[lo] + (h - lo) * (col[hi] - col[lo]);
    };
    out.lower[j] = q(a);
    out.upper[j] = q(1.0 - a);
  }
  return out;
}

}  // namespace lapfield
