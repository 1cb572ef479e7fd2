#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lapfield/error.hpp"
#include "lapfield/linalg.hpp"
#include "lapfield/parallel.hpp"
#include "lapfield/random.hpp"
#include "lapfield/special.hpp"

namespace lapfield {

/// Controls for the randomized-lattice estimator of Phi_Sigma(b).
struct MvnOptions {
  double abs_tol = 1e-4;
  /// Additional tolerance relative to min(value, complement); 0 disables.
  double rel_tol = 0.0;
  /// Lower bound on the total number of lattice points (all shifts).
  std::size_t min_points = 0;
  std::size_t max_points = 10'000'000;
  unsigned shifts = 12;
  std::uint64_t seed = 0x6c61706c616365ULL;
  bool reorder = true;
  /// D <= 2 evaluated in closed form / by 1-D quadrature instead of QMC.
  bool closed_form_low_dim = true;
};

struct MvnResult {
  double value = 0.0;       ///< P(W <= b)
  double complement = 1.0;  ///< P(W not<= b), computed without cancellation
  double error = 0.0;       ///< 3 x standard error over random shifts
  std::size_t points = 0;
};

namespace detail {

inline std::vector<int> first_primes(std::size_t n) {
  std::vector<int> primes;
  if (n == 0) return primes;
  std::size_t limit = 64;
  for (;;) {
    std::vector<bool> composite(limit + 1, false);
    primes.clear();
    for (std::size_t i = 2; i <= limit && primes.size() < n; ++i) {
      if (composite[i]) continue;
      primes.push_back(static_cast<int>(i));
      for (std::size_t j = i * i; j <= limit; j += i) composite[j] = true;
    }
    if (primes.size() >= n) return primes;
    limit *= 2;
  }
}

/// P(X <= h, Y <= k) for a standard bivariate normal with correlation r,
/// via the arcsine-angle form of Plackett's identity.
inline double bvn_cdf(double h, double k, double r) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (h == -inf || k == -inf) return 0.0;
  if (h == inf) return normal_cdf(k);
  if (k == inf) return normal_cdf(h);
  r = std::clamp(r, -1.0, 1.0);
  const double base = normal_cdf(h) * normal_cdf(k);
  if (r == 0.0) return base;
  if (r == 1.0) return normal_cdf(std::min(h, k));
  if (r == -1.0) return std::max(0.0, normal_cdf(h) - normal_cdf(-k));
  const double hk2 = h * h + k * k;
  auto integrand = [&](double t) {
    const double s = std::sin(t), c = std::cos(t);
    return std::exp(-(hk2 - 2.0 * h * k * s) / (2.0 * c * c));
  };
  using boost::math::quadrature::gauss_kronrod;
  const double integral = gauss_kronrod<double, 31>::integrate(integrand, 0.0, std::asin(r), 8, 1e-12);
  return std::clamp(base + integral / (2.0 * std::numbers::pi), 0.0, 1.0);
}

// Reordered Cholesky factor (packed lower rows) and permuted bounds.
struct OrderedProblem {
  int dim = 0;
  std::vector<double> lower;  // row i holds L(i,0..i)
  std::vector<double> bounds;
  double at(int i, int j) const { return lower[static_cast<std::size_t>(i) * (i + 1) / 2 + j]; }
};

// Genz–Bretz ordering: at each step pick the variable with the smallest
// expected conditional probability, then extend the Cholesky factor.
inline OrderedProblem order_and_factor(Matrix a, Vector b, bool reorder) {
  const int n = static_cast<int>(a.rows());
  Matrix l = Matrix::Zero(n, n);
  std::vector<double> ybar(n, 0.0);
  for (int i = 0; i < n; ++i) {
    int pick = i;
    if (reorder) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = i; j < n; ++j) {
        double var = a(j, j), mean = 0.0;
        for (int m = 0; m < i; ++m) {
          var -= l(j, m) * l(j, m);
          mean += l(j, m) * ybar[m];
        }
        if (var <= 0.0) continue;
        const double p = normal_cdf((b[j] - mean) / std::sqrt(var));
        if (p < best) {
          best = p;
          pick = j;
        }
      }
    }
    if (pick != i) {
      a.row(i).swap(a.row(pick));
      a.col(i).swap(a.col(pick));
      l.row(i).swap(l.row(pick));
      std::swap(b[i], b[pick]);
    }
    double diag = a(i, i);
    for (int m = 0; m < i; ++m) diag -= l(i, m) * l(i, m);
    if (!(diag > 0.0)) throw numeric_error("mvn_cdf: covariance matrix is not positive definite");
    l(i, i) = std::sqrt(diag);
    for (int j = i + 1; j < n; ++j) {
      double v = a(j, i);
      for (int m = 0; m < i; ++m) v -= l(j, m) * l(i, m);
      l(j, i) = v / l(i, i);
    }
    double mean = 0.0;
    for (int m = 0; m < i; ++m) mean += l(i, m) * ybar[m];
    const double t = (b[i] - mean) / l(i, i);
    if (std::isinf(t)) {
      ybar[i] = 0.0;
    } else {
      const double phi = normal_cdf(t);
      ybar[i] = phi > 1e-300 ? -normal_pdf(t) / phi : t;
    }
  }
  OrderedProblem out;
  out.dim = n;
  out.bounds.assign(b.data(), b.data() + n);
  out.lower.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) out.lower.push_back(l(i, j));
  return out;
}

// log Phi(x) without cancellation on either tail.
inline double log_normal_cdf(double x) {
  if (x == std::numeric_limits<double>::infinity()) return 0.0;
  if (x > 0.0) return std::log1p(-normal_sf(x));
  return std::log(normal_cdf(x));
}

}  // namespace detail

/// P(W <= upper) for W ~ N(0, sigma), sigma a correlation or covariance
/// matrix. Separation-of-variables integrand on a randomized Richtmyer
/// (rank-1 Kronecker) lattice with tent periodization and variable
/// reordering; the point count doubles until 3 standard errors over the
/// random shifts fall below tolerance or the budget is spent.
inline MvnResult mvn_cdf(const Matrix& sigma, const Vector& upper, const MvnOptions& opt = {}) {
  const auto d_full = sigma.rows();
  if (d_full < 1 || sigma.cols() != d_full) throw domain_error("mvn_cdf: matrix must be square and nonempty");
  if (upper.size() != d_full) throw domain_error("mvn_cdf: bound vector has wrong length");
  if (opt.shifts < 2) throw domain_error("mvn_cdf: at least two random shifts are required");
  for (Eigen::Index i = 0; i < d_full; ++i)
    if (std::isnan(upper[i])) throw domain_error("mvn_cdf: NaN bound");

  // Factor first so that non-PD input fails even when bounds make it moot.
  const CholeskyFactor factor = cholesky(sigma);

  // Standardize; drop coordinates with +inf bounds (exact marginalization).
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < d_full; ++i) {
    if (upper[i] == -std::numeric_limits<double>::infinity()) return {0.0, 1.0, 0.0, 0};
    if (upper[i] != std::numeric_limits<double>::infinity()) keep.push_back(static_cast<int>(i));
  }
  if (keep.empty()) return {1.0, 0.0, 0.0, 0};
  const int d = static_cast<int>(keep.size());
  Matrix corr(d, d);
  Vector b(d);
  for (int i = 0; i < d; ++i) {
    const double si = std::sqrt(sigma(keep[i], keep[i]) + factor.jitter);
    b[i] = upper[keep[i]] / si;
    for (int j = 0; j < d; ++j) {
      const double sj = std::sqrt(sigma(keep[j], keep[j]) + factor.jitter);
      corr(i, j) = (sigma(keep[i], keep[j]) + (i == j ? factor.jitter : 0.0)) / (si * sj);
    }
  }

  if (d == 1 && opt.closed_form_low_dim) return {normal_cdf(b[0]), normal_sf(b[0]), 0.0, 0};
  if (d == 2 && opt.closed_form_low_dim) {
    const double r = corr(0, 1);
    const double value = detail::bvn_cdf(b[0], b[1], r);
    const double both_above = detail::bvn_cdf(-b[0], -b[1], r);
    const double complement = std::max(0.0, normal_sf(b[0]) + normal_sf(b[1]) - both_above);
    return {value, complement, 0.0, 0};
  }

  const detail::OrderedProblem prob = detail::order_and_factor(corr, b, opt.reorder);
  const int qdim = d - 1;  // the first conditional factor is deterministic
  const double log_first = detail::log_normal_cdf(prob.bounds[0] / prob.at(0, 0));

  const std::vector<int> primes = detail::first_primes(std::max(qdim, 1));
  std::vector<double> gen(qdim);
  for (int j = 0; j < qdim; ++j) {
    const double r = std::sqrt(static_cast<double>(primes[j]));
    gen[j] = r - std::floor(r);
  }
  const unsigned nshift = opt.shifts;
  std::vector<std::vector<double>> shift(nshift, std::vector<double>(qdim));
  {
    Rng rng(opt.seed);
    for (auto& s : shift)
      for (auto& v : s) v = rng.uniform();
  }

  std::vector<double> sum_val(nshift, 0.0), sum_comp(nshift, 0.0);
  std::size_t per_shift = std::max<std::size_t>(64, (opt.min_points + nshift - 1) / nshift);
  const std::size_t cap_per_shift = std::max<std::size_t>(1, opt.max_points / nshift);
  per_shift = std::min(per_shift, cap_per_shift);
  std::size_t done = 0;

  constexpr double tiny = 1e-300;
  constexpr double almost_one = 1.0 - 1e-16;
  // Points are processed in batches so the triangular products become
  // contiguous axpy updates over the batch.
  constexpr std::size_t batch = 32;
  auto eval_block = [&](unsigned s, std::size_t from, std::size_t to) {
    std::vector<double> ys(static_cast<std::size_t>(std::max(qdim, 1)) * batch);
    std::array<double, batch> a{}, e{}, logp{};
    double acc_val = 0.0, acc_comp = 0.0;
    for (std::size_t k0 = from + 1; k0 <= to; k0 += batch) {
      const std::size_t nb = std::min(batch, to + 1 - k0);
      const double e0 = std::exp(log_first);
      for (std::size_t t = 0; t < nb; ++t) {
        logp[t] = log_first;
        e[t] = e0;
      }
      for (int i = 0; i < d; ++i) {
        if (i > 0) {
          const double* row = &prob.lower[static_cast<std::size_t>(i) * (i + 1) / 2];
          for (std::size_t t = 0; t < nb; ++t) a[t] = prob.bounds[i];
          for (int m = 0; m < i; ++m) {
            const double lm = row[m];
            const double* ym = &ys[static_cast<std::size_t>(m) * batch];
            for (std::size_t t = 0; t < batch; ++t) a[t] -= lm * ym[t];
          }
          const double inv = 1.0 / row[i];
          for (std::size_t t = 0; t < nb; ++t) {
            const double z = a[t] * inv;
            if (z > 0.0) {
              const double sf = normal_sf(z);
              e[t] = 1.0 - sf;
              logp[t] += std::log1p(-sf);
            } else {
              e[t] = normal_cdf(z);
              logp[t] += std::log(e[t]);
            }
          }
        }
        if (i < qdim) {
          double* yi = &ys[static_cast<std::size_t>(i) * batch];
          for (std::size_t t = 0; t < nb; ++t) {
            const double x = static_cast<double>(k0 + t) * gen[i] + shift[s][i];
            const double w = std::fabs(2.0 * (x - std::floor(x)) - 1.0);
            yi[t] = normal_quantile(std::clamp(w * e[t], tiny, almost_one));
          }
          for (std::size_t t = nb; t < batch; ++t) yi[t] = 0.0;
        }
      }
      for (std::size_t t = 0; t < nb; ++t) {
        acc_val += std::exp(logp[t]);
        acc_comp += -std::expm1(logp[t]);
      }
    }
    sum_val[s] += acc_val;
    sum_comp[s] += acc_comp;
  };

  MvnResult result;
  for (;;) {
    parallel_for(nshift, [&](std::size_t s) { eval_block(static_cast<unsigned>(s), done, per_shift); });
    done = per_shift;
    double mean_val = 0.0, mean_comp = 0.0;
    for (unsigned s = 0; s < nshift; ++s) {
      mean_val += sum_val[s] / done;
      mean_comp += sum_comp[s] / done;
    }
    mean_val /= nshift;
    mean_comp /= nshift;
    double var = 0.0;
    for (unsigned s = 0; s < nshift; ++s) {
      const double dv = sum_comp[s] / done - mean_comp;
      var += dv * dv;
    }
    var /= (nshift - 1.0);
    result.value = std::clamp(mean_val, 0.0, 1.0);
    result.complement = std::clamp(mean_comp, 0.0, 1.0);
    result.error = 3.0 * std::sqrt(var / nshift);
    result.points = done * nshift;
    const double tol = std::max(opt.abs_tol, opt.rel_tol * std::min(result.value, result.complement));
    const bool enough = result.points >= opt.min_points;
    if ((enough && result.error <= tol) || per_shift >= cap_per_shift) break;
    per_shift = std::min(per_shift * 2, cap_per_shift);
  }
  return result;
}

/// n draws (rows) of N(0, L L').
inline Matrix mvn_sample(Rng& rng, const CholeskyFactor& factor, std::size_t n) {
  const auto d = factor.dim();
  Matrix z(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j) z(i, j) = rng.normal();
  return z * factor.lower.transpose();
}

inline Matrix mvn_sample(Rng& rng, const Matrix& sigma, std::size_t n) { return mvn_sample(rng, cholesky(sigma), n); }

/// Conditional Monte Carlo for the union probability P(W not<= b) of a
/// correlation-matrix Gaussian:
///   P(W not<= b) = P_sum E_J[ E[1 / S | W_J > b_J] ],  P_sum = sum_j P(W_j > b_j),
/// J drawn with probability P(W_j > b_j) / P_sum, S = #{k : W_k > b_k}.
/// Draws are fixed at construction (one Gaussian vector and two uniforms
/// each), so calls with different bounds see common random numbers. Since
/// 1/S lies in [1/D, 1] the relative error stays bounded however rare the
/// union is.
class GaussUnionSampler {
 public:
  GaussUnionSampler(const Matrix& corr, std::size_t draws, std::uint64_t seed) : corr_(corr) {
    const auto d = corr.rows();
    if (d < 1 || corr.cols() != d) throw domain_error("GaussUnionSampler: matrix must be square and nonempty");
    if (draws < 2) throw domain_error("GaussUnionSampler: need at least two draws");
    for (Eigen::Index j = 0; j < d; ++j)
      if (std::fabs(corr(j, j) - 1.0) > 1e-12) throw domain_error("GaussUnionSampler: needs a correlation matrix");
    Rng rng(seed);
    w_ = mvn_sample(rng, corr, draws).transpose();
    Rng ru = rng.substream(1);
    pick_.resize(draws);
    tail_.resize(draws);
    for (std::size_t i = 0; i < draws; ++i) {
      pick_[i] = ru.uniform();
      tail_[i] = ru.uniform();
    }
  }

  Eigen::Index dim() const { return corr_.rows(); }
  std::size_t draws() const { return pick_.size(); }

  MvnResult operator()(const Vector& b) const {
    const auto d = dim();
    if (b.size() != d) throw domain_error("GaussUnionSampler: bound vector has wrong length");
    std::vector<double> cum(d), pj(d);
    double total = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      pj[j] = normal_sf(b[j]);
      total += pj[j];
      cum[j] = total;
    }
    MvnResult res;
    res.points = draws();
    if (!(total > 0.0)) {
      res.value = 1.0;
      res.complement = 0.0;
      return res;
    }
    const std::size_t n = draws();
    std::vector<double> inv(n);
    parallel_for(n, [&](std::size_t i) {
      const double target = pick_[i] * total;
      auto j = static_cast<Eigen::Index>(std::upper_bound(cum.begin(), cum.end(), target) - cum.begin());
      j = std::min(j, d - 1);
      while (pj[j] == 0.0 && j > 0) --j;
      const double x = -normal_quantile(std::max(tail_[i] * pj[j], std::numeric_limits<double>::min()));
      const auto wi = w_.col(static_cast<Eigen::Index>(i));
      const double delta = x - wi[j];
      const auto cj = corr_.col(j);
      int count = 0;
      for (Eigen::Index k = 0; k < d; ++k) count += wi[k] + cj[k] * delta > b[k];
      inv[i] = 1.0 / std::max(count, 1);
    });
    double s1 = 0.0, s2 = 0.0;
    for (double r : inv) {
      s1 += r;
      s2 += r * r;
    }
    const double mean = s1 / n;
    const double var = std::max(0.0, s2 / n - mean * mean) / (n - 1.0);
    res.complement = std::clamp(total * mean, 0.0, 1.0);
    res.value = 1.0 - res.complement;
    res.error = 3.0 * total * std::sqrt(var);
    return res;
  }

 private:
  Matrix corr_;
  Matrix w_;  ///< d x n unconditioned draws
  std::vector<double> pick_, tail_;
};

/// Moments of W2 | W1 = x1 for W ~ N(0, sigma).
struct GaussConditional {
  std::vector<int> cond_idx;
  std::vector<int> free_idx;
  Matrix weights;  ///< Sigma21 Sigma11^{-1}
  Vector mean;     ///< weights * x1
  Matrix cov;      ///< Sigma22 - Sigma21 Sigma11^{-1} Sigma12
};

inline GaussConditional gauss_conditional(const Matrix& sigma, const std::vector<int>& cond_idx, const Vector& x1) {
  const int n = static_cast<int>(sigma.rows());
  if (cond_idx.empty() || static_cast<int>(cond_idx.size()) >= n)
    throw domain_error("gauss_conditional: conditioning set must be a nonempty strict subset");
  if (x1.size() != static_cast<Eigen::Index>(cond_idx.size()))
    throw domain_error("gauss_conditional: observed vector has wrong length");
  GaussConditional out;
  out.cond_idx = cond_idx;
  out.free_idx = complement_indices(n, cond_idx);
  const Matrix s11 = submatrix(sigma, cond_idx, cond_idx);
  const Matrix s21 = submatrix(sigma, out.free_idx, cond_idx);
  const Matrix s22 = submatrix(sigma, out.free_idx, out.free_idx);
  Eigen::LLT<Matrix> llt(s11);
  if (llt.info() != Eigen::Success) throw numeric_error("gauss_conditional: conditioning block is singular");
  out.weights = llt.solve(s21.transpose()).transpose();
  out.mean = out.weights * x1;
  out.cov = s22 - out.weights * s21.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

}  // namespace lapfield
