#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lapfield/covariance.hpp"
#include "lapfield/distributions.hpp"
#include "lapfield/error.hpp"
#include "lapfield/exceedance.hpp"
#include "lapfield/laplace_field.hpp"
#include "lapfield/linalg.hpp"
#include "lapfield/mvn.hpp"

namespace lapfield {

/// Gaussian estimator used at each mixing node for grids of three or more
/// sites. Two-site grids always use the bivariate closed form.
enum class RiskEngine { automatic, lattice, union_mc };

struct RiskOptions {
  OrthantIntegralOptions orthant = default_orthant();
  RiskEngine engine = RiskEngine::automatic;
  double period_cap = 1e12;    ///< years; longer periods are reported as capped
  double level_tol = 0.01;     ///< m/s
  double days_per_year = 365.25;

  static OrthantIntegralOptions default_orthant() {
    OrthantIntegralOptions o;
    o.nodes = 64;
    o.adaptive = true;
    o.max_panels = 8;
    o.rel_tol = 1e-5;
    o.union_draws = 16384;
    return o;
  }
};

struct JointExceedance {
  double p = 0.0;
  double quad_error = 0.0;
  double mvn_error = 0.0;
  std::size_t grid_size = 0;
  std::string method;
};

struct ReturnPeriod {
  double years = 0.0;
  bool capped = false;  ///< true when the period exceeds the cap; years == cap
  JointExceedance prob;
};

struct ReturnLevel {
  double level = 0.0;
  double years = 0.0;  ///< return period at `level`
  int iterations = 0;
  JointExceedance prob;
};

/// Daily joint exceedance of a common level x0 anywhere on a grid, with
/// site margins from a covariate-driven Weibull tail and dependence from a
/// correlation spec evaluated on the grid sites.
class RiskEvaluator {
 public:
  RiskEvaluator(const CorrelationSpec& spec, DepType dep, const WeibullTail& margins, SiteSet grid,
                RiskOptions opt = {})
      : dep_(dep), margins_(margins), grid_(std::move(grid)), opt_(opt) {
    if (grid_.empty()) throw domain_error("risk: empty grid");
    grid_.validate();
    if (!(margins_.gamma > 0.0)) throw domain_error("risk: Weibull shape must be positive");
    if (!(opt_.period_cap > 1.0)) throw domain_error("risk: period cap must exceed one year");
    if (!(opt_.level_tol > 0.0)) throw domain_error("risk: level tolerance must be positive");
    corr_ = build_corr_matrix(grid_, spec);
    Eigen::LLT<Matrix> llt(corr_);
    if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 1e-10).all())
      throw singularity_error("risk: grid correlation matrix is not positive definite");
  }

  std::size_t grid_size() const { return grid_.size(); }
  const Matrix& correlation() const { return corr_; }
  const SiteSet& grid() const { return grid_; }
  const RiskOptions& options() const { return opt_; }

  /// Per-site standard-margin bound for level x0; +inf where the site
  /// survival underflows.
  Vector standard_bounds(double x0) const {
    Vector b(static_cast<Eigen::Index>(grid_.size()));
    for (std::size_t j = 0; j < grid_.size(); ++j) {
      const double s = margins_.survival(x0, grid_.covariate[j]);
      if (s <= 0.0)
        b[j] = std::numeric_limits<double>::infinity();
      else if (s >= 1.0)
        b[j] = -std::numeric_limits<double>::infinity();
      else
        b[j] = dep_ == DepType::laplace ? StdLaplace::quantile_survival(s) : StdNormal::quantile_survival(s);
    }
    return b;
  }

  /// pr(X(s_j) > x0 for some grid site j) on one day.
  JointExceedance joint_exceed_prob(double x0) const {
    if (!(x0 > 0.0)) throw domain_error("risk: level must be positive");
    JointExceedance out;
    out.grid_size = grid_.size();
    const Vector b = standard_bounds(x0);
    std::vector<int> keep;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      if (b[j] == -std::numeric_limits<double>::infinity()) {
        out.p = 1.0;
        out.method = "certain";
        return out;
      }
      if (std::isfinite(b[j])) keep.push_back(static_cast<int>(j));
    }
    if (keep.empty()) {
      out.method = "underflow";
      return out;
    }
    const int d = static_cast<int>(keep.size());
    if (grid_.size() == 1) {
      out.p = margins_.survival(x0, grid_.covariate[0]);
      out.method = "closed-form";
      return out;
    }
    Matrix c(d, d);
    Vector bk(d);
    for (int i = 0; i < d; ++i) {
      bk[i] = b[keep[i]];
      for (int j = 0; j < d; ++j) c(i, j) = corr_(keep[i], keep[j]);
    }
    const bool use_union = d >= 3 && opt_.engine != RiskEngine::lattice;
    if (dep_ == DepType::gaussian) {
      if (use_union) {
        const auto r = GaussUnionSampler(c, opt_.orthant.union_draws, opt_.orthant.union_seed)(bk);
        out.p = r.complement;
        out.mvn_error = r.error;
        out.method = "gauss-union-mc";
      } else {
        const auto r = mvn_cdf(c, bk, opt_.orthant.mvn);
        out.p = r.complement;
        out.mvn_error = r.error;
        out.method = d == 1 ? "closed-form" : "mvn";
      }
      return out;
    }
    if (d == 1) {
      out.p = StdLaplace::survival(bk[0]);
      out.method = "closed-form";
      return out;
    }
    OrthantIntegralOptions o = opt_.orthant;
    o.engine = use_union ? GaussianEngine::union_mc : GaussianEngine::lattice;
    const auto r = laplace_orthant(c, bk, true, o);
    out.p = r.complement;
    out.quad_error = r.quad_error;
    out.mvn_error = r.mvn_error;
    out.method = use_union ? "mixture-quadrature/union-mc" : "mixture-quadrature";
    return out;
  }

  ReturnPeriod return_period(double x0) const {
    ReturnPeriod rp;
    rp.prob = joint_exceed_prob(x0);
    const double years = 1.0 / (opt_.days_per_year * rp.prob.p);
    if (!(years < opt_.period_cap)) {
      rp.years = opt_.period_cap;
      rp.capped = true;
    } else {
      rp.years = years;
    }
    return rp;
  }

  /// Level whose grid return period is T years. The single-site levels
  /// bracket it: the most exposed site alone gives a lower bound and the
  /// union bound with D sites an upper one.
  ReturnLevel return_level(double T) const {
    if (!(T > 0.0) || !std::isfinite(T)) throw domain_error("risk: return period must be positive");
    const double target = 1.0 / (opt_.days_per_year * T);
    if (!(target < 1.0)) throw domain_error("risk: return period shorter than one day");
    ReturnLevel out;
    if (grid_.size() == 1) {
      out.level = margins_.quantile_survival(target, grid_.covariate[0]);
      out.prob = joint_exceed_prob(out.level);
      out.years = T;
      return out;
    }
    const double dsz = static_cast<double>(grid_.size());
    double lo = 0.0, hi = 0.0;
    for (double c : grid_.covariate) {
      lo = std::max(lo, margins_.quantile_survival(target, c));
      hi = std::max(hi, margins_.quantile_survival(target / dsz, c));
    }
    // g(x) = log p(x) - log target: decreasing, g(lo) >= 0 >= g(hi).
    auto g = [&](double x, JointExceedance* keep = nullptr) {
      const auto r = joint_exceed_prob(x);
      if (keep) *keep = r;
      return std::log(std::max(r.p, std::numeric_limits<double>::min())) - std::log(target);
    };
    double glo = g(lo), ghi = g(hi);
    // Estimator noise can put an endpoint on the wrong side of a bound
    // that is nearly tight; widen a little before giving up.
    for (int k = 0; k < 20 && glo < 0.0; ++k) {
      lo = std::max(0.5 * lo, lo - 1.0);
      glo = g(lo);
    }
    for (int k = 0; k < 20 && ghi > 0.0; ++k) {
      hi += 1.0;
      ghi = g(hi);
    }
    if (glo < 0.0 || ghi > 0.0) {
      const auto p_lo = joint_exceed_prob(lo).p, p_hi = joint_exceed_prob(hi).p;
      throw numeric_error("risk: return level not bracketed; periods " +
                          std::to_string(1.0 / (opt_.days_per_year * p_lo)) + " and " +
                          std::to_string(1.0 / (opt_.days_per_year * p_hi)) + " years at " + std::to_string(lo) +
                          " and " + std::to_string(hi) + " m/s");
    }
    // Illinois false position.
    int side = 0;
    int it = 0;
    while (hi - lo > opt_.level_tol && it < 200) {
      ++it;
      double x = (lo * ghi - hi * glo) / (ghi - glo);
      if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
      // Guarantee the bracket shrinks by at least the tolerance.
      x = std::clamp(x, lo + 0.25 * opt_.level_tol, hi - 0.25 * opt_.level_tol);
      const double gx = g(x);
      if (gx == 0.0) {
        lo = hi = x;
        break;
      }
      if (gx > 0.0) {
        lo = x;
        glo = gx;
        if (side == 1) ghi *= 0.5;
        side = 1;
      } else {
        hi = x;
        ghi = gx;
        if (side == -1) glo *= 0.5;
        side = -1;
      }
    }
    out.level = 0.5 * (lo + hi);
    out.iterations = it;
    g(out.level, &out.prob);
    out.years = 1.0 / (opt_.days_per_year * out.prob.p);
    return out;
  }

 private:
  DepType dep_;
  WeibullTail margins_;
  SiteSet grid_;
  RiskOptions opt_;
  Matrix corr_;
};

inline JointExceedance joint_exceed_prob(const CorrelationSpec& spec, DepType dep, const WeibullTail& margins,
                                         const SiteSet& grid, double x0, const RiskOptions& opt = {}) {
  return RiskEvaluator(spec, dep, margins, grid, opt).joint_exceed_prob(x0);
}

inline ReturnPeriod return_period(const CorrelationSpec& spec, DepType dep, const WeibullTail& margins,
                                  const SiteSet& grid, double x0, const RiskOptions& opt = {}) {
  return RiskEvaluator(spec, dep, margins, grid, opt).return_period(x0);
}

inline ReturnLevel return_level(const CorrelationSpec& spec, DepType dep, const WeibullTail& margins,
                                const SiteSet& grid, double T, const RiskOptions& opt = {}) {
  return RiskEvaluator(spec, dep, margins, grid, opt).return_level(T);
}

}  // namespace lapfield
