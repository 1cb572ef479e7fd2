#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lapfield/error.hpp"
#include "lapfield/linalg.hpp"
#include "lapfield/special.hpp"

namespace lapfield {

using Point2 = std::array<double, 2>;

/// Sites with planar coordinates and a per-site covariate (distance to sea, km).
/// Coordinate units are whatever the input declares; fitted scales inherit them.
struct SiteSet {
  std::vector<std::string> ids;
  std::vector<Point2> coords;
  std::vector<double> covariate;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }

  void validate() const {
    if (coords.size() != ids.size() || covariate.size() != ids.size())
      throw schema_error("SiteSet: ids, coords and covariate lengths differ");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!seen.insert(ids[i]).second) throw schema_error("SiteSet: duplicate site id '" + ids[i] + "'");
      if (!std::isfinite(coords[i][0]) || !std::isfinite(coords[i][1]))
        throw schema_error("SiteSet: non-finite coordinates for site '" + ids[i] + "'");
      if (!(covariate[i] >= 0.0)) throw schema_error("SiteSet: negative covariate for site '" + ids[i] + "'");
    }
  }

  std::optional<int> index_of(const std::string& id) const {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) return std::nullopt;
    return static_cast<int>(it - ids.begin());
  }

  SiteSet subset(const std::vector<int>& idx) const {
    SiteSet out;
    for (int i : idx) {
      out.ids.push_back(ids.at(i));
      out.coords.push_back(coords.at(i));
      out.covariate.push_back(covariate.at(i));
    }
    return out;
  }

  void push_back(std::string id, Point2 xy, double cov) {
    ids.push_back(std::move(id));
    coords.push_back(xy);
    covariate.push_back(cov);
  }
};

enum class CorrelationFamily { exponential, stable, matern };

inline std::string to_string(CorrelationFamily f) {
  switch (f) {
    case CorrelationFamily::exponential: return "exponential";
    case CorrelationFamily::stable: return "stable";
    case CorrelationFamily::matern: return "matern";
  }
  return "?";
}

inline CorrelationFamily parse_family(const std::string& s) {
  if (s == "exponential" || s == "exp") return CorrelationFamily::exponential;
  if (s == "stable" || s == "powexp") return CorrelationFamily::stable;
  if (s == "matern") return CorrelationFamily::matern;
  throw schema_error("unknown correlation family '" + s + "'");
}

/// Parametric stationary correlation with optional geometric anisotropy.
///   exponential: exp(-h/scale)
///   stable:      exp(-(h/scale)^shape), shape in (0,2]
///   matern:      2^{1-nu}/Gamma(nu) (h/scale)^nu K_nu(h/scale), nu = shape
/// Anisotropy replaces a lag ds by M ds with M = diag(b,1) R(theta).
struct CorrelationSpec {
  CorrelationFamily family = CorrelationFamily::exponential;
  double scale = 1.0;
  double shape = 1.0;
  double theta = 0.0;
  double b = 1.0;
  bool anisotropic = false;

  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw domain_error("CorrelationSpec: scale must be positive");
    if (family == CorrelationFamily::stable && !(shape > 0.0 && shape <= 2.0))
      throw domain_error("CorrelationSpec: stable exponent must lie in (0,2]");
    if (family == CorrelationFamily::matern && !(shape > 0.0))
      throw domain_error("CorrelationSpec: Matern smoothness must be positive");
    if (anisotropic && !(b >= 1.0)) throw domain_error("CorrelationSpec: stretch b must be >= 1");
  }
};

/// Smoothness grid profiled when fitting Matern models.
inline const std::vector<double>& default_matern_nu_grid() {
  static const std::vector<double> grid = {0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 1.0, 1.5, 2.5, 5.0};
  return grid;
}

inline double aniso_distance(const CorrelationSpec& spec, const Point2& ds) {
  if (!spec.anisotropic) return std::hypot(ds[0], ds[1]);
  const double c = std::cos(spec.theta), s = std::sin(spec.theta);
  const double rx = c * ds[0] - s * ds[1];
  const double ry = s * ds[0] + c * ds[1];
  return std::hypot(spec.b * rx, ry);
}

inline double correlation(const CorrelationSpec& spec, double h) {
  if (h < 0.0) throw domain_error("correlation: negative distance");
  if (h == 0.0) return 1.0;
  const double z = h / spec.scale;
  switch (spec.family) {
    case CorrelationFamily::exponential: return std::exp(-z);
    case CorrelationFamily::stable: return std::exp(-std::pow(z, spec.shape));
    case CorrelationFamily::matern: {
      const double nu = spec.shape;
      const double log_c = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(z) + log_bessel_k(nu, z);
      return std::min(1.0, std::exp(log_c));
    }
  }
  return 0.0;
}

/// Correlation matrix Sigma*(s). Symmetric with unit diagonal; the jitter
/// policy is applied when the matrix is factorized.
inline Matrix build_corr_matrix(const SiteSet& sites, const CorrelationSpec& spec) {
  if (sites.empty()) throw domain_error("build_corr_matrix: no sites");
  spec.validate();
  const auto n = static_cast<Eigen::Index>(sites.size());
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const Point2 ds{sites.coords[i][0] - sites.coords[j][0], sites.coords[i][1] - sites.coords[j][1]};
      const double h = aniso_distance(spec, ds);
      if (!std::isfinite(h)) throw numeric_error("build_corr_matrix: non-finite distance");
      out(i, j) = out(j, i) = correlation(spec, h);
    }
  }
  return out;
}

/// Median of all pairwise Euclidean distances (0 for a single site).
inline double median_intersite_distance(const SiteSet& sites) {
  std::vector<double> d;
  for (std::size_t i = 0; i < sites.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      d.push_back(std::hypot(sites.coords[i][0] - sites.coords[j][0], sites.coords[i][1] - sites.coords[j][1]));
  if (d.empty()) return 0.0;
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return d[d.size() / 2];
}

}  // namespace lapfield
