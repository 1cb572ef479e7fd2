#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lapfield/covariance.hpp"
#include "lapfield/random.hpp"

using namespace lapfield;

namespace {

SiteSet line_sites(int n, double spacing) {
  SiteSet s;
  for (int i = 0; i < n; ++i) s.push_back("s" + std::to_string(i), {i * spacing, 0.0}, 0.0);
  return s;
}

}  // namespace

TEST(Anisotropy, DistanceExamples) {
  CorrelationSpec spec;
  EXPECT_DOUBLE_EQ(aniso_distance(spec, {3, 4}), 5.0);
  spec.anisotropic = true;
  spec.b = 2.0;
  EXPECT_DOUBLE_EQ(aniso_distance(spec, {1, 0}), 2.0);
  spec.theta = std::numbers::pi / 2;
  // M = diag(2,1) R(pi/2) = [[0,-2],[1,0]] so M(1,0)' = (0,1).
  EXPECT_NEAR(aniso_distance(spec, {1, 0}), 1.0, 1e-15);
  EXPECT_NEAR(aniso_distance(spec, {0, 1}), 2.0, 1e-15);
}

TEST(Anisotropy, UnitStretchIgnoresAngle) {
  CorrelationSpec spec;
  spec.anisotropic = true;
  spec.b = 1.0;
  for (double th : {0.0, 0.4, 1.3, 3.0}) {
    spec.theta = th;
    EXPECT_NEAR(aniso_distance(spec, {1.5, -2.0}), 2.5, 1e-14);
  }
}

TEST(Correlation, UnitAtZeroLag) {
  for (auto f : {CorrelationFamily::exponential, CorrelationFamily::stable, CorrelationFamily::matern}) {
    CorrelationSpec spec{f, 3.0, 0.7};
    EXPECT_DOUBLE_EQ(correlation(spec, 0.0), 1.0);
  }
}

TEST(Correlation, MaternHalfIsExponential) {
  CorrelationSpec m{CorrelationFamily::matern, 2.0, 0.5};
  for (double h : {0.01, 0.5, 3.0, 20.0}) EXPECT_NEAR(correlation(m, h), std::exp(-h / 2.0), 1e-10);
}

TEST(Correlation, MaternEffectiveRange) {
  for (double nu : {0.25, 1.0, 2.5}) {
    CorrelationSpec m{CorrelationFamily::matern, 10.0, nu};
    EXPECT_NEAR(correlation(m, std::sqrt(8 * nu) * 10.0), 0.1, 0.04) << nu;
  }
}

TEST(Correlation, NonIncreasingInDistance) {
  for (auto f : {CorrelationFamily::exponential, CorrelationFamily::stable, CorrelationFamily::matern}) {
    for (double shape : {0.1, 0.5, 1.0, 2.0, 5.0}) {
      if (f == CorrelationFamily::stable && shape > 2.0) continue;
      CorrelationSpec spec{f, 1.7, shape};
      double prev = 1.0;
      for (double h = 0.001; h < 60.0; h *= 1.2) {
        const double c = correlation(spec, h);
        EXPECT_LE(c, prev + 1e-15);
        EXPECT_GE(c, 0.0);
        prev = c;
      }
    }
  }
}

TEST(Correlation, ValidateRejectsBadParameters) {
  EXPECT_THROW((CorrelationSpec{CorrelationFamily::stable, 1.0, 2.5}.validate()), domain_error);
  EXPECT_THROW((CorrelationSpec{CorrelationFamily::exponential, 0.0}.validate()), domain_error);
  EXPECT_THROW(parse_family("cauchy"), schema_error);
}

TEST(CorrMatrix, SingleSiteAndCollinear) {
  const CorrelationSpec spec{CorrelationFamily::exponential, 4.0};
  EXPECT_EQ(build_corr_matrix(line_sites(1, 1.0), spec), Matrix::Identity(1, 1));
  const Matrix s = build_corr_matrix(line_sites(3, 1.5), spec);
  EXPECT_NEAR(s(0, 2), s(0, 1) * s(0, 1), 1e-15);
  EXPECT_TRUE(s.isApprox(s.transpose()));
  EXPECT_DOUBLE_EQ(s(1, 1), 1.0);
}

TEST(CorrMatrix, CoincidentSitesNeedJitter) {
  SiteSet s;
  s.push_back("a", {0, 0}, 0);
  s.push_back("b", {0, 0}, 0);
  const Matrix m = build_corr_matrix(s, {CorrelationFamily::exponential, 1.0});
  EXPECT_DOUBLE_EQ(m(0, 1), 1.0);
  const auto f = cholesky(m);
  EXPECT_GT(f.jitter, 0.0);
  EXPECT_LE(f.jitter, 1e-6);
  EXPECT_THROW(cholesky(m, JitterPolicy{1e-10, 10.0, 1e-14}), numeric_error);
}

TEST(CorrMatrix, PermutationInvariance) {
  SiteSet s;
  Rng rng(3);
  for (int i = 0; i < 6; ++i) s.push_back("p" + std::to_string(i), {rng.uniform() * 10, rng.uniform() * 10}, 1.0);
  const CorrelationSpec spec{CorrelationFamily::stable, 3.0, 1.3, 0.6, 1.8, true};
  const Matrix a = build_corr_matrix(s, spec);
  const std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  const Matrix b = build_corr_matrix(s.subset(perm), spec);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(b(i, j), a(perm[i], perm[j]));
}

TEST(SiteSet, ValidationErrors) {
  SiteSet s;
  s.push_back("a", {0, 0}, 1);
  s.push_back("a", {1, 0}, 1);
  EXPECT_THROW(s.validate(), schema_error);
  SiteSet t;
  t.push_back("a", {0, 0}, -1);
  EXPECT_THROW(t.validate(), schema_error);
  SiteSet u;
  u.push_back("a", {0, NAN}, 1);
  EXPECT_THROW(u.validate(), schema_error);
}

TEST(Cholesky, ClosedFormsAndReconstruction) {
  EXPECT_TRUE(cholesky(Matrix::Identity(4, 4)).lower.isApprox(Matrix::Identity(4, 4)));
  Matrix r(2, 2);
  r << 1, 0.6, 0.6, 1;
  EXPECT_NEAR(cholesky(r).lower(1, 1), 0.8, 1e-15);
  Rng rng(8);
  Matrix a(7, 7);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) a(i, j) = rng.normal();
  const Matrix spd = a.transpose() * a;
  const auto f = cholesky(spd);
  EXPECT_EQ(f.jitter, 0.0);
  EXPECT_LT((f.reconstruct() - spd).norm() / spd.norm(), 1e-10);
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_THROW(cholesky(bad), numeric_error);
}

TEST(MedianDistance, SimpleLine) {
  EXPECT_DOUBLE_EQ(median_intersite_distance(line_sites(3, 2.0)), 2.0);
}
