#include <gtest/gtest.h>

#include <cmath>

#include "lapfield/tail.hpp"
#include "test_util.hpp"

using namespace lapfield;

namespace {

Matrix corr2(double r) {
  Matrix m(2, 2);
  m << 1, r, r, 1;
  return m;
}

Matrix random_corr(Rng& rng, int d) {
  Matrix a(d, d + 2);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d + 2; ++j) a(i, j) = rng.normal();
  Matrix s = a * a.transpose();
  const Vector inv = s.diagonal().cwiseSqrt().cwiseInverse();
  return inv.asDiagonal() * s * inv.asDiagonal();
}

std::vector<double> column(const Matrix& m, int j) {
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

}  // namespace

TEST(ResidualCoef, Bivariate) {
  EXPECT_NEAR(residual_coef_biv(0.0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(residual_coef_biv(1.0), 1.0);
  EXPECT_DOUBLE_EQ(residual_coef_biv_gauss(0.0), 0.5);
  EXPECT_NEAR(residual_coef_biv(0.3), std::sqrt(residual_coef_biv_gauss(0.3)), 1e-15);
  EXPECT_THROW(residual_coef_biv(-1.0), domain_error);
  EXPECT_THROW(residual_coef_biv(1.2), domain_error);
}

TEST(ResidualCoef, Multivariate) {
  for (int d : {1, 2, 5, 30}) EXPECT_NEAR(residual_coef_mv(Matrix::Identity(d, d)), 1.0 / std::sqrt(d), 1e-14);
  for (double r : {-0.5, 0.0, 0.4, 0.9}) EXPECT_NEAR(residual_coef_mv(corr2(r)), residual_coef_biv(r), 1e-14);
  EXPECT_NEAR(residual_coef_mv(corr2(0.9)), std::sqrt(0.95), 1e-14);
  EXPECT_THROW(residual_coef_mv(Matrix::Ones(3, 3)), numeric_error);

  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) EXPECT_LE(residual_coef_mv(random_corr(rng, 4)), 1.0 + 1e-12);
  // Only complete dependence reaches 1 in the 2x2 case.
  EXPECT_LT(residual_coef_mv(corr2(0.999999)), 1.0);
}

TEST(SumDependence, Values) {
  EXPECT_NEAR(sum_dependence_coef(corr2(1.0)), 2.0, 1e-15);
  EXPECT_NEAR(sum_dependence_coef(corr2(0.0)), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(sum_dependence_coef(corr2(-1.0)), 0.0, 1e-15);
  EXPECT_NEAR(sum_dependence_coef(Matrix::Ones(7, 7)), 7.0, 1e-14);
  for (double r : {-0.3, 0.2, 0.8}) EXPECT_NEAR(sum_dependence_coef(corr2(r)), std::sqrt(2 * (1 + r)), 1e-15);
}

TEST(Extrapolation, Univariate) {
  const Matrix one = Matrix::Identity(1, 1);
  for (auto k : {ExceedanceKind::marginal, ExceedanceKind::sum, ExceedanceKind::max, ExceedanceKind::min}) {
    const auto f = extrapolation_factor(one, {k, 1.0}, 0.7);
    EXPECT_NEAR(f.factor, std::exp(-0.7), 1e-15) << to_string(k);
  }
}

TEST(Extrapolation, BivariateIdentity) {
  const Matrix id = Matrix::Identity(2, 2);
  const auto s = extrapolation_factor(id, {ExceedanceKind::sum, 1.0}, 1.0);
  EXPECT_NEAR(s.factor, std::exp(-std::sqrt(2.0)), 1e-15);
  EXPECT_TRUE(s.exact);
  const auto m = extrapolation_factor(id, {ExceedanceKind::min, 1.0}, 1.0);
  EXPECT_NEAR(m.factor, std::exp(-std::sqrt(2.0)), 1e-15);
  EXPECT_FALSE(m.exact);
  // Correlation matrix: max and marginal rates coincide.
  EXPECT_DOUBLE_EQ(extrapolation_factor(corr2(0.5), {ExceedanceKind::max, 1.0}, 2.0).factor,
                   extrapolation_factor(corr2(0.5), {ExceedanceKind::marginal, 1.0}, 2.0).factor);
  EXPECT_THROW(extrapolation_factor(2.0 * id, {ExceedanceKind::min, 1.0}, 1.0), domain_error);
  EXPECT_THROW(extrapolation_factor(id, {ExceedanceKind::sum, 1.0}, -1.0), domain_error);
}

TEST(Extrapolation, SumIdentityExact) {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 2 + rep % 5;
    Matrix sigma = random_corr(rng, d);
    sigma *= 0.5 + rng.uniform();
    const double u = 0.1 + 5 * rng.uniform(), t = 3 * rng.uniform();
    const double f = extrapolation_factor(sigma, {ExceedanceKind::sum, u}, t).factor;
    const double lhs = sum_exceedance_prob(sigma, u + d * t);
    EXPECT_NEAR(lhs, f * sum_exceedance_prob(sigma, u), 1e-12 * lhs);
  }
}

TEST(Extrapolation, MinKindExactRatioApproachesLimit) {
  // pr(min > u) = pr(X <= -u e) from the orthant integral.
  const Matrix id = Matrix::Identity(2, 2);
  const double limit = std::exp(-std::sqrt(2.0));
  auto ratio = [&](double u) {
    const double a = laplace_orthant(id, Vector::Constant(2, -(u + 1)), false).value;
    const double b = laplace_orthant(id, Vector::Constant(2, -u), false).value;
    return a / b;
  };
  const double r3 = ratio(3.0), r8 = ratio(8.0), r20 = ratio(20.0);
  EXPECT_LT(std::fabs(r8 - limit), std::fabs(r3 - limit));
  EXPECT_LT(std::fabs(r20 - limit), std::fabs(r8 - limit));
  EXPECT_NEAR(r20, limit, 0.01);
}

TEST(Extrapolation, MinKindMonteCarlo) {
  // Simulated ratio against the exact finite-level ratio.
  const auto model = LaplaceFieldModel::from_matrix(Matrix::Identity(2, 2));
  Rng rng(21);
  const double u = 3.0;
  const Matrix x = simulate(model, rng, 2'000'000);
  double hit_u = 0, hit_u1 = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).minCoeff();
    hit_u += m > u;
    hit_u1 += m > u + 1;
  }
  const double r = hit_u1 / hit_u;
  const double se = std::sqrt(r * (1 - r) / hit_u);
  const Matrix id = Matrix::Identity(2, 2);
  const double exact = laplace_orthant(id, Vector::Constant(2, -(u + 1)), false).value /
                       laplace_orthant(id, Vector::Constant(2, -u), false).value;
  EXPECT_NEAR(r, exact, 3 * se);
}

TEST(SumExceedance, ClosedFormAndSimulation) {
  EXPECT_NEAR(sum_exceedance_prob(Matrix::Identity(1, 1), 1.0), 0.5 * std::exp(-1.0), 1e-16);
  EXPECT_NEAR(sum_exceedance_prob(Matrix::Identity(2, 2), 2.0), 0.5 * std::exp(-2.0 / std::sqrt(2.0)), 1e-16);
  EXPECT_THROW(sum_exceedance_prob(Matrix::Identity(2, 2), 0.0), domain_error);

  const Matrix c = corr2(0.4);
  const auto model = LaplaceFieldModel::from_matrix(c);
  Rng rng(5);
  const Matrix x = simulate(model, rng, 1'000'000);
  double hits = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) hits += x.row(i).sum() > 3.0;
  const double p = sum_exceedance_prob(c, 3.0);
  EXPECT_NEAR(hits / x.rows(), p, 3 * std::sqrt(p * (1 - p) / x.rows()));
}

TEST(JointTailLimit, Values) {
  EXPECT_DOUBLE_EQ(joint_tail_limit_biv(0.3, 1.0, 1.0), 1.0);
  EXPECT_NEAR(joint_tail_limit_biv(0.0, 0.5, 0.5), std::pow(0.25, 1.0 / std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(joint_tail_limit_biv(0.0, 0.5, 0.5), 0.3753, 1e-4);
  EXPECT_THROW(joint_tail_limit_biv(0.0, 0.0, 0.5), domain_error);
}

TEST(JointTailLimit, ExactRatioConverges) {
  // pr(F(X1) > 1 - x/v, F(X2) > 1 - y/v) / pr(both > 1 - 1/v) -> (xy)^{1/(2 rho)}.
  const Matrix c = corr2(0.0);
  auto joint = [&](double s1, double s2) {
    Vector b(2);
    b << -StdLaplace::quantile_survival(s1), -StdLaplace::quantile_survival(s2);
    return laplace_orthant(c, b, false).value;
  };
  const double limit = joint_tail_limit_biv(0.0, 0.5, 0.5);
  double prev_gap = 1.0;
  for (double v : {1e2, 1e4, 1e8}) {
    const double gap = std::fabs(joint(0.5 / v, 0.5 / v) / joint(1.0 / v, 1.0 / v) - limit);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_LT(prev_gap, 0.03);
}

TEST(ModelLambda, LimitsAndOrdering) {
  EXPECT_DOUBLE_EQ(model_lambda_u(corr2(1.0), 0.9, DepType::laplace), 1.0);
  EXPECT_DOUBLE_EQ(model_lambda_u(corr2(1.0), 0.9, DepType::gaussian), 1.0);
  const double lap = model_lambda_u(corr2(0.6), 0.99, DepType::laplace);
  const double gau = model_lambda_u(corr2(0.6), 0.99, DepType::gaussian);
  EXPECT_GT(lap, gau);
  // Independent Gaussian: lambda_u = 1 - u.
  EXPECT_NEAR(model_lambda_u(corr2(0.0), 0.9, DepType::gaussian), 0.1, 1e-10);
  EXPECT_THROW(model_lambda_u(corr2(0.5), 1.0, DepType::laplace), domain_error);
  EXPECT_THROW(model_lambda_u(Matrix::Identity(3, 3), 0.5, DepType::laplace), domain_error);
}

TEST(ModelLambda, AgreesWithSimulation) {
  const Matrix c = corr2(0.6);
  const double u = 0.95;
  const auto model = LaplaceFieldModel::from_matrix(c);
  Rng rng(8);
  const std::size_t n = 10'000'000;
  const Matrix x = simulate(model, rng, n);
  const double q = StdLaplace::quantile(u);
  double both = 0, first = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (x(i, 0) > q) {
      ++first;
      both += x(i, 1) > q;
    }
  }
  const double est = both / first;
  const double se = std::sqrt(est * (1 - est) / first);
  EXPECT_NEAR(model_lambda_u(c, u, DepType::laplace), est, 3 * se);
}

TEST(EmpiricalLambda, ComonotoneAndIndependent) {
  Rng rng(1);
  std::vector<double> a(1000), b(1000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = std::exp(a[i]);
  }
  EXPECT_DOUBLE_EQ(empirical_lambda(a, b, 0.95).value, 1.0);

  const std::size_t n = 100000;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = rng.uniform();
  }
  const auto est = empirical_lambda(x, y, 0.95);
  EXPECT_FALSE(est.flagged);
  const double se = std::sqrt(0.05 * 0.95 / (n * 0.05));
  EXPECT_NEAR(est.value, 0.05, 3 * se);
}

TEST(EmpiricalLambda, DecreasesWithLevelForLaplace) {
  const auto model = LaplaceFieldModel::from_matrix(corr2(0.8));
  Rng rng(2);
  const Matrix x = simulate(model, rng, 200000);
  const auto c0 = column(x, 0), c1 = column(x, 1);
  double prev = 1.0;
  for (double u : {0.9, 0.95, 0.98, 0.99}) {
    const double v = empirical_lambda(c0, c1, u).value;
    EXPECT_LT(v, prev) << u;
    prev = v;
  }
}

TEST(EmpiricalLambda, RankInvarianceAndFlags) {
  Rng rng(4);
  std::vector<double> x(500), y(500), tx(500), ty(500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = 0.5 * x[i] + rng.normal();
    tx[i] = std::exp(3 * x[i]);
    ty[i] = std::atan(y[i]);
  }
  EXPECT_DOUBLE_EQ(empirical_lambda(x, y, 0.9).value, empirical_lambda(tx, ty, 0.9).value);
  EXPECT_DOUBLE_EQ(hill_rho(x, y, 40), hill_rho(tx, ty, 40));
  EXPECT_TRUE(empirical_lambda(x, y, 0.995).flagged);
  EXPECT_FALSE(empirical_lambda(x, y, 0.9).flagged);
  EXPECT_THROW(empirical_lambda(x, std::vector<double>(3), 0.9), domain_error);
}

TEST(Ranks, AverageTies) {
  const auto r = average_ranks({3.0, 1.0, 3.0, 2.0});
  EXPECT_DOUBLE_EQ(r[0], 3.5);
  EXPECT_DOUBLE_EQ(r[1], 1.0);
  EXPECT_DOUBLE_EQ(r[2], 3.5);
  EXPECT_DOUBLE_EQ(r[3], 2.0);
}

TEST(Hill, IndependentAndComonotone) {
  Rng rng(9);
  std::vector<double> x(10000), y(10000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.uniform();
    y[i] = rng.uniform();
  }
  EXPECT_NEAR(hill_rho(x, y), 0.5, 0.25);
  // Comonotone: T is the common X*, Hill on exact rank Pareto points.
  EXPECT_NEAR(hill_rho(x, x), 1.0, 0.1);
}

TEST(Hill, LaplaceUncorrelated) {
  const auto model = LaplaceFieldModel::from_matrix(corr2(0.0));
  Rng rng(10);
  const Matrix x = simulate(model, rng, 100000);
  EXPECT_NEAR(hill_rho(column(x, 0), column(x, 1), 200), std::sqrt(0.5), 0.15);
}

TEST(Hill, Errors) {
  std::vector<double> flat(100, 1.0), y(100);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i);
  EXPECT_THROW(hill_rho(flat, flat, 40), numeric_error);
  EXPECT_THROW(hill_rho(y, y, 5), domain_error);
  EXPECT_THROW(hill_rho(y, y, 100), domain_error);
}

TEST(QQSum, UnivariateReduces) {
  Matrix u(3, 1);
  u << 0.1, 0.5, 0.97;
  for (auto dep : {DepType::laplace, DepType::gaussian}) {
    const auto q = qq_sum_transform(u, Matrix::Identity(1, 1), dep);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(q[i], StdLaplace::quantile(u(i, 0)), 1e-9);
  }
}

TEST(QQSum, GaussianBranchMonotone) {
  const Matrix c = corr2(0.3);
  Matrix u(1, 2);
  double prev = -1e300;
  for (double p = 0.01; p < 1.0; p += 0.07) {
    u << p, 0.4;
    const double q = qq_sum_transform(u, c, DepType::gaussian)[0];
    EXPECT_GT(q, prev);
    prev = q;
  }
  u << 0.0, 0.5;
  EXPECT_THROW(qq_sum_transform(u, c, DepType::gaussian), domain_error);
}

TEST(QQSum, SimulatedModelOnDiagonal) {
  SiteSet s;
  for (int i = 0; i < 6; ++i) s.push_back("s" + std::to_string(i), {i * 0.7, (i % 2) * 1.1}, 0);
  for (auto dep : {DepType::laplace, DepType::gaussian}) {
    const auto model = LaplaceFieldModel::build(s, {CorrelationFamily::exponential, 1.5}, dep);
    Rng rng(12);
    const std::size_t n = 4000;
    Matrix x = simulate(model, rng, n);
    Matrix u(n, 6);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (int j = 0; j < 6; ++j) u(i, j) = dep == DepType::laplace ? StdLaplace::cdf(x(i, j)) : normal_cdf(x(i, j));
    const auto q = qq_sum_transform(u, model.sigma_star, dep);
    const double d = lapfield::testing::ks_one_sample(q, [](double v) { return StdLaplace::cdf(v); });
    EXPECT_LT(d, lapfield::testing::ks_crit_one(n, lapfield::testing::kKs5)) << to_string(dep);
    const auto pts = qq_points(q, 0.9);
    EXPECT_NEAR(static_cast<double>(pts.size()), 0.1 * n, 2.0);
    for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GE(pts[i].theoretical, pts[i - 1].theoretical);
  }
}
