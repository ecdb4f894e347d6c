#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "edpt/errors.hpp"
#include "edpt/linalg.hpp"
#include "edpt/models.hpp"
#include "edpt/numerics.hpp"
#include "edpt/perm.hpp"
#include "edpt/rng.hpp"
#include "edpt/simlab.hpp"
#include "oracles.hpp"

using namespace edpt;

namespace {

LogisticModelSpec no_covariate_model() {
  LogisticModelSpec model;
  model.interaction_columns = {};
  model.ed_bias_columns = {};
  return model;
}

}  // namespace

TEST_CASE("laplace evidence on a two-parameter toy vs 2-D quadrature") {
  // Eight observations, intercept + treatment, tight prior so the Laplace
  // error is far below the tolerance.
  std::vector<double> y{1, 0, 1, 1, 0, 1, 0, 0};
  std::vector<int> a{1, 1, 1, 1, 0, 0, 0, 0};
  TrialDataset data = TrialDataset::create(y, {}, a, 0);
  const double sigma2 = 0.04;

  LaplaceFit fit = fit_logistic_laplace(data, data.assignments,
                                        ExternalDataset::empty(0),
                                        no_covariate_model(), sigma2);
  CHECK(fit.report.converged);

  auto integrand = [&](double t0, double ta) {
    double ll = 0;
    for (int i = 0; i < data.n; ++i) {
      double eta = t0 + ta * a[i];
      ll += y[i] * eta - std::log1p(std::exp(eta));
    }
    double lp = -0.5 * (t0 * t0 + ta * ta) / sigma2 -
                std::log(2 * M_PI * sigma2);
    return std::exp(ll + lp);
  };
  double w = 8 * std::sqrt(sigma2);
  double evidence = oracles::gauss_legendre_2d(integrand, -w, w, -w, w, 96);
  CHECK(std::abs(fit.log_statistic - std::log(evidence)) < 1e-3);
}

TEST_CASE("arm-swap symmetric data has a zero treatment coefficient") {
  std::vector<double> y{1, 0, 1, 0};
  std::vector<int> a{1, 1, 0, 0};
  TrialDataset data = TrialDataset::create(y, {}, a, 0);
  LaplaceFit fit = fit_logistic_laplace(data, data.assignments,
                                        ExternalDataset::empty(0),
                                        no_covariate_model(), 100.0);
  CHECK(fit.report.converged);
  CHECK(std::abs(fit.map_estimate[1]) < 1e-7);
}

TEST_CASE("perfect separation still yields a finite converged MAP") {
  std::vector<double> y{1, 1, 0, 0};
  std::vector<int> a{1, 1, 0, 0};
  TrialDataset data = TrialDataset::create(y, {}, a, 0);
  LaplaceFit fit = fit_logistic_laplace(data, data.assignments,
                                        ExternalDataset::empty(0),
                                        no_covariate_model(), 100.0);
  CHECK(fit.report.converged);
  CHECK(std::isfinite(fit.log_statistic));
  CHECK(std::abs(fit.map_estimate[1]) < 50.0);
}

TEST_CASE("laplace machinery is exact for a gaussian log density") {
  // Gaussian likelihood with unit noise in place of the logistic one: the
  // Laplace evidence must equal the closed-form marginal likelihood.
  std::vector<double> y{0.4, 1.3, -0.2, 0.9, 0.1};
  std::vector<double> x{1.0, -0.5, 0.3, 0.8, -1.2};
  const double sigma2 = 3.0;
  const int p = 2;

  LogDensity objective = [&](std::span<const double> theta,
                             std::vector<double>* grad,
                             SymmetricMatrix* hess) {
    double value = -0.5 * p * std::log(2 * M_PI * sigma2);
    double ss = 0;
    for (double t : theta) ss += t * t;
    value -= 0.5 * ss / sigma2;
    if (grad) {
      (*grad)[0] = -theta[0] / sigma2;
      (*grad)[1] = -theta[1] / sigma2;
    }
    if (hess) {
      std::fill(hess->packed().begin(), hess->packed().end(), 0.0);
      hess->at(0, 0) = -1.0 / sigma2;
      hess->at(1, 1) = -1.0 / sigma2;
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
      double mean = theta[0] + theta[1] * x[i];
      double r = y[i] - mean;
      value += -0.5 * std::log(2 * M_PI) - 0.5 * r * r;
      if (grad) {
        (*grad)[0] += r;
        (*grad)[1] += r * x[i];
      }
      if (hess) {
        hess->at(0, 0) -= 1.0;
        hess->at(1, 0) -= x[i];
        hess->at(1, 1) -= x[i] * x[i];
      }
    }
    return value;
  };
  auto report = newton_map(objective, {0.0, 0.0});
  REQUIRE(report.converged);
  double laplace = laplace_log_evidence(
      report, objective(report.mode, nullptr, nullptr));

  // Closed form: precision P = X'X + I/sigma2, b = X'y.
  SymmetricMatrix precision = SymmetricMatrix::identity(p, 1.0 / sigma2);
  std::vector<double> b(p, 0.0);
  double yty = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::vector<double> row{1.0, x[i]};
    precision.add_outer(row);
    b[0] += y[i];
    b[1] += y[i] * x[i];
    yty += y[i] * y[i];
  }
  CholeskyFactor chol(precision);
  auto wvec = chol.forward_solve(b);
  double closed = 0.5 * dot(wvec, wvec) - 0.5 * chol.log_det() -
                  0.5 * y.size() * std::log(2 * M_PI) - 0.5 * yty -
                  0.5 * p * std::log(sigma2);
  CHECK(std::abs(laplace - closed) < 1e-8);
}

namespace {

TrialDataset gbm_like_trial(long n, RngStream& stream,
                            const ExternalDataset& source) {
  return resample_in_silico(source, n, 0.5, {0, 0, 0, 0}, stream);
}

}  // namespace

TEST_CASE("one-sided logistic statistics: degenerate and symmetric cases") {
  // Balanced two-arm data, no covariates: the effect posterior is centered
  // at zero, so the positive-region mass is about one half.
  std::vector<double> y{1, 0, 1, 0, 1, 0, 1, 0};
  std::vector<int> a{1, 1, 0, 0, 1, 1, 0, 0};
  TrialDataset data = TrialDataset::create(y, {}, a, 0);

  StatisticSpec spec;
  spec.family = Family::logistic_laplace;
  spec.kind = StatKind::m1;
  spec.prior_variance = 100.0;
  spec.mc_draws = 200000;
  spec.logistic = no_covariate_model();
  FittedStatistic stat = FittedStatistic::make(spec, ExternalDataset::empty(0));
  RngStream stream(21, 0);
  double value = stat.evaluate(data, data.assignments, &stream);
  CHECK(std::abs(value - 0.5) < 3 * std::sqrt(0.25 / 200000.0) + 1e-3);

  // Strongly negative effect with the positive direction: mass near zero.
  // Treated patients never respond, controls always do.
  std::vector<double> y2{0, 0, 1, 1, 0, 0, 1, 1};
  TrialDataset data2 = TrialDataset::create(y2, {}, a, 0);
  RngStream stream2(21, 1);
  double low = stat.evaluate(data2, data2.assignments, &stream2);
  CHECK(low < 0.05);
}

TEST_CASE("two-subgroup logistic one-sided statistics vs quadrature") {
  RngStream gen(888, 0);
  const int n = 40;
  std::vector<double> y(n), x(n);
  std::vector<int> a(n);
  for (int i = 0; i < n; ++i) {
    x[i] = i % 2 ? 1.0 : 0.0;
    a[i] = i < n / 2;
    double eta = -0.2 + 0.8 * a[i] + 0.3 * x[i] - 0.5 * a[i] * x[i];
    y[i] = gen.bernoulli(expit(eta)) ? 1.0 : 0.0;
  }
  TrialDataset data = TrialDataset::create(y, x, a, 1);

  StatisticSpec spec;
  spec.family = Family::logistic_laplace;
  spec.kind = StatKind::m1;
  spec.prior_variance = 4.0;
  spec.mc_draws = 2000000;
  spec.logistic.interaction_columns = {0};
  spec.logistic.ed_bias_columns = {};
  FittedStatistic stat = FittedStatistic::make(spec, ExternalDataset::empty(1));

  LogisticModelSpec model = spec.logistic;
  LaplaceFit fit = fit_logistic_laplace(data, data.assignments,
                                        ExternalDataset::empty(1), model, 4.0);
  // Effect coordinates: theta = (t0, tx, ta, tax); cells sorted by pattern
  // descending -> cell 1 has x = 1 (effect ta + tax), cell 2 has x = 0.
  CholeskyFactor chol(fit.neg_hessian);
  std::vector<double> t1{0, 0, 1, 1}, t2{0, 0, 1, 0};
  auto c1 = chol.solve(t1);
  auto c2 = chol.solve(t2);
  double m1e = dot(t1, fit.map_estimate), m2e = dot(t2, fit.map_estimate);
  double v11 = dot(t1, c1), v22 = dot(t2, c2), v12 = dot(t1, c2);
  double det = v11 * v22 - v12 * v12;
  auto density = [&](double e1, double e2) {
    double d1 = e1 - m1e, d2 = e2 - m2e;
    double q = (v22 * d1 * d1 - 2 * v12 * d1 * d2 + v11 * d2 * d2) / det;
    return std::exp(-0.5 * q) / (2 * M_PI * std::sqrt(det));
  };
  double s1 = std::sqrt(v11), s2 = std::sqrt(v22);
  double oracle = 1 - oracles::gauss_legendre_2d(
                          [&](double e1, double e2) {
                            return (e1 <= 0 && e2 <= 0) ? density(e1, e2)
                                                        : 0.0;
                          },
                          m1e - 8 * s1, m1e + 8 * s1, m2e - 8 * s2,
                          m2e + 8 * s2, 96);

  RngStream stream(888, 1);
  double value = stat.evaluate(data, data.assignments, &stream);
  double se = std::sqrt(std::max(oracle * (1 - oracle), 1e-4) / 2000000.0);
  CHECK(std::abs(value - oracle) < 3 * se + 1e-4);
}

TEST_CASE("offset fit on a saturated categorical design matches the source "
          "rates") {
  // Source with only the MGMT/KPS block varying: the treatment-free MAP
  // logistic fit reproduces the subgroup response rates.
  ExternalDataset gbm = synthetic_gbm_source(GbmSourceKind::avaglio_like,
                                             1000000, 99);
  // Reduce to the categorical columns x4, x5, x6.
  const int d = 3;
  std::vector<double> x(static_cast<std::size_t>(gbm.n) * d);
  for (int i = 0; i < gbm.n; ++i) {
    x[i * 3 + 0] = gbm.covariate(i, 3);
    x[i * 3 + 1] = gbm.covariate(i, 4);
    x[i * 3 + 2] = gbm.covariate(i, 5);
  }
  ExternalDataset source = ExternalDataset::create(
      gbm.outcomes, std::move(x), std::vector<int>(gbm.n, 0), d);

  auto coef = fit_logistic_offset(source, 100.0);
  REQUIRE(coef.size() == 4);
  double fitted_mean = 0, observed_mean = 0;
  for (int i = 0; i < source.n; ++i) {
    double eta = coef[0];
    for (int j = 0; j < d; ++j) eta += coef[j + 1] * source.covariate(i, j);
    fitted_mean += expit(eta);
    observed_mean += source.outcomes[i];
  }
  fitted_mean /= source.n;
  observed_mean /= source.n;
  CHECK(std::abs(fitted_mean - observed_mean) < 1e-6);
}

TEST_CASE("infinite-external statistic agrees with the full-source statistic "
          "on most decisions") {
  ExternalDataset source = synthetic_gbm_source(GbmSourceKind::avaglio_like,
                                                337, 7);
  StatisticSpec spec;
  spec.family = Family::logistic_laplace;
  spec.kind = StatKind::m;
  spec.prior_variance = 100.0;

  FittedStatistic inf_stat = FittedStatistic::make_infinite_ed(spec, source);
  FittedStatistic full_stat = FittedStatistic::make(spec, source);

  const int trials = 200;
  const long J = 120;
  int agree = 0;
  for (int t = 0; t < trials; ++t) {
    RngStream gen(1000, t);
    TrialDataset data = gbm_like_trial(60, gen, source);
    SeedSpec seed{2000, static_cast<std::uint64_t>(t)};
    bool a = permutation_test(data, inf_stat, J, 0.05, seed).reject;
    bool b = permutation_test(data, full_stat, J, 0.05, seed).reject;
    if (a == b) ++agree;
  }
  CHECK(agree >= 190);
}

TEST_CASE("statistic evaluation propagates a non-converged fit") {
  // Degenerate: trial data whose MAP fit cannot move (empty reduced design
  // comes from a dataset with no treated rows, which the dataset type
  // already rejects).
  CHECK_THROWS_AS(
      TrialDataset::create({1.0, 0.0}, {}, {0, 0}, 0), DataError);
}
