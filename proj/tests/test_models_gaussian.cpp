#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "edpt/errors.hpp"
#include "edpt/linalg.hpp"
#include "edpt/models.hpp"
#include "edpt/numerics.hpp"
#include "edpt/rng.hpp"
#include "oracles.hpp"

using namespace edpt;

namespace {

TrialDataset toy_trial() {
  // n = 4, d = 1
  std::vector<double> y{0.8, -0.3, 1.2, 0.1};
  std::vector<double> x{0.5, -1.0, 1.5, 0.2};
  std::vector<int> a{1, 0, 1, 0};
  return TrialDataset::create(y, x, a, 1);
}

ExternalDataset toy_external() {
  std::vector<double> y{0.4, -0.2, 0.9};
  std::vector<double> x{0.1, -0.7, 1.1};
  return ExternalDataset::create(y, x, {0, 0, 0}, 1);
}

}  // namespace

TEST_CASE("gaussian posterior with empty external data is the prior") {
  GaussianPosterior post = fit_gaussian_posterior(ExternalDataset::empty(1),
                                                  10.0);
  REQUIRE(post.mean.size() == 4);
  for (double m : post.mean) CHECK(m == 0.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j <= i; ++j) {
      CHECK(post.covariance.at(i, j) ==
            doctest::Approx(i == j ? 10.0 : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("gaussian posterior hand solve, d=0") {
  ExternalDataset ext = ExternalDataset::create({1.0, 1.0}, {}, {0, 0}, 0);
  GaussianPosterior post = fit_gaussian_posterior(ext, 1.0);
  CHECK(post.mean[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(post.covariance.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(post.mean[1] == 0.0);
  CHECK(post.covariance.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("treatment block of the posterior ignores external data") {
  GaussianPosterior post = fit_gaussian_posterior(toy_external(), 7.5);
  // coordinates 2, 3 are the treatment block for d = 1
  CHECK(post.covariance.at(2, 2) == doctest::Approx(7.5).epsilon(1e-12));
  CHECK(post.covariance.at(3, 3) == doctest::Approx(7.5).epsilon(1e-12));
  CHECK(post.covariance.at(3, 2) == 0.0);
  CHECK(post.mean[2] == 0.0);
  CHECK(post.mean[3] == 0.0);
}

TEST_CASE("gaussian statistic vs a log-mean-exp sampling oracle") {
  TrialDataset data = toy_trial();
  ExternalDataset ext = toy_external();
  const double sigma2 = 2.0;
  GaussianPosterior post = fit_gaussian_posterior(ext, sigma2);
  double statistic = stat_m_gaussian(data, data.assignments, post);

  // Dropped permutation-invariant constant:
  //   -(n/2) log 2pi - y'y/2 - log|V_E|/2 - mu_E' V_E^{-1} mu_E / 2.
  double yty = 0;
  for (double v : data.outcomes) yty += v * v;
  double log_det_ve =
      -CholeskyFactor(post.control_precision).log_det() + 2 * std::log(sigma2);
  double quad = 0;
  for (int j = 0; j < 2; ++j) quad += post.mean[j] * post.control_rhs[j];
  double constant = -0.5 * data.n * std::log(2 * M_PI) - 0.5 * yty -
                    0.5 * log_det_ve - 0.5 * quad;

  RngStream stream(515, 0);
  const long draws = 1000000;
  std::vector<double> logq(draws);
  double max_logq = -1e300;
  for (long it = 0; it < draws; ++it) {
    auto theta = mvn_sample(post.mean, post.covariance, stream);
    double lq = 0;
    for (int i = 0; i < data.n; ++i) {
      double mean = theta[0] + theta[1] * data.covariate(i, 0);
      if (data.assignments[i]) {
        mean += theta[2] + theta[3] * data.covariate(i, 0);
      }
      double r = data.outcomes[i] - mean;
      lq += -0.5 * std::log(2 * M_PI) - 0.5 * r * r;
    }
    logq[it] = lq;
    max_logq = std::max(max_logq, lq);
  }
  double sum_w = 0, sum_w2 = 0;
  for (double lq : logq) {
    double w = std::exp(lq - max_logq);
    sum_w += w;
    sum_w2 += w * w;
  }
  double mean_w = sum_w / draws;
  double log_marginal = max_logq + std::log(mean_w);
  double sd_w = std::sqrt((sum_w2 / draws - mean_w * mean_w));
  double se_log = sd_w / (mean_w * std::sqrt(static_cast<double>(draws)));

  CHECK(std::abs(statistic + constant - log_marginal) < 3 * se_log);
}

TEST_CASE("gaussian statistic: permuting assignments equals permuting rows") {
  TrialDataset data = toy_trial();
  GaussianPosterior post = fit_gaussian_posterior(toy_external(), 3.0);
  RngStream s(808, 0);
  for (int rep = 0; rep < 20; ++rep) {
    PermutationIndex tau = random_permutation(data.n, s);
    auto permuted = permute_assignments(data.assignments, tau);
    double direct = stat_m_gaussian(data, permuted, post);

    // Reorder the whole dataset rows by any sigma together with the
    // permuted assignments; the statistic must not change.
    PermutationIndex sigma = random_permutation(data.n, s);
    std::vector<double> y2(data.n), x2(data.n);
    std::vector<int> a2(data.n);
    for (int i = 0; i < data.n; ++i) {
      y2[i] = data.outcomes[sigma.order[i]];
      x2[i] = data.covariate(sigma.order[i], 0);
      a2[i] = permuted[sigma.order[i]];
    }
    TrialDataset reordered = TrialDataset::create(y2, x2, a2, 1);
    double shuffled = stat_m_gaussian(reordered, reordered.assignments, post);
    CHECK(std::abs(direct - shuffled) <=
          1e-12 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("gaussian statistic with empty external data matches the no-ED "
          "closed form") {
  TrialDataset data = toy_trial();
  const double sigma2 = 10.0;
  GaussianPosterior prior = fit_gaussian_posterior(ExternalDataset::empty(1),
                                                   sigma2);
  double statistic = stat_m_gaussian(data, data.assignments, prior);

  // Independent assembly: V' = (X'X + I/sigma2)^{-1}, mu' = V' X'y,
  // statistic = mu' V'^{-1} mu / 2 + log|V'| / 2.
  const int p = 4;
  SymmetricMatrix xtx = SymmetricMatrix::identity(p, 1.0 / sigma2);
  std::vector<double> xty(p, 0.0);
  for (int i = 0; i < data.n; ++i) {
    std::vector<double> row{1.0, data.covariate(i, 0),
                            static_cast<double>(data.assignments[i]),
                            data.assignments[i] ? data.covariate(i, 0) : 0.0};
    xtx.add_outer(row);
    for (int j = 0; j < p; ++j) xty[j] += data.outcomes[i] * row[j];
  }
  CholeskyFactor chol(xtx);
  auto mu = chol.solve(xty);
  double quad = dot(mu, xty);
  double expected = 0.5 * quad - 0.5 * chol.log_det();
  CHECK(statistic == doctest::Approx(expected).epsilon(1e-12));
}

namespace {

TrialDataset centered_trial() {
  // Treated and control sums both zero: the joint posterior mean is 0.
  std::vector<double> y{1.0, -1.0, 1.0, -1.0};
  std::vector<int> a{1, 1, 0, 0};
  return TrialDataset::create(y, {}, a, 0);
}

}  // namespace

TEST_CASE("one-sided regret statistic on a centered posterior is the "
          "half-normal mean") {
  TrialDataset data = centered_trial();
  StatisticSpec spec;
  spec.family = Family::gaussian_linear;
  spec.kind = StatKind::m2;
  spec.prior_variance = 1.0;
  spec.mc_draws = 400000;
  spec.prevalences = {1.0};

  FittedStatistic stat = FittedStatistic::make(spec,
                                               ExternalDataset::empty(0));
  RngStream stream(99, 0);
  double value = stat.evaluate(data, data.assignments, &stream);

  // Effect coordinate variance from P = [[5, 2], [2, 3]].
  double var = 5.0 / 11.0;
  double target = std::sqrt(var) / std::sqrt(2 * M_PI);
  double mc_sd = std::sqrt(var * (0.5 - 1.0 / (2 * M_PI)));
  CHECK(std::abs(value - target) < 3 * mc_sd / std::sqrt(400000.0));
}

TEST_CASE("positive and negative regret add to the absolute-effect mean") {
  TrialDataset data = centered_trial();
  StatisticSpec spec;
  spec.family = Family::gaussian_linear;
  spec.kind = StatKind::m2;
  spec.prior_variance = 1.0;
  spec.mc_draws = 400000;
  spec.prevalences = {1.0};
  FittedStatistic stat = FittedStatistic::make(spec,
                                               ExternalDataset::empty(0));
  RngStream s1(99, 1), s2(99, 2);
  double pos = stat.evaluate(data, data.assignments, &s1);
  spec.direction = Direction::negative;
  FittedStatistic neg_stat = FittedStatistic::make(spec,
                                                   ExternalDataset::empty(0));
  double neg = neg_stat.evaluate(data, data.assignments, &s2);
  double var = 5.0 / 11.0;
  double target = std::sqrt(var) * std::sqrt(2.0 / M_PI);
  double tol = 6 * std::sqrt(var * 0.34) / std::sqrt(400000.0);
  CHECK(std::abs(pos + neg - target) < tol);
}

TEST_CASE("regret statistic near a point-mass posterior returns the effect") {
  const long n1 = 50000;
  const double effect = 0.25;
  std::vector<double> y(2 * n1, 0.0);
  std::vector<int> a(2 * n1, 0);
  for (long i = 0; i < n1; ++i) {
    a[i] = 1;
    y[i] = effect;
  }
  TrialDataset data = TrialDataset::create(y, {}, a, 0);
  StatisticSpec spec;
  spec.family = Family::gaussian_linear;
  spec.kind = StatKind::m2;
  spec.prior_variance = 1e12;
  spec.mc_draws = 200000;
  spec.prevalences = {1.0};
  FittedStatistic stat = FittedStatistic::make(spec,
                                               ExternalDataset::empty(0));
  RngStream stream(7, 0);
  double value = stat.evaluate(data, data.assignments, &stream);
  CHECK(std::abs(value - effect) < 1e-3);
}

TEST_CASE("two-subgroup one-sided statistics vs a quadrature oracle") {
  // K = 2 toy with one indicator covariate.
  const int n = 30;
  RngStream gen(31, 0);
  std::vector<double> y(n), x(n);
  std::vector<int> a(n);
  for (int i = 0; i < n; ++i) {
    x[i] = (i % 2 == 0) ? 1.0 : 0.0;
    a[i] = i < n / 2 ? 1 : 0;
    y[i] = 0.3 * a[i] + 0.2 * x[i] - 0.15 * a[i] * x[i] + draw_normal(gen);
  }
  TrialDataset data = TrialDataset::create(y, x, a, 1);
  const int nE = 20;
  std::vector<double> yE(nE), xE(nE);
  for (int i = 0; i < nE; ++i) {
    xE[i] = (i % 2 == 0) ? 1.0 : 0.0;
    yE[i] = 0.1 * xE[i] + draw_normal(gen);
  }
  ExternalDataset ext = ExternalDataset::create(yE, xE,
                                                std::vector<int>(nE, 0), 1);

  const double sigma2 = 10.0;
  StatisticSpec spec;
  spec.family = Family::gaussian_linear;
  spec.kind = StatKind::m1;
  spec.prior_variance = sigma2;
  spec.mc_draws = 2000000;
  spec.threshold = 0.05;
  spec.prevalences = {0.4, 0.6};

  // Oracle: assemble the joint posterior by hand, project on
  // (theta_a, theta_a + theta_ax), integrate the bivariate normal.
  const int p = 4;
  SymmetricMatrix precision = SymmetricMatrix::identity(p, 1.0 / sigma2);
  std::vector<double> rhs(p, 0.0);
  for (int i = 0; i < nE; ++i) {
    std::vector<double> row{1.0, xE[i], 0.0, 0.0};
    precision.add_outer(row);
    for (int j = 0; j < 2; ++j) rhs[j] += yE[i] * row[j];
  }
  for (int i = 0; i < n; ++i) {
    std::vector<double> row{1.0, x[i], static_cast<double>(a[i]),
                            a[i] ? x[i] : 0.0};
    precision.add_outer(row);
    for (int j = 0; j < p; ++j) rhs[j] += y[i] * row[j];
  }
  CholeskyFactor chol(precision);
  auto mu = chol.solve(rhs);
  // Effects: e1 = theta_2 (reference group), e2 = theta_2 + theta_3.
  std::vector<double> t1{0, 0, 1, 0}, t2{0, 0, 1, 1};
  auto c1 = chol.solve(t1);
  auto c2 = chol.solve(t2);
  double m1e = dot(t1, mu), m2e = dot(t2, mu);
  double v11 = dot(t1, c1), v22 = dot(t2, c2), v12 = dot(t1, c2);

  double det = v11 * v22 - v12 * v12;
  auto density = [&](double e1, double e2) {
    double d1 = e1 - m1e, d2 = e2 - m2e;
    double q = (v22 * d1 * d1 - 2 * v12 * d1 * d2 + v11 * d2 * d2) / det;
    return std::exp(-0.5 * q) / (2 * M_PI * std::sqrt(det));
  };
  double s1 = std::sqrt(v11), s2 = std::sqrt(v22);
  double lo1 = m1e - 8 * s1, hi1 = m1e + 8 * s1;
  double lo2 = m2e - 8 * s2, hi2 = m2e + 8 * s2;

  double thr = spec.threshold;
  double p_none = oracles::gauss_legendre_2d(
      [&](double e1, double e2) {
        return (e1 <= thr && e2 <= thr) ? density(e1, e2) : 0.0;
      },
      lo1, hi1, lo2, hi2, 96);
  double oracle_m1 = 1 - p_none;

  double oracle_m2 = oracles::gauss_legendre_2d(
      [&](double e1, double e2) {
        double g = 0.4 * std::max(e1, 0.0) + 0.6 * std::max(e2, 0.0);
        return g * density(e1, e2);
      },
      lo1, hi1, lo2, hi2, 96);

  FittedStatistic m1_stat = FittedStatistic::make(spec, ext);
  RngStream stream(5150, 0);
  double m1_value = m1_stat.evaluate(data, data.assignments, &stream);
  double se1 = std::sqrt(oracle_m1 * (1 - oracle_m1) / spec.mc_draws);
  CHECK(std::abs(m1_value - oracle_m1) < 3 * se1);

  spec.kind = StatKind::m2;
  FittedStatistic m2_stat = FittedStatistic::make(spec, ext);
  RngStream stream2(5150, 1);
  double m2_value = m2_stat.evaluate(data, data.assignments, &stream2);
  // Generous variance bound for the regret draw.
  double sd2 = 0.4 * s1 + 0.6 * s2 + std::abs(m1e) + std::abs(m2e);
  CHECK(std::abs(m2_value - oracle_m2) < 3 * sd2 / std::sqrt(2000000.0));
}

TEST_CASE("m1 range and prevalence validation") {
  TrialDataset data = centered_trial();
  StatisticSpec spec;
  spec.family = Family::gaussian_linear;
  spec.kind = StatKind::m2;
  spec.prevalences = {0.7, 0.7};
  CHECK_THROWS_AS(
      FittedStatistic::make(spec, ExternalDataset::empty(0))
          .evaluate(data, data.assignments, nullptr),
      ConfigError);
}
