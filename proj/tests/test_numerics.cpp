#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "edpt/errors.hpp"
#include "edpt/numerics.hpp"
#include "edpt/rng.hpp"

using namespace edpt;

TEST_CASE("log_gamma reference values") {
  CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(log_gamma(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-14));
  CHECK(log_gamma(0.5) ==
        doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-14));
  CHECK_THROWS_AS(log_gamma(0.0), NumericalError);
  CHECK_THROWS_AS(log_gamma(-2.5), NumericalError);
}

TEST_CASE("normal cdf basics") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  for (double z : {-3.7, -1.1, -0.2, 0.4, 1.9, 4.2}) {
    CHECK(normal_cdf(z) + normal_cdf(-z) ==
          doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("normal quantile matches the tabulated 97.5% point") {
  CHECK(normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK_THROWS_AS(normal_quantile(0.0), NumericalError);
  CHECK_THROWS_AS(normal_quantile(1.0), NumericalError);
}

TEST_CASE("normal quantile round trip to 1e-12") {
  for (double p = 1e-8; p < 1; p = p < 0.1 ? p * 3 : p + 0.07) {
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) <= 1e-12);
  }
  CHECK(std::abs(normal_cdf(normal_quantile(1 - 1e-9)) - (1 - 1e-9)) <= 1e-12);
}

TEST_CASE("noncentral chi-square reduces to the central cdf at lambda 0") {
  for (double t : {0.5, 2.0, 7.3, 20.0}) {
    for (int k : {1, 3, 8}) {
      CHECK(noncentral_chisq_cdf(t, k, 0.0) ==
            doctest::Approx(chisq_cdf(t, k)).epsilon(1e-13));
    }
  }
}

TEST_CASE("noncentral chi-square k=1 folded-normal identity") {
  for (double t : {0.2, 1.0, 4.0, 11.0}) {
    for (double lambda : {0.1, 1.0, 3.5, 12.0}) {
      double folded = normal_cdf(std::sqrt(t) - std::sqrt(lambda)) -
                      normal_cdf(-std::sqrt(t) - std::sqrt(lambda));
      CHECK(noncentral_chisq_cdf(t, 1, lambda) ==
            doctest::Approx(folded).epsilon(1e-10));
    }
  }
}

TEST_CASE("noncentral chi-square cdf vs sampling oracle at k=3") {
  RngStream stream(20240817, 0);
  auto [est, se] = noncentral_chisq_cdf_mc(4.0, 3, 2.5, 10000000, stream);
  double cdf = noncentral_chisq_cdf(4.0, 3, 2.5);
  CHECK(std::abs(cdf - est) < 3 * se);
}

TEST_CASE("noncentral chi-square monotonicity") {
  for (int k : {1, 2, 5}) {
    double prev = -1;
    for (double t = 0.5; t < 40; t += 0.5) {
      double c = noncentral_chisq_cdf(t, k, 3.0);
      CHECK(c >= prev);
      prev = c;
    }
    prev = 2;
    for (double lambda = 0; lambda < 30; lambda += 0.5) {
      double c = noncentral_chisq_cdf(8.0, k, lambda);
      CHECK(c <= prev + 1e-13);
      prev = c;
    }
  }
}

TEST_CASE("noncentral chi-square quantile inverts the cdf") {
  for (int k : {1, 2, 4}) {
    for (double lambda : {0.0, 1.5, 9.0, 60.0}) {
      for (double p : {0.01, 0.3, 0.5, 0.95, 0.999}) {
        double q = noncentral_chisq_quantile(p, k, lambda);
        CHECK(std::abs(noncentral_chisq_cdf(q, k, lambda) - p) < 1e-8);
      }
    }
  }
}

TEST_CASE("central chi-square quantile inverts the cdf") {
  for (double k : {1.0, 4.0, 11.0}) {
    for (double p : {0.05, 0.5, 0.95}) {
      CHECK(chisq_cdf(chisq_quantile(p, k), k) ==
            doctest::Approx(p).epsilon(1e-10));
    }
  }
}

TEST_CASE("hypergeometric log pmf") {
  // Exhaustive draw: n1 = N forces k = K.
  CHECK(hypergeom_log_pmf(3, 5, 5, 3) == doctest::Approx(0.0).epsilon(1e-13));
  // Direct combinatorial count: C(2,1) C(2,1) / C(4,2) = 4/6.
  CHECK(hypergeom_log_pmf(1, 2, 4, 2) ==
        doctest::Approx(std::log(2.0 / 3.0)).epsilon(1e-13));
  CHECK_THROWS_AS(hypergeom_log_pmf(3, 2, 4, 2), NumericalError);
}

TEST_CASE("hypergeometric pmf sums to one over the support") {
  for (auto [n1, N, K] : {std::tuple{5L, 12L, 7L}, {3L, 9L, 2L},
                          {40L, 100L, 55L}}) {
    long lo = std::max(0L, n1 + K - N);
    long hi = std::min(n1, K);
    double total = 0;
    for (long k = lo; k <= hi; ++k) {
      total += std::exp(hypergeom_log_pmf(k, n1, N, K));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("incomplete beta against closed forms") {
  // I_x(1, b) = 1 - (1-x)^b and I_x(a, 1) = x^a.
  for (double x : {0.1, 0.4, 0.9}) {
    CHECK(incomplete_beta(1, 3, x) ==
          doctest::Approx(1 - std::pow(1 - x, 3)).epsilon(1e-12));
    CHECK(incomplete_beta(2.5, 1, x) ==
          doctest::Approx(std::pow(x, 2.5)).epsilon(1e-12));
  }
  // Symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
  CHECK(incomplete_beta(3.5, 2.25, 0.37) ==
        doctest::Approx(1 - incomplete_beta(2.25, 3.5, 0.63)).epsilon(1e-12));
}

TEST_CASE("expit and logit are inverse") {
  // Beyond |x| ~ 15 the round trip loses digits to 1-p cancellation.
  for (double x : {-15.0, -3.0, 0.0, 1.5, 15.0}) {
    CHECK(std::abs(logit(expit(x)) - x) < 1e-7);
  }
  CHECK_THROWS_AS(logit(0.0), NumericalError);
}

TEST_CASE("adaptive quadrature on a known integral") {
  double v = integrate([](double x) { return std::exp(-x * x); }, 0.0, 3.0);
  CHECK(v == doctest::Approx(0.5 * std::sqrt(M_PI) * std::erf(3.0))
                 .epsilon(1e-10));
}
