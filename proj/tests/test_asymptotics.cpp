#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "edpt/asymptotics.hpp"
#include "edpt/errors.hpp"
#include "edpt/numerics.hpp"
#include "edpt/perm.hpp"
#include "edpt/rng.hpp"

using namespace edpt;

TEST_CASE("p-value approximation is 1 on a symmetric construction") {
  // The reflection point coincides with the observed count, so the max and
  // min arguments collapse to the hypergeometric mean.
  // n1 = n0 = 100, s1 = s0 = 10, nE = 500, sE = 50.
  double p = approx_pvalue_binary(10, 20, 50, 100, 1.0, 5.0);
  CHECK(p == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("p-value approximation converges to the exact value") {
  // The large-sample approximation is still ~20% off at n1 = 200 and
  // tightens as the counts scale up (checked against an independent
  // enumeration oracle during development).
  double r = 0.5, rE = 5.0;
  {
    long n1 = 200, s1 = 110, s = 150, sE = 510;
    BinaryCounts c{n1, s1, static_cast<long>(r * n1), s - s1,
                   static_cast<long>(rE * n1), sE};
    double exact = exact_pvalue_binary(c);
    double approx = approx_pvalue_binary(s1, s, sE, n1, r, rE);
    CHECK(std::abs(approx - exact) <= 0.25 * exact);
  }
  {
    long n1 = 1000, s1 = 550, s = 750, sE = 2550;
    BinaryCounts c{n1, s1, static_cast<long>(r * n1), s - s1,
                   static_cast<long>(rE * n1), sE};
    double exact = exact_pvalue_binary(c);
    double approx = approx_pvalue_binary(s1, s, sE, n1, r, rE);
    CHECK(std::abs(approx - exact) <= 0.05 * exact);
  }
}

TEST_CASE("degenerate responder totals are rejected") {
  CHECK_THROWS_AS(approx_pvalue_binary(0, 0, 10, 50, 1.0, 2.0),
                  NumericalError);
}

TEST_CASE("exact p-value is 1 at the statistic-minimizing count and lies in "
          "(0, 1]") {
  RngStream gen(5050, 0);
  for (int rep = 0; rep < 100; ++rep) {
    long n1 = 1 + gen.uniform_below(12);
    long n0 = 1 + gen.uniform_below(12);
    long s = gen.uniform_below(static_cast<std::uint32_t>(n1 + n0 + 1));
    long nE = gen.uniform_below(30);
    long sE = nE ? gen.uniform_below(static_cast<std::uint32_t>(nE + 1)) : 0;
    long lo = std::max(0L, s - n0), hi = std::min(n1, s);

    double min_stat = 1e300;
    long argmin = lo;
    for (long s1 = lo; s1 <= hi; ++s1) {
      BinaryCounts c{n1, s1, n0, s - s1, nE, sE};
      double v = stat_m_binary(c);
      if (v < min_stat) {
        min_stat = v;
        argmin = s1;
      }
    }
    BinaryCounts at_min{n1, argmin, n0, s - argmin, nE, sE};
    CHECK(exact_pvalue_binary(at_min) == doctest::Approx(1.0).epsilon(1e-12));

    long s1 = lo + gen.uniform_below(static_cast<std::uint32_t>(hi - lo + 1));
    BinaryCounts any{n1, s1, n0, s - s1, nE, sE};
    double p = exact_pvalue_binary(any);
    CHECK(p > 0.0);
    CHECK(p <= 1.0 + 1e-12);
  }
}

TEST_CASE("limiting power at a = b = 0 is the level") {
  BinaryAsymptoticParams params;
  params.a = 0;
  params.b = 0;
  auto est = limiting_power_binary(params, 200000, {21, 0}, 2);
  CHECK(std::abs(est.estimate - 0.05) <= 3 * est.se);

  auto inf = limiting_power_binary_infinite_ed(params, 200000, {21, 1}, 2);
  CHECK(std::abs(inf.estimate - 0.05) <= 3 * inf.se);
}

TEST_CASE("closed-form approximation: null reduction and the large-a limit") {
  BinaryAsymptoticParams params;
  params.a = 0;
  CHECK(limiting_power_binary_approx(params) ==
        doctest::Approx(0.05).epsilon(1e-12));
  params.a = 40;
  CHECK(limiting_power_binary_approx(params) ==
        doctest::Approx(1.0).epsilon(1e-9));
  params.a = 2;
  params.r = 0.5;
  double hand = normal_cdf(2 * std::sqrt(0.5) / std::sqrt(1.5 * 0.25) -
                           normal_quantile(0.95));
  CHECK(limiting_power_binary_approx(params) ==
        doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("monte carlo limit agrees with the closed form in its regime") {
  BinaryAsymptoticParams params;
  params.r = 0.5;
  params.rE = 5;
  params.w0 = 0.5;
  params.b = 0;
  params.a = 2.0;
  auto mc = limiting_power_binary(params, 400000, {22, 0}, 2);
  CHECK(std::abs(mc.estimate - limiting_power_binary_approx(params)) < 0.01);
}

TEST_CASE("infinite-external limit is the large-rE limit") {
  BinaryAsymptoticParams params;
  params.r = 0.8;
  params.a = 1.2;
  params.b = 0.5;
  params.rE = 1e6;
  auto big = limiting_power_binary(params, 400000, {23, 0}, 2);
  auto inf = limiting_power_binary_infinite_ed(params, 400000, {23, 1}, 2);
  CHECK(std::abs(big.estimate - inf.estimate) <=
        2 * std::sqrt(big.se * big.se + inf.se * inf.se));
}

TEST_CASE("external discrepancy alone cannot move the size off the level") {
  // With a = 0 the trial law is permutation invariant whatever b is, so the
  // limiting rejection rate stays at alpha: the shifted coordinate drops
  // out of the two-sided comparison.
  BinaryAsymptoticParams params;
  params.a = 0;
  for (double b : {1.0, 3.0, -2.0}) {
    params.b = b;
    auto est = limiting_power_binary(params, 200000, {24, 0}, 2);
    CHECK(std::abs(est.estimate - 0.05) <= 3 * est.se);
    auto inf = limiting_power_binary_infinite_ed(params, 200000, {24, 1}, 2);
    CHECK(std::abs(inf.estimate - 0.05) <= 3 * inf.se);
  }
}

TEST_CASE("limiting power is nondecreasing in a for b = 0") {
  BinaryAsymptoticParams params;
  params.r = 1.0;
  params.rE = 5.0;
  double prev = -1;
  double prev_se = 0;
  for (double a = 0; a <= 3.0; a += 0.5) {
    params.a = a;
    auto est = limiting_power_binary(params, 200000, {25, 0}, 2);
    CHECK(est.estimate >=
          prev - 2 * std::sqrt(est.se * est.se + prev_se * prev_se));
    prev = est.estimate;
    prev_se = est.se;
  }
}

TEST_CASE("subgroup limiting power at a = b = 0 is the level") {
  SubgroupAsymptoticParams params;
  params.rho = {0.5, 0.5};
  params.a = {0, 0};
  params.b = {0, 0};
  auto est = limiting_power_subgroups(params, SubgroupFamily::gaussian, 20000,
                                      {26, 0}, 2);
  CHECK(std::abs(est.estimate - 0.05) <= 3 * est.se);
}

TEST_CASE("binary subgroup limit with K = 1 matches the bivariate limit") {
  SubgroupAsymptoticParams params;
  params.rho = {1.0};
  params.a = {1.5};
  params.b = {0.4};
  params.r = 0.5;
  params.rE = 5.0;
  params.omega = {0.5};
  auto sub = limiting_power_subgroups(params, SubgroupFamily::binary, 40000,
                                      {27, 0}, 2);

  BinaryAsymptoticParams flat;
  flat.r = 0.5;
  flat.rE = 5.0;
  flat.a = 1.5;
  flat.b = 0.4;
  flat.w0 = 0.5;
  auto biv = limiting_power_binary(flat, 400000, {27, 1}, 2);
  CHECK(std::abs(sub.estimate - biv.estimate) <=
        2 * std::sqrt(sub.se * sub.se + biv.se * biv.se));
}

TEST_CASE("the scaled noncentral representation matches direct monte carlo") {
  // F(t) for one v draw: direct simulation of sum_k (c_k + v_k + s Z_k)^2.
  const double r = 0.5, rE = 7.5;
  const double s2 = r * (1 + r + rE) / rE;
  std::vector<double> c{1.2, -0.3};
  std::vector<double> v{0.4, 0.9};
  const double t = 9.0;

  double lambda = 0;
  for (int g = 0; g < 2; ++g) {
    lambda += (c[g] + v[g]) * (c[g] + v[g]) / s2;
  }
  double series = noncentral_chisq_cdf(t / s2, 2, lambda);

  RngStream stream(28, 0);
  const long draws = 2000000;
  long hits = 0;
  for (long i = 0; i < draws; ++i) {
    double total = 0;
    for (int g = 0; g < 2; ++g) {
      double z = c[g] + v[g] + std::sqrt(s2) * draw_normal(stream);
      total += z * z;
    }
    if (total <= t) ++hits;
  }
  double mc = static_cast<double>(hits) / draws;
  double se = std::sqrt(mc * (1 - mc) / draws);
  CHECK(std::abs(series - mc) <= 3 * se);
}

TEST_CASE("zero-mass subgroups are rejected, not silently dropped") {
  // The per-group noise in the subgroup limit does not scale with rho, so
  // a zero-mass group is not the same object as omitting the group; the
  // parameter check enforces strictly positive shares.
  SubgroupAsymptoticParams params;
  params.rho = {1.0, 0.0};
  params.a = {2.0, 0.0};
  params.b = {0.0, 0.0};
  CHECK_THROWS_AS(
      limiting_power_subgroups(params, SubgroupFamily::gaussian, 1000,
                               {29, 0}),
      ConfigError);
}

TEST_CASE("omega is required for the binary subgroup family") {
  SubgroupAsymptoticParams params;
  params.rho = {0.5, 0.5};
  params.a = {1, 0};
  params.b = {0, 0};
  CHECK_THROWS_AS(
      limiting_power_subgroups(params, SubgroupFamily::binary, 1000, {30, 0}),
      ConfigError);
}
