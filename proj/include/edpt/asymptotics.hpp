#pragma once

#include <vector>

#include "edpt/models.hpp"
#include "edpt/rng.hpp"

namespace edpt {

struct BinaryAsymptoticParams {
  double r = 0.5;   // n0 / n1
  double rE = 5.0;  // nE / n1
  double a = 0;     // local treatment effect: gamma = a / sqrt(n1)
  double b = 0;     // local external discrepancy: beta0 = b / sqrt(n1)
  double w0 = 0.5;  // control response rate
  double alpha = 0.05;
};

struct SubgroupAsymptoticParams {
  std::vector<double> rho;  // subgroup shares, sum to 1, all > 0
  std::vector<double> a;    // per-subgroup local effects
  std::vector<double> b;    // per-subgroup local discrepancies
  double r = 0.5;
  double rE = 7.5;
  double alpha = 0.05;
  std::vector<double> omega;  // control response rates (binary family only)
};

enum class SubgroupFamily { gaussian, binary };

struct McEstimate {
  double estimate = 0;
  double se = 0;
  long n_mc = 0;
};

// Large-sample normal approximation of the exact permutation p-value for
// the binary statistic.
double approx_pvalue_binary(long s1, long s, long sE, long n1, double r,
                            double rE);

// Exact p-value via the hypergeometric permutation distribution of the
// treated responder count; identical to exact_permutation_test on the same
// data.
double exact_pvalue_binary(const BinaryCounts& c);

// Limiting power of the binary test: Monte Carlo over the bivariate normal
// limit of the standardized responder counts.
McEstimate limiting_power_binary(const BinaryAsymptoticParams& params,
                                 long n_mc, const SeedSpec& seed = {},
                                 int workers = 1);

// Closed-form approximation, intended for a >= 1.5 with b = 0.
double limiting_power_binary_approx(const BinaryAsymptoticParams& params);

// The rE -> infinity limit.
McEstimate limiting_power_binary_infinite_ed(
    const BinaryAsymptoticParams& params, long n_mc, const SeedSpec& seed = {},
    int workers = 1);

// Limiting power with K subgroups: outer Monte Carlo over the shared
// normal shift v, inner evaluation via scaled noncentral chi-square CDFs.
McEstimate limiting_power_subgroups(const SubgroupAsymptoticParams& params,
                                    SubgroupFamily family, long n_mc_v,
                                    const SeedSpec& seed = {}, int workers = 1);

}  // namespace edpt
