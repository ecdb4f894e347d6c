#pragma once

#include <string>

#include "edpt/models.hpp"

namespace edpt {

struct TestResult {
  double statistic_value = 0;
  double p_value = 1;
  bool reject = false;
  double alpha = 0.05;
  long permutations = 0;           // J
  long permuted_exceed_count = 0;  // # of m_j >= m(D), ties included
  long tie_count = 0;              // # of m_j within tolerance of m(D)
  SeedSpec seed;
};

std::string to_json_string(const TestResult& result);

struct RandomizedDecision {
  double phi = 0;  // rejection probability; fractional only at the quantile
  double threshold_t_alpha = 0;
};

// a >= b up to relative tolerance; near-equal values count as >=, which can
// only inflate the p-value.
bool approx_ge(double a, double b, double rel_tol = 1e-12);
bool approx_eq(double a, double b, double rel_tol = 1e-12);

// Monte Carlo permutation test: evaluates the statistic on the observed
// assignments and on J uniformly random permutations of them;
// p = (1 + #{m_j >= m(D)}) / (1 + J), reject iff p <= alpha.
//
// Stream layout under (seed.master_seed, seed.stream_id): substream 1 feeds
// the observed statistic's draws, substream 2j the j-th permutation shuffle
// and substream 2j+1 its statistic draws (j = 1..J). With the statistic's
// shared_mc_stream policy every statistic evaluation reads substream 1
// instead.
TestResult permutation_test(const TrialDataset& data,
                            const FittedStatistic& stat, long permutations,
                            double alpha, const SeedSpec& seed,
                            int workers = 1);

struct EnumerationOptions {
  long max_arrangements = 1000000;  // cap on C(n, n1)
};

// Exact p-value over all distinct treated/control arrangements (orderings
// within an arm cancel). The statistic stream (for Monte Carlo statistics)
// uses the same substream layout with arrangement index in place of j.
double exact_permutation_test(const TrialDataset& data,
                              const FittedStatistic& stat,
                              const SeedSpec& seed = {},
                              const EnumerationOptions& options = {});

// The randomized-decision reference: t_alpha is the (1-alpha) orbit
// quantile; phi is 1 above it, 0 below it, and the tie fraction exactly at
// it, so that the orbit average of phi equals alpha.
RandomizedDecision randomized_phi_reference(const TrialDataset& data,
                                            const FittedStatistic& stat,
                                            double alpha,
                                            const SeedSpec& seed = {},
                                            const EnumerationOptions& options = {});

}  // namespace edpt
