#include "edpt/perm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <json.hpp>

#include "edpt/errors.hpp"
#include "edpt/numerics.hpp"
#include "edpt/parallel.hpp"

namespace edpt {

bool approx_eq(double a, double b, double rel_tol) {
  return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

bool approx_ge(double a, double b, double rel_tol) {
  return a >= b || approx_eq(a, b, rel_tol);
}

std::string to_json_string(const TestResult& r) {
  nlohmann::json j{{"statistic_value", r.statistic_value},
                   {"p_value", r.p_value},
                   {"reject", r.reject},
                   {"alpha", r.alpha},
                   {"permutations", r.permutations},
                   {"permuted_exceed_count", r.permuted_exceed_count},
                   {"tie_count", r.tie_count},
                   {"seed", {{"master_seed", r.seed.master_seed},
                             {"stream_id", r.seed.stream_id}}}};
  return j.dump();
}

namespace {

constexpr std::uint32_t kObservedSubstream = 1;

std::uint32_t shuffle_substream(long j) {
  return static_cast<std::uint32_t>(2 * j);
}
std::uint32_t statistic_substream(long j, bool shared) {
  return shared ? kObservedSubstream : static_cast<std::uint32_t>(2 * j + 1);
}

}  // namespace

TestResult permutation_test(const TrialDataset& data,
                            const FittedStatistic& stat, long permutations,
                            double alpha, const SeedSpec& seed, int workers) {
  if (permutations < 1) {
    throw ConfigError("permutation_test: J must be >= 1");
  }
  if (!(alpha >= 0 && alpha <= 1)) {
    throw ConfigError("permutation_test: alpha must be in [0,1]");
  }
  auto prepared = stat.prepare(data);
  const bool mc = stat.uses_mc();
  const bool shared = stat.spec().shared_mc_stream;

  double observed;
  {
    RngStream stream(seed, kObservedSubstream);
    observed = prepared->evaluate(data.assignments, mc ? &stream : nullptr);
  }
  if (!std::isfinite(observed)) {
    throw NumericalError("permutation_test: observed statistic not finite");
  }

  const int n = data.n;
  std::vector<std::uint8_t> exceed(permutations, 0), tie(permutations, 0);
  parallel_for(1, permutations + 1, workers, [&](long j) {
    RngStream shuffle_stream(seed, shuffle_substream(j));
    PermutationIndex tau = random_permutation(n, shuffle_stream);
    std::vector<int> permuted = permute_assignments(data.assignments, tau);
    double value;
    try {
      RngStream stat_stream(seed, statistic_substream(j, shared));
      value = prepared->evaluate(permuted, mc ? &stat_stream : nullptr);
    } catch (const Error& e) {
      throw NumericalError("permutation_test: statistic failed on "
                           "permutation " + std::to_string(j) + ": " +
                           e.what());
    }
    if (approx_ge(value, observed)) exceed[j - 1] = 1;
    if (approx_eq(value, observed)) tie[j - 1] = 1;
  });

  TestResult result;
  result.statistic_value = observed;
  result.alpha = alpha;
  result.permutations = permutations;
  result.seed = seed;
  for (long j = 0; j < permutations; ++j) {
    result.permuted_exceed_count += exceed[j];
    result.tie_count += tie[j];
  }
  result.p_value = static_cast<double>(1 + result.permuted_exceed_count) /
                   static_cast<double>(1 + permutations);
  result.reject = result.p_value <= alpha;
  return result;
}

namespace {

// Visits every distinct arrangement of n1 treated among n positions in
// lexicographic order; fn receives the assignment vector and the
// arrangement index.
void for_each_arrangement(
    int n, int n1, const std::function<void(std::span<const int>, long)>& fn) {
  std::vector<int> picks(n1);
  for (int i = 0; i < n1; ++i) picks[i] = i;
  std::vector<int> assignment(n, 0);
  long index = 0;
  for (;;) {
    std::fill(assignment.begin(), assignment.end(), 0);
    for (int pos : picks) assignment[pos] = 1;
    fn(assignment, index++);
    int i = n1 - 1;
    while (i >= 0 && picks[i] == n - n1 + i) --i;
    if (i < 0) break;
    ++picks[i];
    for (int j = i + 1; j < n1; ++j) picks[j] = picks[j - 1] + 1;
  }
}

long checked_orbit_size(const TrialDataset& data,
                        const EnumerationOptions& options) {
  int n1 = data.treated_count();
  double log_size = log_choose(data.n, n1);
  if (log_size > std::log(static_cast<double>(options.max_arrangements)) +
                     1e-9) {
    throw ConfigError("exact enumeration: C(n, n1) exceeds the cap of " +
                      std::to_string(options.max_arrangements));
  }
  return std::lround(std::exp(log_size));
}

std::vector<double> orbit_values(const TrialDataset& data,
                                 const FittedStatistic& stat,
                                 const SeedSpec& seed, long orbit_size) {
  auto prepared = stat.prepare(data);
  const bool mc = stat.uses_mc();
  const bool shared = stat.spec().shared_mc_stream;
  std::vector<double> values(orbit_size);
  for_each_arrangement(
      data.n, data.treated_count(),
      [&](std::span<const int> assignment, long index) {
        RngStream stream(seed, statistic_substream(index + 1, shared));
        values[index] = prepared->evaluate(assignment, mc ? &stream : nullptr);
      });
  return values;
}

}  // namespace

double exact_permutation_test(const TrialDataset& data,
                              const FittedStatistic& stat,
                              const SeedSpec& seed,
                              const EnumerationOptions& options) {
  long orbit_size = checked_orbit_size(data, options);
  auto prepared = stat.prepare(data);
  const bool mc = stat.uses_mc();
  double observed;
  {
    RngStream stream(seed, kObservedSubstream);
    observed = prepared->evaluate(data.assignments, mc ? &stream : nullptr);
  }
  std::vector<double> values = orbit_values(data, stat, seed, orbit_size);
  long count = 0;
  for (double v : values) {
    if (approx_ge(v, observed)) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(orbit_size);
}

RandomizedDecision randomized_phi_reference(const TrialDataset& data,
                                            const FittedStatistic& stat,
                                            double alpha, const SeedSpec& seed,
                                            const EnumerationOptions& options) {
  if (!(alpha >= 0 && alpha <= 1)) {
    throw ConfigError("randomized_phi_reference: alpha must be in [0,1]");
  }
  long orbit_size = checked_orbit_size(data, options);
  auto prepared = stat.prepare(data);
  const bool mc = stat.uses_mc();
  double observed;
  {
    RngStream stream(seed, kObservedSubstream);
    observed = prepared->evaluate(data.assignments, mc ? &stream : nullptr);
  }

  std::vector<double> values = orbit_values(data, stat, seed, orbit_size);
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());

  long idx = static_cast<long>(
      std::ceil((1.0 - alpha) * static_cast<double>(orbit_size))) - 1;
  idx = std::clamp(idx, 0L, orbit_size - 1);
  double t_alpha = sorted[idx];

  long count_gt = 0, count_eq = 0;
  for (double v : sorted) {
    if (approx_eq(v, t_alpha)) {
      ++count_eq;
    } else if (v > t_alpha) {
      ++count_gt;
    }
  }

  RandomizedDecision decision;
  decision.threshold_t_alpha = t_alpha;
  if (approx_eq(observed, t_alpha)) {
    double frac = (alpha * static_cast<double>(orbit_size) - count_gt) /
                  static_cast<double>(count_eq);
    decision.phi = std::clamp(frac, 0.0, 1.0);
  } else if (observed > t_alpha) {
    decision.phi = 1.0;
  } else {
    decision.phi = 0.0;
  }
  return decision;
}

}  // namespace edpt
