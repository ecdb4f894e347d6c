#pragma once

#include <optional>
#include <string>

#include "edpt/models.hpp"

namespace edpt {

enum class WaldVariant { id_only, merged, oracle };
enum class Sidedness { two_sided, one_sided };

struct BaselineResult {
  std::string test_name;
  double statistic = 0;
  int df = 0;  // 0 for Z-form tests
  double p_value = 1;
  bool reject = false;
};

// Wald tests on response proportions. The oracle variant compares the
// experimental rate against the known control rate w0 and is meaningful
// only inside simulations. Degenerate variance estimates throw
// TestInapplicable rather than applying a continuity correction.
BaselineResult wald_binary(const BinaryCounts& c, WaldVariant variant,
                           double alpha, Sidedness sided = Sidedness::two_sided,
                           double oracle_w0 = 0.5);

struct LinearOracle {
  double eta0 = 0;
  std::vector<double> beta1;  // control regression slope, length d
};

// Wald test of the treatment coefficients (theta_a, theta_ax) under the
// unit-variance linear working model; chi-square with d+1 degrees of
// freedom. merged stacks the external rows as controls; oracle regresses
// the known-control residuals of the treated patients on (1, X).
BaselineResult wald_linear(const TrialDataset& data,
                           const ExternalDataset* ext, WaldVariant variant,
                           double alpha,
                           const std::optional<LinearOracle>& oracle = {});

// Likelihood-ratio test of the treatment-linked logistic coefficients
// (unpenalized maximum likelihood; separation reports TestInapplicable).
// With ext present the fits pool trial and external rows.
BaselineResult lr_test_logistic(const TrialDataset& data,
                                const ExternalDataset* ext,
                                const LogisticModelSpec& model, double alpha);

// Two-sample Z test on arm means with plug-in (1/n) variances, two-sided.
BaselineResult two_sample_z(const TrialDataset& data, double alpha);

// The matching permutation statistic with no external data: identical to
// the external-data statistic evaluated with an empty cohort.
FittedStatistic perm_stat_no_ed(const StatisticSpec& spec, int d);

}  // namespace edpt
